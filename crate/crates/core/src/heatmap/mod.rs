//! Heat-map volumes and per-joint candidate extraction.

mod grid;
mod meanshift;
mod nms;
mod render;
mod volume;

use serde::{Deserialize, Serialize};

pub use grid::Grid;
pub use meanshift::{
    climb, find_modes, kde_value, mean_shift_step, shadow_density, Mode, CONVERGENCE_TOLERANCE,
    MAX_ITERATIONS,
};
pub use nms::find_modes_nms;
pub use render::render_groundtruth_heatmap;
pub use volume::{HeatMapVolume, VOLUME_MAGIC};

use crate::error::{Error, Result};

/// How per-joint candidates are proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CandidateGenerator {
    #[default]
    MeanShift,
    Nms {
        upscale: usize,
    },
}

/// Ranked candidate modes for every joint, best first per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCandidateSet {
    pub joints: Vec<Vec<Mode>>,
}

impl JointCandidateSet {
    /// Validates that every joint has at least one candidate and values are sorted descending.
    pub fn new(joints: Vec<Vec<Mode>>) -> Result<Self> {
        for (i, modes) in joints.iter().enumerate() {
            if modes.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "joint {i} has no candidates"
                )));
            }
            if modes.windows(2).any(|w| w[0].value < w[1].value) {
                return Err(Error::InvalidArgument(format!(
                    "joint {i} candidates are not sorted"
                )));
            }
            if modes.iter().any(|m| !m.value.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "joint {i} has a non-finite value"
                )));
            }
        }
        Ok(Self { joints })
    }

    /// Candidates given only by their values; positions are placeholders.
    pub fn from_values(values: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .map(|vs| {
                    vs.iter()
                        .map(|&value| Mode {
                            position: nalgebra::Vector2::zeros(),
                            value,
                        })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    #[inline]
    pub fn value(&self, joint: usize, index: usize) -> f64 {
        self.joints[joint][index].value
    }

    /// Number of candidate poses in the full product.
    pub fn product_size(&self) -> u128 {
        self.joints
            .iter()
            .fold(1u128, |acc, m| acc.saturating_mul(m.len() as u128))
    }
}

/// Proposes up to `max_candidates` modes for every joint map of the volume.
pub fn extract_candidates(
    volume: &HeatMapVolume,
    generator: CandidateGenerator,
    bandwidth: f64,
    max_candidates: usize,
) -> Result<JointCandidateSet> {
    let joints = volume
        .maps
        .iter()
        .map(|g| match generator {
            CandidateGenerator::MeanShift => find_modes(g, bandwidth, max_candidates),
            CandidateGenerator::Nms { upscale } => {
                find_modes_nms(g, max_candidates, upscale, bandwidth)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    JointCandidateSet::new(joints)
}
