use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::skeleton::{sample_pose, SkeletonSpec};
use crate::error::{Error, Result};
use crate::geometry::{project_perspective, BoundingBox, CameraModel, Pose2D, Pose3D};
use crate::heatmap::{Grid, HeatMapVolume};
use crate::seed::derive_seed;

/// Spurious high-likelihood bumps and background noise added to rendered heat maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorruptionSpec {
    /// Chance that a joint's map receives one distractor.
    pub distractor_probability: f64,
    /// Distractor distance from the true joint, uniform in `[min, max]` heat-map pixels.
    pub offset_min: f64,
    pub offset_max: f64,
    /// Distractor peak relative to the true joint's peak of 1.
    pub strength: f64,
    /// Every pixel receives independent uniform noise in `[0, noise_floor]`.
    pub noise_floor: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        CorruptionSpec {
            distractor_probability: 0.0,
            offset_min: 5.0,
            offset_max: 12.0,
            strength: 1.1,
            noise_floor: 0.0,
        }
    }
}

impl CorruptionSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// Corruption level used by the prior-effectiveness benchmark.
    pub fn benchmark() -> Self {
        CorruptionSpec {
            distractor_probability: 0.15,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.distractor_probability) {
            return Err(Error::InvalidArgument(format!(
                "distractor probability must lie in [0, 1], got {}",
                self.distractor_probability
            )));
        }
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "distractor strength must be >= 0, got {}",
                self.strength
            )));
        }
        if !(self.offset_min >= 0.0
            && self.offset_min <= self.offset_max
            && self.offset_max.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "distractor offsets need 0 <= min <= max, got [{}, {}]",
                self.offset_min, self.offset_max
            )));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise floor must be >= 0, got {}",
                self.noise_floor
            )));
        }
        Ok(())
    }
}

/// How the subject box and its heat maps are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxPolicy {
    /// Fractional enlargement of the tight square around the projected joints.
    pub margin: f64,
    pub grid_size: usize,
    /// Gaussian standard deviation in heat-map pixels.
    pub sigma: f64,
}

impl Default for BoxPolicy {
    fn default() -> Self {
        BoxPolicy {
            margin: 0.15,
            grid_size: 32,
            sigma: 1.0,
        }
    }
}

impl BoxPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "box margin must be >= 0, got {}",
                self.margin
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be at least 2, got {}",
                self.grid_size
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Where the root joint is placed in camera coordinates (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Placement {
    pub depth: [f64; 2],
    pub lateral: [f64; 2],
    pub vertical: [f64; 2],
}

impl Default for Placement {
    fn default() -> Self {
        Placement {
            depth: [3000.0, 6000.0],
            lateral: [-1000.0, 1000.0],
            vertical: [-300.0, 300.0],
        }
    }
}

impl Placement {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("depth", self.depth),
            ("lateral", self.lateral),
            ("vertical", self.vertical),
        ] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::InvalidArgument(format!(
                    "{name} range {r:?} is invalid"
                )));
            }
        }
        if self.depth[0] <= 0.0 {
            return Err(Error::InvalidArgument(
                "depth range must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vector3<f64> {
        let draw = |rng: &mut dyn rand::RngCore, r: [f64; 2]| {
            if r[1] > r[0] {
                rng.random_range(r[0]..=r[1])
            } else {
                r[0]
            }
        };
        Vector3::new(
            draw(rng, self.lateral),
            draw(rng, self.vertical),
            draw(rng, self.depth),
        )
    }
}

/// One synthetic frame: rendered heat maps and the ground truth behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub volume: HeatMapVolume,
    /// Projected joints in original-image pixels.
    pub pose_2d: Pose2D,
    /// Joints in camera coordinates (mm).
    pub pose_3d: Pose3D,
}

impl Frame {
    /// Ground-truth joints in 256-pixel crop coordinates.
    pub fn crop_pose(&self) -> Pose2D {
        self.volume.bbox.pose_to_crop(&self.pose_2d)
    }
}

/// Projects `pose`, boxes it, and renders one corrupted Gaussian map per joint.
pub fn make_frame(
    pose: &Pose3D,
    camera: &CameraModel,
    policy: &BoxPolicy,
    corruption: &CorruptionSpec,
    seed: u64,
) -> Result<Frame> {
    policy.validate()?;
    corruption.validate()?;
    let pose_2d = project_perspective(pose, camera)?;
    let bbox = BoundingBox::around(&pose_2d.joints, policy.margin)?;
    let size = policy.grid_size;
    let inv = 1.0 / (2.0 * policy.sigma * policy.sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut maps = Vec::with_capacity(pose_2d.len());
    for joint in &pose_2d.joints {
        let q = bbox.image_to_grid(joint, size);
        let mut bumps = vec![(q, 1.0)];
        if corruption.distractor_probability > 0.0
            && rng.random_bool(corruption.distractor_probability)
        {
            bumps.push((
                distractor_center(&q, size, corruption, &mut rng),
                corruption.strength,
            ));
        }
        let mut values = vec![0.0f32; size * size];
        for y in 0..size {
            for x in 0..size {
                let p = Vector2::new(x as f64, y as f64);
                let mut v = 0.0;
                for (c, a) in &bumps {
                    v += a * (-(p - c).norm_squared() * inv).exp();
                }
                if corruption.noise_floor > 0.0 {
                    v += rng.random_range(0.0..=corruption.noise_floor);
                }
                values[y * size + x] = v as f32;
            }
        }
        maps.push(Grid::new(size, size, values)?);
    }
    Ok(Frame {
        volume: HeatMapVolume::new(maps, bbox)?,
        pose_2d,
        pose_3d: pose.clone(),
    })
}

/// Distractor centers sit on pixel centers so their peak pixel is exactly `strength`.
fn distractor_center(
    q: &Vector2<f64>,
    size: usize,
    spec: &CorruptionSpec,
    rng: &mut impl Rng,
) -> Vector2<f64> {
    let hi = (size - 1) as f64;
    let mut fallback = None;
    for _ in 0..64 {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let radius = if spec.offset_max > spec.offset_min {
            rng.random_range(spec.offset_min..=spec.offset_max)
        } else {
            spec.offset_min
        };
        let c = q + radius * Vector2::new(angle.cos(), angle.sin());
        let c = Vector2::new(c.x.round(), c.y.round());
        if (0.0..=hi).contains(&c.x) && (0.0..=hi).contains(&c.y) {
            return c;
        }
        fallback.get_or_insert(Vector2::new(c.x.clamp(0.0, hi), c.y.clamp(0.0, hi)));
    }
    fallback.unwrap()
}

/// Everything needed to generate a reproducible synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub skeleton: SkeletonSpec,
    pub camera: CameraModel,
    pub placement: Placement,
    #[serde(rename = "box")]
    pub box_policy: BoxPolicy,
    pub corruption: CorruptionSpec,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            skeleton: SkeletonSpec::default(),
            camera: default_camera(),
            placement: Placement::default(),
            box_policy: BoxPolicy::default(),
            corruption: CorruptionSpec::none(),
        }
    }
}

/// 1000×1000 image with a 1150-pixel focal length.
pub fn default_camera() -> CameraModel {
    CameraModel {
        fx: 1150.0,
        fy: 1150.0,
        cx: 500.0,
        cy: 500.0,
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        self.skeleton.validate()?;
        self.camera.validate()?;
        self.placement.validate()?;
        self.box_policy.validate()?;
        self.corruption.validate()
    }

    /// Pose of frame `index` in camera coordinates.
    pub fn scene_pose(&self, seed: u64, index: u64) -> Pose3D {
        let pose = sample_pose(&self.skeleton, derive_seed(seed, "pose", index));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "placement", index));
        pose.translated(&self.placement.sample(&mut rng))
    }

    /// Ground-truth 2D/3D pair of frame `index` without rendering heat maps.
    pub fn pair(&self, seed: u64, index: u64) -> Result<(Pose2D, Pose3D)> {
        let pose = self.scene_pose(seed, index);
        Ok((project_perspective(&pose, &self.camera)?, pose))
    }

    pub fn frame(&self, seed: u64, index: u64) -> Result<Frame> {
        let pose = self.scene_pose(seed, index);
        make_frame(
            &pose,
            &self.camera,
            &self.box_policy,
            &self.corruption,
            derive_seed(seed, "render", index),
        )
    }
}
