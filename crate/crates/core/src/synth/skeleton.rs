use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose3D;

/// Articulated tree in camera axes (x right, y down, z away from the camera).
///
/// Joint 0 is the root and sits at the origin. Every other joint `j` hangs off
/// `parents[j]` (which must precede it) along `offsets[j]`, a rest-pose bone
/// vector in millimeters whose length is the bone length. `angle_ranges[j]`
/// bounds the Euler angles `[about x, about y, about z]` applied to bone `j` in
/// its parent's frame; for the root they set the global orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonSpec {
    pub names: Vec<String>,
    pub parents: Vec<Option<usize>>,
    pub offsets: Vec<[f64; 3]>,
    pub angle_ranges: Vec<[[f64; 2]; 3]>,
}

const H36M_JOINTS: [(&str, Option<usize>, [f64; 3]); 17] = [
    ("hip", None, [0.0, 0.0, 0.0]),
    ("right_hip", Some(0), [-130.0, 0.0, 0.0]),
    ("right_knee", Some(1), [0.0, 450.0, 0.0]),
    ("right_ankle", Some(2), [0.0, 450.0, 0.0]),
    ("left_hip", Some(0), [130.0, 0.0, 0.0]),
    ("left_knee", Some(4), [0.0, 450.0, 0.0]),
    ("left_ankle", Some(5), [0.0, 450.0, 0.0]),
    ("spine", Some(0), [0.0, -230.0, 0.0]),
    ("thorax", Some(7), [0.0, -250.0, 0.0]),
    ("neck", Some(8), [0.0, -110.0, 0.0]),
    ("head", Some(9), [0.0, -110.0, 0.0]),
    ("left_shoulder", Some(8), [150.0, 0.0, 0.0]),
    ("left_elbow", Some(11), [0.0, 280.0, 0.0]),
    ("left_wrist", Some(12), [0.0, 250.0, 0.0]),
    ("right_shoulder", Some(8), [-150.0, 0.0, 0.0]),
    ("right_elbow", Some(14), [0.0, 280.0, 0.0]),
    ("right_wrist", Some(15), [0.0, 250.0, 0.0]),
];

const H36M_RANGES: [[[f64; 2]; 3]; 17] = [
    [[-0.1, 0.1], [-0.5, 0.5], [-0.1, 0.1]],
    [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
    [[-1.0, 0.2], [0.0, 0.0], [0.0, 0.3]],
    [[0.0, 1.4], [0.0, 0.0], [0.0, 0.0]],
    [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
    [[-1.0, 0.2], [0.0, 0.0], [-0.3, 0.0]],
    [[0.0, 1.4], [0.0, 0.0], [0.0, 0.0]],
    [[0.0, 0.4], [-0.2, 0.2], [-0.1, 0.1]],
    [[0.0, 0.2], [0.0, 0.0], [0.0, 0.0]],
    [[-0.2, 0.3], [0.0, 0.0], [0.0, 0.0]],
    [[-0.3, 0.3], [0.0, 0.0], [-0.2, 0.2]],
    [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
    [[-1.8, 0.3], [-0.4, 0.4], [-1.2, 0.0]],
    [[-2.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
    [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
    [[-1.8, 0.3], [-0.4, 0.4], [0.0, 1.2]],
    [[-2.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
];

impl Default for SkeletonSpec {
    /// 17-joint tree in the Human3.6M joint order.
    fn default() -> Self {
        SkeletonSpec {
            names: H36M_JOINTS.iter().map(|j| j.0.to_string()).collect(),
            parents: H36M_JOINTS.iter().map(|j| j.1).collect(),
            offsets: H36M_JOINTS.iter().map(|j| j.2).collect(),
            angle_ranges: H36M_RANGES.to_vec(),
        }
    }
}

impl SkeletonSpec {
    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.parents.len();
        if m == 0 {
            return Err(Error::InvalidArgument("skeleton has no joints".into()));
        }
        if self.names.len() != m || self.offsets.len() != m || self.angle_ranges.len() != m {
            return Err(Error::InvalidArgument(format!(
                "skeleton field lengths disagree: {} parents, {} names, {} offsets, {} angle ranges",
                m,
                self.names.len(),
                self.offsets.len(),
                self.angle_ranges.len()
            )));
        }
        if self.parents[0].is_some() {
            return Err(Error::InvalidArgument("joint 0 must be the root".into()));
        }
        for j in 1..m {
            match self.parents[j] {
                Some(p) if p < j => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "joint {j} must have a parent with a smaller index"
                    )))
                }
            }
            let length = Vector3::from(self.offsets[j]).norm();
            if !(length > 0.0) || !length.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "bone {j} has non-positive length {length}"
                )));
            }
        }
        for (j, ranges) in self.angle_ranges.iter().enumerate() {
            for r in ranges {
                if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                    return Err(Error::InvalidArgument(format!(
                        "joint {j} has an invalid angle range {r:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bone length per joint; zero for the root.
    pub fn bone_lengths(&self) -> Vec<f64> {
        self.offsets
            .iter()
            .map(|o| Vector3::from(*o).norm())
            .collect()
    }

    pub fn mean_bone_length(&self) -> f64 {
        let lengths = self.bone_lengths();
        lengths[1..].iter().sum::<f64>() / (lengths.len() - 1).max(1) as f64
    }

    /// Joint positions for the given per-joint Euler angles.
    pub fn forward_kinematics(&self, angles: &[[f64; 3]]) -> Pose3D {
        let m = self.joint_count();
        let mut frames: Vec<Rotation3<f64>> = Vec::with_capacity(m);
        let mut joints: Vec<Vector3<f64>> = Vec::with_capacity(m);
        for j in 0..m {
            let local = Rotation3::from_euler_angles(angles[j][0], angles[j][1], angles[j][2]);
            match self.parents[j] {
                None => {
                    frames.push(local);
                    joints.push(Vector3::zeros());
                }
                Some(p) => {
                    let frame = frames[p] * local;
                    joints.push(joints[p] + frame * Vector3::from(self.offsets[j]));
                    frames.push(frame);
                }
            }
        }
        Pose3D { joints }
    }

    pub fn rest_pose(&self) -> Pose3D {
        self.forward_kinematics(&vec![[0.0; 3]; self.joint_count()])
    }
}

/// Root-at-origin pose with joint angles drawn uniformly from their ranges.
pub fn sample_pose(spec: &SkeletonSpec, seed: u64) -> Pose3D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_pose_with(spec, &mut rng)
}

pub fn sample_pose_with(spec: &SkeletonSpec, rng: &mut impl Rng) -> Pose3D {
    let angles: Vec<[f64; 3]> = spec
        .angle_ranges
        .iter()
        .map(|ranges| {
            ranges.map(|[lo, hi]| {
                if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                }
            })
        })
        .collect();
    spec.forward_kinematics(&angles)
}
