use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2D joint positions in pixels, ordered by the skeleton descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub joints: Vec<Vector2<f64>>,
}

/// 3D joint positions in millimeters, camera coordinate system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose3D {
    pub joints: Vec<Vector3<f64>>,
}

/// A 2D pose with translation and scale factored out.
///
/// `joints` has zero mean and unit root-mean-square norm; the source pose
/// is `scale * joints[i] + mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPose2D {
    pub joints: Vec<Vector2<f64>>,
    pub mean: Vector2<f64>,
    pub scale: f64,
}

impl Pose2D {
    pub fn new(joints: Vec<Vector2<f64>>) -> Result<Self> {
        if let Some(i) = joints
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "joint {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { joints })
    }

    pub fn from_xy(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vector2::new(p[0], p[1])).collect())
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn centroid(&self) -> Vector2<f64> {
        let sum: Vector2<f64> = self.joints.iter().sum();
        sum / self.joints.len().max(1) as f64
    }

    /// Applies `f` to every joint.
    pub fn map(&self, f: impl FnMut(&Vector2<f64>) -> Vector2<f64>) -> Pose2D {
        Pose2D {
            joints: self.joints.iter().map(f).collect(),
        }
    }
}

impl Pose3D {
    pub fn new(joints: Vec<Vector3<f64>>) -> Result<Self> {
        if let Some(i) = joints.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "joint {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { joints })
    }

    pub fn from_xyz(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(
            points
                .iter()
                .map(|p| Vector3::new(p[0], p[1], p[2]))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let sum: Vector3<f64> = self.joints.iter().sum();
        sum / self.joints.len().max(1) as f64
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Pose3D {
        Pose3D {
            joints: self.joints.iter().map(|p| p + offset).collect(),
        }
    }

    /// The pose shifted so its centroid is at the origin.
    pub fn centered(&self) -> Pose3D {
        self.translated(&-self.centroid())
    }

    /// Largest distance between any two joints.
    pub fn extent(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.joints.iter().enumerate() {
            for b in &self.joints[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }
}

impl NormalizedPose2D {
    /// Reconstructs the pixel-space pose.
    pub fn denormalize(&self) -> Pose2D {
        Pose2D {
            joints: self
                .joints
                .iter()
                .map(|p| p * self.scale + self.mean)
                .collect(),
        }
    }

    /// Squared distance summed over joints, the quantity the consistency prior is built on.
    pub fn squared_distance(&self, other: &NormalizedPose2D) -> f64 {
        self.joints
            .iter()
            .zip(&other.joints)
            .map(|(a, b)| (a - b).norm_squared())
            .sum()
    }
}

/// Removes translation and scale from a 2D pose: `x̃ᵢ = (xᵢ − m) / σ` with
/// `m` the joint mean and `σ` the root-mean-square distance to it.
pub fn normalize_pose(pose: &Pose2D) -> Result<NormalizedPose2D> {
    let count = pose.joints.len();
    if count < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: count,
        });
    }
    let mean = pose.centroid();
    let variance = pose
        .joints
        .iter()
        .map(|p| (p - mean).norm_squared())
        .sum::<f64>()
        / count as f64;
    let scale = variance.sqrt();
    let magnitude = pose.joints.iter().map(|p| p.amax()).fold(1.0_f64, f64::max);
    if !(scale > 8.0 * f64::EPSILON * magnitude) {
        return Err(Error::DegeneratePose { spread: scale });
    }
    Ok(NormalizedPose2D {
        joints: pose.joints.iter().map(|p| (p - mean) / scale).collect(),
        mean,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_two_point_pose() {
        let pose = Pose2D::from_xy(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let n = normalize_pose(&pose).unwrap();
        assert_eq!(n.mean, Vector2::new(1.0, 0.0));
        assert_eq!(n.scale, 1.0);
        assert_eq!(
            n.joints,
            vec![Vector2::new(-1.0, 0.0), Vector2::new(1.0, 0.0)]
        );
    }

    #[test]
    fn already_normalized_pose_is_unchanged() {
        let pose = Pose2D::from_xy(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let n = normalize_pose(&pose).unwrap();
        assert!(n.mean.norm() < 1e-15);
        assert!((n.scale - 1.0).abs() < 1e-15);
        for (a, b) in n.joints.iter().zip(&pose.joints) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn random_pose_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let joints = (0..17)
                .map(|_| {
                    Vector2::new(
                        rng.random_range(-500.0..1500.0),
                        rng.random_range(-500.0..1500.0),
                    )
                })
                .collect();
            let pose = Pose2D::new(joints).unwrap();
            let n = normalize_pose(&pose).unwrap();
            let back = n.denormalize();
            for (a, b) in back.joints.iter().zip(&pose.joints) {
                assert!((a - b).norm() < 1e-9);
            }
            let mean: Vector2<f64> = n.joints.iter().sum::<Vector2<f64>>() / 17.0;
            assert!(mean.norm() < 1e-9);
            let rms = (n.joints.iter().map(|p| p.norm_squared()).sum::<f64>() / 17.0).sqrt();
            assert!((rms - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn coincident_joints_are_degenerate() {
        let pose = Pose2D::from_xy(&[[3.0, 4.0]; 5]).unwrap();
        assert!(matches!(
            normalize_pose(&pose),
            Err(Error::DegeneratePose { .. })
        ));
    }

    #[test]
    fn single_joint_rejected() {
        let pose = Pose2D::from_xy(&[[3.0, 4.0]]).unwrap();
        assert!(normalize_pose(&pose).is_err());
    }

    #[test]
    fn non_finite_joint_rejected() {
        assert!(Pose2D::from_xy(&[[f64::NAN, 0.0], [1.0, 1.0]]).is_err());
        assert!(Pose3D::from_xyz(&[[0.0, f64::INFINITY, 0.0]]).is_err());
    }
}
