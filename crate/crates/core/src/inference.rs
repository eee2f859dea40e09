//! Candidate energies and minimum-energy selection.
//!
//! Each candidate's energy is its negated summed candidate value plus a
//! consistency prior: the candidate is lifted to 3D, projected back to 2D,
//! and both 2D poses are compared after removing translation and scale.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    normalize_pose, project_orthographic, project_perspective, CameraModel, NormalizedPose2D,
    Pose2D, Pose3D,
};
use crate::heatmap::{extract_candidates, CandidateGenerator, HeatMapVolume, JointCandidateSet};
use crate::lifter::PoseLifter;
use crate::nbest::{n_best_poses, PoseCandidate};

/// Projection used to re-project the lifted pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PriorMode {
    Perspective { camera: CameraModel },
    Orthographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    /// Prior strength.
    pub lambda: f64,
    /// Mean-shift bandwidth in heat-map cells (also the NMS radius).
    pub bandwidth: f64,
    /// Candidates per joint and pose candidates enumerated.
    pub candidates: usize,
    pub prior: PriorMode,
    pub generator: CandidateGenerator,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            bandwidth: 3.0,
            candidates: 128,
            prior: PriorMode::Orthographic,
            generator: CandidateGenerator::MeanShift,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if self.candidates == 0 {
            return Err(Error::InvalidArgument(
                "candidate count must be at least 1".into(),
            ));
        }
        if let PriorMode::Perspective { camera } = &self.prior {
            camera.validate()?;
        }
        if let CandidateGenerator::Nms { upscale: 0 } = self.generator {
            return Err(Error::InvalidArgument(
                "NMS upscale must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn consistency(lambda: f64, input: &NormalizedPose2D, reprojected: &Pose2D) -> Result<f64> {
    let reprojected = normalize_pose(reprojected)?;
    Ok(lambda * input.squared_distance(&reprojected))
}

/// Prior of an already-lifted pose. `lifted` is zero-mean; `offset` places it in the camera frame.
fn prior_of_lift(
    mode: &PriorMode,
    lambda: f64,
    input: &NormalizedPose2D,
    lifted: &Pose3D,
    offset: &Vector3<f64>,
) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(0.0);
    }
    match mode {
        PriorMode::Perspective { camera } => {
            let reprojected = project_perspective(&lifted.translated(offset), camera)?;
            consistency(lambda, input, &reprojected)
        }
        PriorMode::Orthographic => consistency(lambda, input, &project_orthographic(lifted)),
    }
}

/// Perspective consistency prior. Returns the prior and the zero-mean lift.
pub fn prior_perspective(
    pose: &Pose2D,
    lifter: &impl PoseLifter,
    camera: &CameraModel,
    lambda: f64,
) -> Result<(f64, Pose3D)> {
    let input = normalize_pose(pose)?;
    let lifted = lifter.lift(pose)?;
    let v = prior_of_lift(
        &PriorMode::Perspective { camera: *camera },
        lambda,
        &input,
        &lifted,
        &lifter.mean_offset(),
    )?;
    Ok((v, lifted))
}

/// Orthographic consistency prior. Returns the prior and the zero-mean lift.
pub fn prior_orthographic(
    pose: &Pose2D,
    lifter: &impl PoseLifter,
    lambda: f64,
) -> Result<(f64, Pose3D)> {
    let input = normalize_pose(pose)?;
    let lifted = lifter.lift(pose)?;
    let v = prior_of_lift(
        &PriorMode::Orthographic,
        lambda,
        &input,
        &lifted,
        &Vector3::zeros(),
    )?;
    Ok((v, lifted))
}

/// One enumerated candidate with its energy terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub indices: Vec<usize>,
    /// Candidate pose in original-image pixels.
    pub pose: Pose2D,
    pub score: f64,
    pub prior: f64,
    /// `−score + prior`; infinite when the prior could not be evaluated.
    pub energy: f64,
    #[serde(skip)]
    pub lifted: Option<Pose3D>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub best_2d: Pose2D,
    /// Zero-mean lift of `best_2d`.
    pub best_3d: Pose3D,
    /// `best_3d` shifted by the lifter's mean offset.
    pub best_3d_absolute: Pose3D,
    /// Zero-based position of the winner in `candidates` (score order).
    pub k_star: usize,
    pub candidates: Vec<CandidateEvaluation>,
}

impl InferenceResult {
    pub fn energies(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.energy).collect()
    }
}

/// Maps an enumerated assignment to image pixels.
pub fn candidate_pose(
    volume: &HeatMapVolume,
    candidates: &JointCandidateSet,
    pose: &PoseCandidate,
) -> Pose2D {
    let size = volume.grid_size();
    Pose2D {
        joints: pose
            .indices
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                volume
                    .bbox
                    .grid_to_image(&candidates.joints[j][k].position, size)
            })
            .collect(),
    }
}

/// Scores already-enumerated candidates and selects the minimum energy.
pub fn select(
    volume: &HeatMapVolume,
    candidates: &JointCandidateSet,
    poses: &[PoseCandidate],
    lifter: &impl PoseLifter,
    config: &InferenceConfig,
) -> Result<InferenceResult> {
    let images: Vec<Pose2D> = poses
        .iter()
        .map(|p| candidate_pose(volume, candidates, p))
        .collect();
    let lifts = lifter.lift_many(&images);
    let offset = lifter.mean_offset();

    let mut evaluations = Vec::with_capacity(poses.len());
    for ((candidate, image), lifted) in poses.iter().zip(images).zip(lifts) {
        let outcome = lifted.and_then(|lifted| {
            let input = normalize_pose(&image)?;
            match prior_of_lift(&config.prior, config.lambda, &input, &lifted, &offset) {
                Ok(v) => Ok((Some(lifted), Ok(v))),
                Err(e) => Ok((Some(lifted), Err(e))),
            }
        });
        let (lifted, prior) = match outcome {
            Ok((lifted, prior)) => (lifted, prior),
            Err(e) => (None, Err(e)),
        };
        let (prior, energy, failure) = match prior {
            Ok(v) => (v, -candidate.score + v, None),
            Err(e) => (f64::INFINITY, f64::INFINITY, Some(e.to_string())),
        };
        evaluations.push(CandidateEvaluation {
            indices: candidate.indices.clone(),
            pose: image,
            score: candidate.score,
            prior,
            energy,
            lifted,
            failure,
        });
    }

    let mut k_star = 0;
    for (k, e) in evaluations.iter().enumerate() {
        if e.energy < evaluations[k_star].energy {
            k_star = k;
        }
    }
    let winner = &evaluations[k_star];
    let best_3d = winner.lifted.clone().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no candidate could be lifted: {:?}",
            winner.failure
        ))
    })?;
    Ok(InferenceResult {
        best_2d: winner.pose.clone(),
        best_3d_absolute: best_3d.translated(&offset),
        best_3d,
        k_star,
        candidates: evaluations,
    })
}

/// Full pipeline for one frame: candidates, enumeration, energies, argmin.
pub fn infer(
    volume: &HeatMapVolume,
    lifter: &impl PoseLifter,
    config: &InferenceConfig,
) -> Result<InferenceResult> {
    config.validate()?;
    if volume.joint_count() != lifter.joint_count() {
        return Err(Error::DimensionMismatch {
            expected: lifter.joint_count(),
            actual: volume.joint_count(),
        });
    }
    let candidates = extract_candidates(
        volume,
        config.generator,
        config.bandwidth,
        config.candidates,
    )?;
    let poses = n_best_poses(&candidates, config.candidates)?;
    select(volume, &candidates, &poses, lifter, config)
}

/// Per-joint top-1 decode in image pixels.
pub fn greedy_decode(volume: &HeatMapVolume, config: &InferenceConfig) -> Result<Pose2D> {
    let candidates = extract_candidates(volume, config.generator, config.bandwidth, 1)?;
    let top = PoseCandidate {
        indices: vec![0; candidates.joint_count()],
        score: 0.0,
    };
    Ok(candidate_pose(volume, &candidates, &top))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::heatmap::Grid;
    use nalgebra::Vector2;

    /// Returns the same 3D pose for every input.
    struct ConstantLifter(Pose3D, Vector3<f64>);

    impl PoseLifter for ConstantLifter {
        fn joint_count(&self) -> usize {
            self.0.len()
        }
        fn lift(&self, pose: &Pose2D) -> Result<Pose3D> {
            normalize_pose(pose)?;
            Ok(self.0.centered())
        }
        fn mean_offset(&self) -> Vector3<f64> {
            self.1
        }
    }

    /// Lifts (x, y) to (a·x + c, y, 0) after centering.
    struct LinearLifter(f64);

    impl PoseLifter for LinearLifter {
        fn joint_count(&self) -> usize {
            3
        }
        fn lift(&self, pose: &Pose2D) -> Result<Pose3D> {
            let c = pose.centroid();
            Ok(Pose3D {
                joints: pose
                    .joints
                    .iter()
                    .map(|p| Vector3::new(self.0 * (p.x - c.x), p.y - c.y, 0.0))
                    .collect(),
            })
        }
    }

    fn tri() -> Pose2D {
        Pose2D::from_xy(&[[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]]).unwrap()
    }

    #[test]
    fn zero_lambda_gives_zero_prior() {
        let lifter = ConstantLifter(
            Pose3D::from_xyz(&[[1.0, 0.0, 0.0], [0.0, 5.0, 0.0], [2.0, 2.0, 9.0]]).unwrap(),
            Vector3::new(0.0, 0.0, 3000.0),
        );
        let cam = CameraModel::new(1000.0, 1000.0, 0.0, 0.0).unwrap();
        assert_eq!(
            prior_perspective(&tri(), &lifter, &cam, 0.0).unwrap().0,
            0.0
        );
        assert_eq!(prior_orthographic(&tri(), &lifter, 0.0).unwrap().0, 0.0);
    }

    #[test]
    fn similar_reprojection_has_zero_orthographic_prior() {
        let pose = tri();
        // (X, Y) equals the centered input: normalization makes them identical.
        let lifter = LinearLifter(1.0);
        let (v, _) = prior_orthographic(&pose, &lifter, 1.0).unwrap();
        assert!(v < 1e-9);
        let scaled = pose.map(|p| p * 7.5 + Vector2::new(100.0, -3.0));
        assert!(prior_orthographic(&scaled, &lifter, 1.0).unwrap().0 < 1e-9);
    }

    #[test]
    fn mirrored_reprojection_matches_hand_computation() {
        let pose = tri();
        let lifter = LinearLifter(-1.0);
        let n = normalize_pose(&pose).unwrap();
        let expected: f64 = n.joints.iter().map(|p| (2.0 * p.x).powi(2)).sum();
        let (v, _) = prior_orthographic(&pose, &lifter, 2.5).unwrap();
        assert!((v - 2.5 * expected).abs() < 1e-12);
    }

    #[test]
    fn constant_lifter_perspective_prior_by_hand() {
        let x3 = Pose3D::from_xyz(&[[-100.0, 0.0, 0.0], [100.0, 0.0, 0.0], [0.0, 200.0, 100.0]])
            .unwrap();
        let offset = Vector3::new(50.0, -20.0, 2000.0);
        let lifter = ConstantLifter(x3.clone(), offset);
        let cam = CameraModel::new(800.0, 900.0, 320.0, 240.0).unwrap();
        let pose = tri();
        // Independent evaluation: center, offset, pinhole, normalize, squared difference.
        let c = x3.centroid();
        let y: Vec<Vector2<f64>> = x3
            .joints
            .iter()
            .map(|p| {
                let q = p - c + offset;
                Vector2::new(800.0 * q.x / q.z + 320.0, 900.0 * q.y / q.z + 240.0)
            })
            .collect();
        let norm = |pts: &[Vector2<f64>]| {
            let m = pts.iter().sum::<Vector2<f64>>() / pts.len() as f64;
            let s =
                (pts.iter().map(|p| (p - m).norm_squared()).sum::<f64>() / pts.len() as f64).sqrt();
            pts.iter().map(|p| (p - m) / s).collect::<Vec<_>>()
        };
        let a = norm(&pose.joints);
        let b = norm(&y);
        let expected: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).norm_squared()).sum();
        let (v, lifted) = prior_perspective(&pose, &lifter, &cam, 0.7).unwrap();
        assert!((v - 0.7 * expected).abs() < 1e-12);
        assert!(lifted.centroid().norm() < 1e-9);
    }

    #[test]
    fn behind_camera_lift_is_an_error() {
        let lifter = ConstantLifter(
            Pose3D::from_xyz(&[[0.0, 0.0, -500.0], [0.0, 0.0, 500.0], [10.0, 0.0, 0.0]]).unwrap(),
            Vector3::zeros(),
        );
        let cam = CameraModel::new(800.0, 800.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            prior_perspective(&tri(), &lifter, &cam, 1.0),
            Err(Error::BehindCamera { .. })
        ));
    }

    fn bump_volume(centers: &[Vec<(f64, f64, f64)>]) -> HeatMapVolume {
        let maps = centers
            .iter()
            .map(|bumps| {
                Grid::from_fn(32, 32, |x, y| {
                    bumps
                        .iter()
                        .map(|&(cx, cy, w)| {
                            w * (-((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)) / 2.0).exp()
                        })
                        .sum()
                })
                .unwrap()
            })
            .collect();
        HeatMapVolume::new(
            maps,
            BoundingBox::new(Vector2::new(100.0, 50.0), 320.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_lambda_selects_greedy_pose() {
        let volume = bump_volume(&[
            vec![(5.0, 5.0, 1.0), (20.0, 20.0, 0.9)],
            vec![(25.0, 6.0, 0.8), (8.0, 24.0, 1.0)],
            vec![(16.0, 28.0, 1.0)],
        ]);
        let config = InferenceConfig {
            lambda: 0.0,
            candidates: 8,
            ..Default::default()
        };
        let result = infer(&volume, &LinearLifter(-1.0), &config).unwrap();
        assert_eq!(result.k_star, 0);
        assert_eq!(result.best_2d, greedy_decode(&volume, &config).unwrap());
        assert_eq!(result.candidates.len(), 4);
        for c in &result.candidates {
            assert!((c.energy - (-c.score + c.prior)).abs() < 1e-9);
        }
    }

    #[test]
    fn prior_can_overturn_score_order() {
        // Joint 2's top mode makes the pose inconsistent with a lifter that
        // mirrors x; its second mode keeps the triangle symmetric.
        let volume = bump_volume(&[
            vec![(10.0, 10.0, 1.0)],
            vec![(22.0, 10.0, 1.0)],
            vec![(28.0, 26.0, 1.05), (16.0, 26.0, 1.0)],
        ]);
        let config = InferenceConfig {
            lambda: 1.0,
            candidates: 8,
            ..Default::default()
        };
        let result = infer(&volume, &LinearLifter(-1.0), &config).unwrap();
        assert_eq!(result.candidates.len(), 2);
        assert_eq!(result.k_star, 1);
        let energies = result.energies();
        assert!(energies.iter().all(|&e| e >= energies[result.k_star]));
    }

    #[test]
    fn failed_priors_get_infinite_energy() {
        let volume = bump_volume(&[
            vec![(10.0, 10.0, 1.0)],
            vec![(22.0, 10.0, 1.0)],
            vec![(16.0, 26.0, 1.0), (4.0, 4.0, 0.5)],
        ]);
        let lifter = ConstantLifter(
            Pose3D::from_xyz(&[[0.0, 0.0, -500.0], [0.0, 0.0, 500.0], [10.0, 0.0, 0.0]]).unwrap(),
            Vector3::zeros(),
        );
        let config = InferenceConfig {
            prior: PriorMode::Perspective {
                camera: CameraModel::new(800.0, 800.0, 0.0, 0.0).unwrap(),
            },
            candidates: 4,
            ..Default::default()
        };
        let result = infer(&volume, &lifter, &config).unwrap();
        assert!(result
            .candidates
            .iter()
            .all(|c| c.energy.is_infinite() && c.failure.is_some()));
        assert_eq!(result.k_star, 0);
    }

    #[test]
    fn joint_count_mismatch_rejected() {
        let volume = bump_volume(&[vec![(10.0, 10.0, 1.0)], vec![(22.0, 10.0, 1.0)]]);
        assert!(matches!(
            infer(&volume, &LinearLifter(1.0), &InferenceConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
