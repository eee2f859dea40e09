use nalgebra::Vector2;
use plcrf::geometry::{error_2d, mpjpe, project_perspective, Pose2D};
use plcrf::inference::{greedy_decode, infer, InferenceConfig};
use plcrf::lifter::{train_lifter, LifterTrainConfig, PoseLifter};
use plcrf::synth::{CorruptionSpec, DatasetSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quick_lifter(spec: &DatasetSpec, frames: u64) -> plcrf::lifter::LifterModel {
    let pairs: Vec<_> = (0..frames).map(|i| spec.pair(11, i).unwrap()).collect();
    let config = LifterTrainConfig {
        epochs: 30,
        hidden: vec![64, 64],
        ..Default::default()
    };
    train_lifter(&pairs, &config).unwrap().model
}

#[test]
fn clean_frames_localize_within_half_a_cell() {
    let spec = DatasetSpec::default();
    let config = InferenceConfig::default();
    for i in 0..30 {
        let frame = spec.frame(5, i).unwrap();
        let decoded = greedy_decode(&frame.volume, &config).unwrap();
        let crop = frame.volume.bbox.pose_to_crop(&decoded);
        let cell = 256.0 / frame.volume.grid_size() as f64;
        let e = error_2d(&frame.crop_pose(), &crop).unwrap();
        assert!(
            e <= 0.5 * cell,
            "frame {i}: J_2D {e} crop px exceeds half a cell ({})",
            0.5 * cell
        );
    }
}

#[test]
fn zero_lambda_matches_greedy_decode_on_corrupted_frames() {
    let mut spec = DatasetSpec::default();
    spec.corruption = CorruptionSpec::benchmark();
    let lifter = quick_lifter(&spec, 200);
    let config = InferenceConfig {
        lambda: 0.0,
        candidates: 32,
        ..Default::default()
    };
    for i in 0..15 {
        let frame = spec.frame(6, i).unwrap();
        let result = infer(&frame.volume, &lifter, &config).unwrap();
        assert_eq!(result.k_star, 0);
        assert_eq!(
            result.best_2d,
            greedy_decode(&frame.volume, &config).unwrap()
        );
    }
}

#[test]
fn synthetic_ground_truth_is_self_consistent() {
    let mut spec = DatasetSpec::default();
    spec.corruption = CorruptionSpec::benchmark();
    for i in 0..50 {
        let frame = spec.frame(7, i).unwrap();
        let reprojected = project_perspective(&frame.pose_3d, &spec.camera).unwrap();
        let e = error_2d(
            &frame.crop_pose(),
            &frame.volume.bbox.pose_to_crop(&reprojected),
        )
        .unwrap();
        assert!(e < 1e-9);
    }
}

/// Mean root-relative per-joint distance between lifts of `a` and `b`.
fn lift_distance(lifter: &impl PoseLifter, a: &Pose2D, b: &Pose2D) -> f64 {
    mpjpe(&lifter.lift(a).unwrap(), &lifter.lift(b).unwrap(), 0).unwrap()
}

#[test]
fn clean_pipeline_tracks_lifter_within_localization_budget() {
    let spec = DatasetSpec::default();
    let lifter = quick_lifter(&spec, 400);
    let config = InferenceConfig {
        lambda: 0.0,
        candidates: 8,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut pipeline, mut reference, mut budget) = (0.0, 0.0, 0.0);
    let frames = 25;
    for i in 0..frames {
        let frame = spec.frame(8, i).unwrap();
        let result = infer(&frame.volume, &lifter, &config).unwrap();
        pipeline += mpjpe(&frame.pose_3d, &result.best_3d, 0).unwrap();
        reference += mpjpe(&frame.pose_3d, &lifter.lift(&frame.pose_2d).unwrap(), 0).unwrap();
        // Empirical sensitivity of the lifter to half-cell joint displacements.
        let half_cell = 0.5 * frame.volume.bbox.side / frame.volume.grid_size() as f64;
        let worst = (0..16)
            .map(|_| {
                let moved = frame.pose_2d.map(|p| {
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    p + half_cell
                        * rng.random_range(0.0..=1.0f64).sqrt()
                        * Vector2::new(angle.cos(), angle.sin())
                });
                lift_distance(&lifter, &frame.pose_2d, &moved)
            })
            .fold(0.0, f64::max);
        budget += worst;
    }
    let (pipeline, reference, budget) = (
        pipeline / frames as f64,
        reference / frames as f64,
        budget / frames as f64,
    );
    assert!(
        (pipeline - reference).abs() <= 2.0 * budget,
        "pipeline {pipeline:.2} mm vs lifter {reference:.2} mm exceeds budget {budget:.2} mm"
    );
}
