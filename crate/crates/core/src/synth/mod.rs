//! Synthetic articulated poses, rendered heat maps, and the evaluation harness.

mod bench;
mod frame;
mod skeleton;

pub use bench::{
    bootstrap_interval, compare, run_benchmark, run_benchmark_with_lifter, test_frames,
    training_pairs, BenchConfig, BenchReport, ComparisonReport, ComparisonSpec, LifterSummary,
    NamedConfig, RowReport, SeedRecord, SplitReport, LIFTER_ROW,
};
pub use frame::{
    default_camera, make_frame, BoxPolicy, CorruptionSpec, DatasetSpec, Frame, Placement,
};
pub use skeleton::{sample_pose, sample_pose_with, SkeletonSpec};
