use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frame::{DatasetSpec, Frame};
use crate::error::{Error, Result};
use crate::geometry::{error_2d, mpjpe, procrustes_error, Pose2D, Pose3D};
use crate::heatmap::extract_candidates;
use crate::inference::{select, InferenceConfig, PriorMode};
use crate::lifter::{train_lifter, LifterModel, LifterTrainConfig, PoseLifter, TrainReport};
use crate::nbest::n_best_poses;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedConfig {
    pub name: String,
    #[serde(flatten)]
    pub inference: InferenceConfig,
}

/// Two rows whose per-frame MPJPE difference (`first − second`) is bootstrapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Dataset used for the test split; training uses the same spec without corruption.
    pub dataset: DatasetSpec,
    pub train_frames: usize,
    pub test_frames: usize,
    pub seed: u64,
    pub lifter: LifterTrainConfig,
    pub configs: Vec<NamedConfig>,
    pub comparisons: Vec<ComparisonSpec>,
    pub bootstrap_resamples: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let unary = InferenceConfig {
            lambda: 0.0,
            ..InferenceConfig::default()
        };
        let orthographic = InferenceConfig::default();
        let perspective = InferenceConfig {
            prior: PriorMode::Perspective {
                camera: super::frame::default_camera(),
            },
            ..InferenceConfig::default()
        };
        let mut dataset = DatasetSpec::default();
        dataset.corruption = super::frame::CorruptionSpec::benchmark();
        BenchConfig {
            dataset,
            train_frames: 5000,
            test_frames: 1000,
            seed: 0,
            lifter: LifterTrainConfig::default(),
            configs: vec![
                NamedConfig {
                    name: "unary".into(),
                    inference: unary,
                },
                NamedConfig {
                    name: "unary+perspective".into(),
                    inference: perspective,
                },
                NamedConfig {
                    name: "unary+orthographic".into(),
                    inference: orthographic,
                },
            ],
            comparisons: vec![
                ComparisonSpec {
                    first: "unary+perspective".into(),
                    second: "unary".into(),
                },
                ComparisonSpec {
                    first: "unary+orthographic".into(),
                    second: "unary".into(),
                },
            ],
            bootstrap_resamples: 1000,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.lifter.validate()?;
        if self.train_frames == 0 || self.test_frames == 0 {
            return Err(Error::InvalidArgument(
                "train and test splits must be non-empty".into(),
            ));
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &self.configs {
            c.inference.validate()?;
            if !names.insert(c.name.as_str()) || c.name == LIFTER_ROW {
                return Err(Error::InvalidArgument(format!(
                    "duplicate or reserved row name {:?}",
                    c.name
                )));
            }
        }
        for c in &self.comparisons {
            for n in [&c.first, &c.second] {
                if !names.contains(n.as_str()) && n != LIFTER_ROW {
                    return Err(Error::InvalidArgument(format!(
                        "comparison refers to unknown row {n:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn train_seed(&self) -> u64 {
        derive_seed(self.seed, "train", 0)
    }

    pub fn test_seed(&self) -> u64 {
        derive_seed(self.seed, "test", 0)
    }
}

/// Row name for lifting the exact ground-truth 2D poses.
pub const LIFTER_ROW: &str = "lifter on ground-truth 2D";

/// Per-frame outcome of one row; metric entries are `None` for failed frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub name: String,
    pub frames: usize,
    pub failures: usize,
    pub mpjpe: f64,
    pub similarity: f64,
    pub error_2d: f64,
    pub per_frame_mpjpe: Vec<Option<f64>>,
    pub per_frame_similarity: Vec<Option<f64>>,
    pub per_frame_error_2d: Vec<Option<f64>>,
    /// Zero-based winning candidate per frame.
    pub k_star: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub first: String,
    pub second: String,
    pub frames: usize,
    /// Mean of `first − second` MPJPE over frames where both succeeded (mm).
    pub mean_delta: f64,
    /// `mean_delta` relative to the second row's mean over the same frames.
    pub relative_delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub root: u64,
    pub train: u64,
    pub test: u64,
    pub lifter: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifterSummary {
    pub final_loss: f64,
    pub target_scale: f64,
    pub epochs: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: String,
    pub rows: Vec<RowReport>,
    pub comparisons: Vec<ComparisonReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seeds: SeedRecord,
    pub parameters: BenchConfig,
    pub lifter: Option<LifterSummary>,
    pub splits: Vec<SplitReport>,
}

impl BenchReport {
    pub fn row(&self, split: &str, name: &str) -> Option<&RowReport> {
        self.splits
            .iter()
            .find(|s| s.split == split)?
            .rows
            .iter()
            .find(|r| r.name == name)
    }

    pub fn comparison(&self, split: &str, first: &str, second: &str) -> Option<&ComparisonReport> {
        self.splits
            .iter()
            .find(|s| s.split == split)?
            .comparisons
            .iter()
            .find(|c| c.first == first && c.second == second)
    }

    /// Human-readable table of mean metrics and comparisons.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for split in &self.splits {
            let _ = writeln!(s, "split: {}", split.split);
            let width = split
                .rows
                .iter()
                .map(|r| r.name.len())
                .max()
                .unwrap_or(4)
                .max(4);
            let _ = writeln!(
                s,
                "{:<width$}  {:>7}  {:>8}  {:>10}  {:>10}  {:>8}",
                "row", "frames", "failures", "MPJPE", "Similarity", "2D"
            );
            for r in &split.rows {
                let _ = writeln!(
                    s,
                    "{:<width$}  {:>7}  {:>8}  {:>10.2}  {:>10.2}  {:>8.2}",
                    r.name, r.frames, r.failures, r.mpjpe, r.similarity, r.error_2d
                );
            }
            for c in &split.comparisons {
                let _ = writeln!(
                    s,
                    "{} vs {}: ΔMPJPE {:+.2} mm ({:+.1}%), {:.0}% CI [{:+.2}, {:+.2}] over {} frames",
                    c.first,
                    c.second,
                    c.mean_delta,
                    100.0 * c.relative_delta,
                    100.0 * c.confidence,
                    c.ci_low,
                    c.ci_high,
                    c.frames
                );
            }
        }
        s
    }
}

/// Ground-truth pairs of the training split, in frame order.
pub fn training_pairs(config: &BenchConfig) -> Result<Vec<(Pose2D, Pose3D)>> {
    let seed = config.train_seed();
    (0..config.train_frames as u64)
        .into_par_iter()
        .map(|i| config.dataset.pair(seed, i))
        .collect()
}

/// Rendered frames of the test split, in frame order.
pub fn test_frames(config: &BenchConfig) -> Result<Vec<Frame>> {
    let seed = config.test_seed();
    (0..config.test_frames as u64)
        .into_par_iter()
        .map(|i| config.dataset.frame(seed, i))
        .collect()
}

/// Trains the lifter on the training split and evaluates every row on the test split.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let mut lifter_config = config.lifter.clone();
    lifter_config.seed = derive_seed(config.seed, "lifter", 0);
    let trained = train_lifter(&training_pairs(config)?, &lifter_config)?;
    let mut report = run_benchmark_with_lifter(config, &trained.model)?;
    report.lifter = Some(summary(&trained.report, &lifter_config));
    Ok(report)
}

fn summary(report: &TrainReport, config: &LifterTrainConfig) -> LifterSummary {
    LifterSummary {
        final_loss: report.final_loss,
        target_scale: report.target_scale,
        epochs: config.epochs,
        samples: report.samples,
    }
}

/// Evaluates every row on the test split with an already trained lifter.
pub fn run_benchmark_with_lifter(
    config: &BenchConfig,
    lifter: &LifterModel,
) -> Result<BenchReport> {
    config.validate()?;
    let frames = test_frames(config)?;
    let lifter_row = evaluate_lifter_only(&frames, lifter);
    let mut rows = vec![lifter_row];
    rows.extend(evaluate_configs(&frames, lifter, &config.configs));

    let comparisons = config
        .comparisons
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let find = |n: &str| {
                rows.iter()
                    .find(|r| r.name == n)
                    .expect("validated row name")
            };
            compare(
                find(&c.first),
                find(&c.second),
                config.bootstrap_resamples,
                derive_seed(config.seed, "bootstrap", i as u64),
            )
        })
        .collect();

    Ok(BenchReport {
        seeds: SeedRecord {
            root: config.seed,
            train: config.train_seed(),
            test: config.test_seed(),
            lifter: derive_seed(config.seed, "lifter", 0),
        },
        parameters: config.clone(),
        lifter: None,
        splits: vec![SplitReport {
            split: "test".into(),
            rows,
            comparisons,
        }],
    })
}

struct FrameMetrics {
    mpjpe: f64,
    similarity: f64,
    error_2d: f64,
    k_star: Option<usize>,
}

fn metrics(
    frame: &Frame,
    est_2d: &Pose2D,
    est_3d: &Pose3D,
    k_star: Option<usize>,
) -> Result<FrameMetrics> {
    Ok(FrameMetrics {
        mpjpe: mpjpe(&frame.pose_3d, est_3d, 0)?,
        similarity: procrustes_error(&frame.pose_3d, est_3d)?,
        error_2d: error_2d(&frame.crop_pose(), &frame.volume.bbox.pose_to_crop(est_2d))?,
        k_star,
    })
}

fn row(name: &str, results: Vec<Result<FrameMetrics>>) -> RowReport {
    let pick = |f: fn(&FrameMetrics) -> f64| -> Vec<Option<f64>> {
        results.iter().map(|r| r.as_ref().ok().map(f)).collect()
    };
    let mean = |v: &[Option<f64>]| {
        let ok: Vec<f64> = v.iter().flatten().copied().collect();
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().sum::<f64>() / ok.len() as f64
        }
    };
    let per_frame_mpjpe = pick(|m| m.mpjpe);
    let per_frame_similarity = pick(|m| m.similarity);
    let per_frame_error_2d = pick(|m| m.error_2d);
    RowReport {
        name: name.to_string(),
        frames: results.len(),
        failures: results.iter().filter(|r| r.is_err()).count(),
        mpjpe: mean(&per_frame_mpjpe),
        similarity: mean(&per_frame_similarity),
        error_2d: mean(&per_frame_error_2d),
        k_star: results
            .iter()
            .map(|r| r.as_ref().ok().and_then(|m| m.k_star))
            .collect(),
        per_frame_mpjpe,
        per_frame_similarity,
        per_frame_error_2d,
    }
}

fn evaluate_lifter_only(frames: &[Frame], lifter: &LifterModel) -> RowReport {
    let results = frames
        .par_iter()
        .map(|f| {
            let lifted = lifter.lift(&f.pose_2d)?;
            metrics(f, &f.pose_2d, &lifted, None)
        })
        .collect();
    row(LIFTER_ROW, results)
}

/// Runs every config on every frame, sharing candidate enumeration between
/// configs that differ only in the prior.
fn evaluate_configs(
    frames: &[Frame],
    lifter: &LifterModel,
    configs: &[NamedConfig],
) -> Vec<RowReport> {
    let per_frame: Vec<Vec<Result<FrameMetrics>>> = frames
        .par_iter()
        .map(|frame| {
            let mut cache = BTreeMap::new();
            configs
                .iter()
                .map(|c| {
                    let cfg = &c.inference;
                    let key = (
                        format!("{:?}", cfg.generator),
                        cfg.bandwidth.to_bits(),
                        cfg.candidates,
                    );
                    let enumerated = cache.entry(key).or_insert_with(|| {
                        extract_candidates(
                            &frame.volume,
                            cfg.generator,
                            cfg.bandwidth,
                            cfg.candidates,
                        )
                        .and_then(|set| {
                            n_best_poses(&set, cfg.candidates).map(|poses| (set, poses))
                        })
                    });
                    let (set, poses) = enumerated
                        .as_ref()
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    let result = select(&frame.volume, set, poses, lifter, cfg)?;
                    metrics(frame, &result.best_2d, &result.best_3d, Some(result.k_star))
                })
                .collect()
        })
        .collect();

    let mut columns: Vec<Vec<Result<FrameMetrics>>> = configs.iter().map(|_| Vec::new()).collect();
    for frame_results in per_frame {
        for (column, r) in columns.iter_mut().zip(frame_results) {
            column.push(r);
        }
    }
    configs
        .iter()
        .zip(columns)
        .map(|(c, results)| row(&c.name, results))
        .collect()
}

/// Percentile bootstrap of the mean per-frame MPJPE difference.
pub fn compare(
    first: &RowReport,
    second: &RowReport,
    resamples: usize,
    seed: u64,
) -> ComparisonReport {
    let pairs: Vec<(f64, f64)> = first
        .per_frame_mpjpe
        .iter()
        .zip(&second.per_frame_mpjpe)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .collect();
    let deltas: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let baseline = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len().max(1) as f64;
    let mean_delta = mean(&deltas);
    let (ci_low, ci_high) = bootstrap_interval(&deltas, resamples, 0.95, seed);
    ComparisonReport {
        first: first.name.clone(),
        second: second.name.clone(),
        frames: deltas.len(),
        mean_delta,
        relative_delta: mean_delta / baseline,
        ci_low,
        ci_high,
        confidence: 0.95,
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Percentile interval of the resampled mean at the given confidence level.
pub fn bootstrap_interval(
    values: &[f64],
    resamples: usize,
    confidence: f64,
    seed: u64,
) -> (f64, f64) {
    if values.is_empty() || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(tail), at(1.0 - tail))
}
