//! The run configuration file: TOML, every section optional, unknown keys rejected.

use std::path::{Path, PathBuf};

use plcrf::heatmap::CandidateGenerator;
use plcrf::inference::{InferenceConfig, PriorMode};
use plcrf::lifter::{LifterInput, LifterTrainConfig};
use plcrf::synth::{CorruptionSpec, DatasetSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed; every subsystem derives its own stream from it.
    pub seed: u64,
    /// Worker threads for per-frame work; 0 uses every core.
    pub workers: usize,
    pub paths: Paths,
    pub train: TrainSection,
    pub inference: InferenceSection,
    pub dataset: DatasetSpec,
    pub synth: SynthSection,
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub poses_2d: Option<PathBuf>,
    pub poses_3d: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub camera: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub predictions_2d: Option<PathBuf>,
    pub predictions_3d: Option<PathBuf>,
    pub ground_truth_2d: Option<PathBuf>,
    pub ground_truth_3d: Option<PathBuf>,
}

/// Lifter training parameters; the seed comes from the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub noise_std: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub input: LifterInput,
    pub halve_on_increase: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = LifterTrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            momentum: d.momentum,
            epochs: d.epochs,
            noise_std: d.noise_std,
            batch_size: d.batch_size,
            hidden: d.hidden,
            input: d.input,
            halve_on_increase: d.halve_on_increase,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self, seed: u64) -> LifterTrainConfig {
        LifterTrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            epochs: self.epochs,
            noise_std: self.noise_std,
            batch_size: self.batch_size,
            hidden: self.hidden.clone(),
            input: self.input,
            halve_on_increase: self.halve_on_increase,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    Perspective,
    Orthographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    MeanShift,
    Nms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSection {
    pub lambda: f64,
    pub bandwidth: f64,
    pub candidates: usize,
    pub prior: PriorKind,
    pub generator: GeneratorKind,
    /// Upsampling factor for the NMS generator.
    pub upscale: usize,
}

impl Default for InferenceSection {
    fn default() -> Self {
        let d = InferenceConfig::default();
        InferenceSection {
            lambda: d.lambda,
            bandwidth: d.bandwidth,
            candidates: d.candidates,
            prior: PriorKind::Orthographic,
            generator: GeneratorKind::MeanShift,
            upscale: 4,
        }
    }
}

impl InferenceSection {
    pub fn generator(&self) -> CandidateGenerator {
        match self.generator {
            GeneratorKind::MeanShift => CandidateGenerator::MeanShift,
            GeneratorKind::Nms => CandidateGenerator::Nms {
                upscale: self.upscale,
            },
        }
    }

    /// Builds the core config; `camera` is required for the perspective prior.
    pub fn to_config(
        &self,
        camera: Option<plcrf::geometry::CameraModel>,
    ) -> CliResult<InferenceConfig> {
        let prior = match (self.prior, camera) {
            (PriorKind::Orthographic, _) => PriorMode::Orthographic,
            (PriorKind::Perspective, Some(camera)) => PriorMode::Perspective { camera },
            (PriorKind::Perspective, None) => {
                return Err(CliError::usage(
                    "the perspective prior needs a camera file (--camera)",
                ))
            }
        };
        let config = InferenceConfig {
            lambda: self.lambda,
            bandwidth: self.bandwidth,
            candidates: self.candidates,
            prior,
            generator: self.generator(),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub frames: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection { frames: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub train_frames: usize,
    pub test_frames: usize,
    pub bootstrap_resamples: usize,
    /// Corruption applied to test frames; training pairs are always clean.
    pub corruption: CorruptionSpec,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            train_frames: 5000,
            test_frames: 1000,
            bootstrap_resamples: 1000,
            corruption: CorruptionSpec::benchmark(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("reading config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }
}
