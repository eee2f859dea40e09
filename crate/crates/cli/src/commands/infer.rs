use std::path::PathBuf;

use clap::Args;
use plcrf::formats::{read_camera, read_manifest, record_2d, record_3d, ManifestEntry};
use plcrf::geometry::{Pose2D, Pose3D};
use plcrf::heatmap::HeatMapVolume;
use plcrf::inference::{greedy_decode, infer, InferenceConfig};
use plcrf::lifter::{LifterModel, PoseLifter};
use rayon::prelude::*;
use serde::Serialize;

use super::sha256_hex;
use crate::config::PriorKind;
use crate::error::{CliError, CliResult, Context};
use crate::output::{jsonl, pretty_json, StagedDir};
use crate::{load_config, require_existing, require_path, run_in_pool, Common, InferenceFlags};

#[derive(Args)]
pub struct InferArgs {
    #[command(flatten)]
    common: Common,
    /// Manifest listing one heat-map volume per frame.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Trained lifter model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Camera intrinsics (JSON); required by the perspective prior.
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    overwrite: bool,
    /// Decode each joint's top mode independently instead of running the CRF.
    #[arg(long)]
    greedy: bool,
    #[command(flatten)]
    inference: InferenceFlags,
}

struct Estimate {
    pose_2d: Pose2D,
    pose_3d: Pose3D,
    pose_3d_absolute: Pose3D,
    k_star: Option<usize>,
    energies: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct FrameRecord {
    frame: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_star: Option<usize>,
    /// Energy per enumerated candidate in score order; `null` where the prior failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    energies: Option<Vec<Option<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    seed: u64,
    mode: &'static str,
    frames: usize,
    failures: usize,
    model_sha256: String,
    inference: &'a InferenceConfig,
}

fn estimate(
    entry: &ManifestEntry,
    model: &LifterModel,
    config: &InferenceConfig,
    greedy: bool,
) -> plcrf::Result<Estimate> {
    let volume = HeatMapVolume::load(&entry.path)?;
    if greedy {
        let pose_2d = greedy_decode(&volume, config)?;
        let pose_3d = model.lift(&pose_2d)?;
        return Ok(Estimate {
            pose_3d_absolute: pose_3d.translated(&model.mean_offset),
            pose_2d,
            pose_3d,
            k_star: None,
            energies: None,
        });
    }
    let result = infer(&volume, model, config)?;
    Ok(Estimate {
        energies: Some(result.energies()),
        pose_2d: result.best_2d,
        pose_3d: result.best_3d,
        pose_3d_absolute: result.best_3d_absolute,
        k_star: Some(result.k_star),
    })
}

pub fn run(args: InferArgs) -> CliResult<()> {
    let mut config = load_config(&args.common)?;
    args.inference.apply(&mut config);
    let manifest = require_path(&args.manifest, &config.paths.manifest, "manifest")?;
    let model_path = require_path(&args.model, &config.paths.model, "model")?;
    let output = require_path(&args.output, &config.paths.output, "output")?;
    require_existing(&manifest, "manifest")?;
    require_existing(&model_path, "model file")?;
    let camera_path = args.camera.clone().or(config.paths.camera.clone());
    let camera = match (&camera_path, config.inference.prior) {
        (Some(path), PriorKind::Perspective) => {
            require_existing(path, "camera file")?;
            Some(read_camera(path).context(path.display())?)
        }
        (None, PriorKind::Perspective) => {
            return Err(CliError::usage(
                "the perspective prior needs a camera file (--camera)",
            ))
        }
        _ => None,
    };
    let inference = config.inference.to_config(camera)?;
    let staged = StagedDir::new(&output, args.overwrite)?;

    let model_bytes = std::fs::read(&model_path).context(model_path.display())?;
    let model = plcrf::lifter::from_bytes(&model_bytes, None).context(model_path.display())?;
    let entries = read_manifest(&manifest).context(manifest.display())?;

    let outcomes: Vec<plcrf::Result<Estimate>> = run_in_pool(config.workers, || {
        Ok(entries
            .par_iter()
            .map(|e| estimate(e, &model, &inference, args.greedy))
            .collect())
    })?;

    let mut poses_2d = Vec::new();
    let mut poses_3d = Vec::new();
    let mut poses_3d_absolute = Vec::new();
    let mut frames = Vec::new();
    let mut failures = 0;
    for (entry, outcome) in entries.iter().zip(outcomes) {
        match outcome {
            Ok(est) => {
                poses_2d.push(record_2d(entry.frame, &est.pose_2d));
                poses_3d.push(record_3d(entry.frame, &est.pose_3d));
                poses_3d_absolute.push(record_3d(entry.frame, &est.pose_3d_absolute));
                frames.push(FrameRecord {
                    frame: entry.frame,
                    status: "ok",
                    k_star: est.k_star,
                    energies: est
                        .energies
                        .map(|v| v.into_iter().map(|e| e.is_finite().then_some(e)).collect()),
                    error: None,
                });
            }
            Err(e) => {
                failures += 1;
                eprintln!("frame {}: {e}", entry.frame);
                frames.push(FrameRecord {
                    frame: entry.frame,
                    status: "failed",
                    k_star: None,
                    energies: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    staged.write("poses_2d.jsonl", &jsonl(&poses_2d)?)?;
    staged.write("poses_3d.jsonl", &jsonl(&poses_3d)?)?;
    staged.write("poses_3d_absolute.jsonl", &jsonl(&poses_3d_absolute)?)?;
    staged.write("frames.jsonl", &jsonl(&frames)?)?;
    let record = RunRecord {
        seed: config.seed,
        mode: if args.greedy { "greedy" } else { "crf" },
        frames: entries.len(),
        failures,
        model_sha256: sha256_hex(&model_bytes),
        inference: &inference,
    };
    staged.write("run.json", &pretty_json(&record)?)?;
    staged.commit()?;

    println!(
        "{} frames, {} failed; wrote {}",
        entries.len(),
        failures,
        output.display()
    );
    if failures > 0 {
        return Err(CliError::data(format!(
            "{failures} of {} frames failed",
            entries.len()
        )));
    }
    Ok(())
}
