use std::path::PathBuf;

use clap::Args;
use plcrf::formats::{read_poses_2d, read_poses_3d};
use plcrf::lifter::{to_bytes, train_lifter, LifterInput};
use plcrf::seed::derive_seed;
use serde::Serialize;

use super::sha256_hex;
use crate::config::TrainSection;
use crate::error::{CliError, CliResult, Context};
use crate::output::{pretty_json, StagedFile};
use crate::{load_config, require_existing, require_path, Common};

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// 2D poses (JSON lines, image pixels).
    #[arg(long)]
    poses_2d: Option<PathBuf>,
    /// 3D poses (JSON lines, camera coordinates in mm), aligned with the 2D file by frame.
    #[arg(long)]
    poses_3d: Option<PathBuf>,
    /// Model file to write; the summary goes to `<output>.summary.json`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    /// Standard deviation of the Gaussian noise added to normalized 2D inputs.
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_input)]
    input: Option<LifterInput>,
    /// Halve the learning rate whenever an epoch's loss rises.
    #[arg(long)]
    halve_on_increase: bool,
}

fn parse_input(s: &str) -> Result<LifterInput, String> {
    match s {
        "full" => Ok(LifterInput::Full),
        "normalized-only" => Ok(LifterInput::NormalizedOnly),
        _ => Err(format!("expected 'full' or 'normalized-only', got {s:?}")),
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    model_sha256: String,
    joint_count: usize,
    layer_sizes: Vec<usize>,
    samples: usize,
    seed: u64,
    lifter_seed: u64,
    config: &'a TrainSection,
    /// Noise-free loss on the training set in standardized target units.
    final_loss: f64,
    /// The same loss in squared millimeters.
    final_loss_mm2: f64,
    target_scale_mm: f64,
    final_learning_rate: f64,
    epoch_losses: &'a [f64],
}

pub fn summary_path(model: &std::path::Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

pub fn run(args: TrainArgs) -> CliResult<()> {
    let mut config = load_config(&args.common)?;
    let t = &mut config.train;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = args.momentum {
        t.momentum = v;
    }
    if let Some(v) = args.noise_std {
        t.noise_std = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.hidden.clone() {
        t.hidden = v;
    }
    if let Some(v) = args.input {
        t.input = v;
    }
    if args.halve_on_increase {
        t.halve_on_increase = true;
    }

    let poses_2d = require_path(&args.poses_2d, &config.paths.poses_2d, "poses-2d")?;
    let poses_3d = require_path(&args.poses_3d, &config.paths.poses_3d, "poses-3d")?;
    let output = require_path(&args.output, &config.paths.model, "output")?;
    require_existing(&poses_2d, "2D pose file")?;
    require_existing(&poses_3d, "3D pose file")?;
    crate::output::check_output_dir(&output, true)?;
    let lifter_seed = derive_seed(config.seed, "lifter", 0);
    let train_config = config.train.to_config(lifter_seed);
    train_config.validate()?;

    let inputs = read_poses_2d(&poses_2d).context(poses_2d.display())?;
    let targets = read_poses_3d(&poses_3d).context(poses_3d.display())?;
    if inputs.len() != targets.len() {
        return Err(CliError::data(format!(
            "{} 2D poses but {} 3D poses",
            inputs.len(),
            targets.len()
        )));
    }
    let mut pairs = Vec::with_capacity(inputs.len());
    for ((f2, p2), (f3, p3)) in inputs.into_iter().zip(targets) {
        if f2 != f3 {
            return Err(CliError::data(format!(
                "frame {f2} of the 2D file is paired with frame {f3} of the 3D file"
            )));
        }
        if p2.len() != p3.len() {
            return Err(CliError::data(format!(
                "frame {f2}: {} 2D joints but {} 3D joints",
                p2.len(),
                p3.len()
            )));
        }
        pairs.push((p2, p3));
    }
    if let Some((i, _)) = pairs
        .iter()
        .enumerate()
        .find(|(_, (p, _))| p.len() != pairs[0].0.len())
    {
        return Err(CliError::data(format!(
            "pair {i} has a different joint count than pair 0"
        )));
    }

    let trained = train_lifter(&pairs, &train_config)?;
    let bytes = to_bytes(&trained.model);
    let report = &trained.report;
    let summary = Summary {
        model_sha256: sha256_hex(&bytes),
        joint_count: trained.model.joint_count,
        layer_sizes: trained.model.layer_sizes(),
        samples: report.samples,
        seed: config.seed,
        lifter_seed,
        config: &config.train,
        final_loss: report.final_loss,
        final_loss_mm2: report.final_loss * report.target_scale * report.target_scale,
        target_scale_mm: report.target_scale,
        final_learning_rate: report.final_learning_rate,
        epoch_losses: &report.epoch_losses,
    };
    let model_file = StagedFile::new(&output, &bytes)?;
    let summary_file = StagedFile::new(&summary_path(&output), &pretty_json(&summary)?)?;
    model_file.commit()?;
    summary_file.commit()?;
    println!(
        "trained on {} pairs for {} epochs: final loss {:.6} ({:.2} mm^2); wrote {}",
        report.samples,
        config.train.epochs,
        report.final_loss,
        summary.final_loss_mm2,
        output.display()
    );
    Ok(())
}
