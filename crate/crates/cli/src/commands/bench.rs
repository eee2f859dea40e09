use std::path::PathBuf;

use clap::Args;
use plcrf::inference::{InferenceConfig, PriorMode};
use plcrf::synth::{run_benchmark, BenchConfig, ComparisonSpec, NamedConfig};

use crate::error::CliResult;
use crate::output::{pretty_json, StagedDir};
use crate::{load_config, require_path, run_in_pool, Common};

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Directory for `report.json` and `report.txt`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    overwrite: bool,
    #[arg(long)]
    train_frames: Option<usize>,
    #[arg(long)]
    test_frames: Option<usize>,
}

pub fn run(args: BenchArgs) -> CliResult<()> {
    let mut config = load_config(&args.common)?;
    if let Some(v) = args.train_frames {
        config.bench.train_frames = v;
    }
    if let Some(v) = args.test_frames {
        config.bench.test_frames = v;
    }
    let output = require_path(&args.output, &config.paths.output, "output")?;

    let mut dataset = config.dataset.clone();
    dataset.corruption = config.bench.corruption;
    let section = &config.inference;
    let base = InferenceConfig {
        lambda: section.lambda,
        bandwidth: section.bandwidth,
        candidates: section.candidates,
        prior: PriorMode::Orthographic,
        generator: section.generator(),
    };
    let row = |name: &str, lambda: f64, prior: PriorMode| NamedConfig {
        name: name.into(),
        inference: InferenceConfig {
            lambda,
            prior,
            ..base.clone()
        },
    };
    let bench = BenchConfig {
        configs: vec![
            row("unary", 0.0, PriorMode::Orthographic),
            row(
                "unary+perspective",
                base.lambda,
                PriorMode::Perspective {
                    camera: dataset.camera,
                },
            ),
            row("unary+orthographic", base.lambda, PriorMode::Orthographic),
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
        dataset,
        train_frames: config.bench.train_frames,
        test_frames: config.bench.test_frames,
        seed: config.seed,
        lifter: config.train.to_config(0),
        bootstrap_resamples: config.bench.bootstrap_resamples,
    };
    bench.validate()?;
    let staged = StagedDir::new(&output, args.overwrite)?;
    let report = run_in_pool(config.workers, || Ok(run_benchmark(&bench)?))?;
    let table = report.table();
    staged.write("report.json", &pretty_json(&report)?)?;
    staged.write("report.txt", table.as_bytes())?;
    staged.commit()?;
    print!("{table}");
    Ok(())
}
