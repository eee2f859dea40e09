use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::{GeneratorKind, PriorKind, RunConfig};
use error::{CliError, CliResult, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "plcrf",
    version,
    about = "3D pose estimation by re-ranking 2D pose candidates with a lifting prior"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-frame work (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the 2D-to-3D lifting network on aligned pose files.
    TrainLifter(commands::train::TrainArgs),
    /// Estimate 2D and 3D poses for every heat-map volume in a manifest.
    Infer(commands::infer::InferArgs),
    /// Compare predicted poses against ground truth.
    Eval(commands::eval::EvalArgs),
    /// Generate a synthetic dataset of poses and heat-map volumes.
    Synth(commands::synth::SynthArgs),
    /// Train a lifter and run the prior ablation on synthetic data.
    Bench(commands::bench::BenchArgs),
}

/// Inference flags shared by `infer`.
#[derive(Args, Clone, Default)]
pub struct InferenceFlags {
    /// Prior weight; 0 reduces to per-joint top-1 decoding.
    #[arg(long)]
    lambda: Option<f64>,
    /// Mean-shift bandwidth in heat-map pixels.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Candidates per joint and pose candidates enumerated.
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long, value_enum)]
    prior: Option<PriorKind>,
    #[arg(long, value_enum)]
    generator: Option<GeneratorKind>,
    /// Upsampling factor of the NMS generator.
    #[arg(long)]
    upscale: Option<usize>,
}

impl InferenceFlags {
    fn apply(&self, config: &mut RunConfig) {
        let s = &mut config.inference;
        if let Some(v) = self.lambda {
            s.lambda = v;
        }
        if let Some(v) = self.bandwidth {
            s.bandwidth = v;
        }
        if let Some(v) = self.candidates {
            s.candidates = v;
        }
        if let Some(v) = self.prior {
            s.prior = v;
        }
        if let Some(v) = self.generator {
            s.generator = v;
        }
        if let Some(v) = self.upscale {
            s.upscale = v;
        }
    }
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(workers) = common.workers {
        config.workers = workers;
    }
    Ok(config)
}

/// Flag value if given, else the config value, else an error naming the flag.
fn require_path(
    flag: &Option<PathBuf>,
    config: &Option<PathBuf>,
    name: &str,
) -> CliResult<PathBuf> {
    flag.clone().or_else(|| config.clone()).ok_or_else(|| {
        CliError::usage(format!(
            "missing --{name} (or paths.{} in the config)",
            name.replace('-', "_")
        ))
    })
}

fn require_existing(path: &std::path::Path, what: &str) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::usage(format!(
            "{what} {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn run_in_pool<T: Send>(workers: usize, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {workers} workers: {e}")))?;
    pool.install(f)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::TrainLifter(args) => commands::train::run(args),
        Command::Infer(args) => commands::infer::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Synth(args) => commands::synth::run(args),
        Command::Bench(args) => commands::bench::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
