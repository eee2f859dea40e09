use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use plcrf::formats::{camera_json, format_manifest, record_2d, record_3d, ManifestEntry};
use plcrf::seed::derive_seed;
use plcrf::synth::{DatasetSpec, Frame};
use rayon::prelude::*;
use serde::Serialize;

use super::sha256_hex;
use crate::error::{CliError, CliResult};
use crate::output::{jsonl, pretty_json, StagedDir};
use crate::{load_config, require_path, run_in_pool, Common};

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset directory to create.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Replace an existing dataset directory.
    #[arg(long)]
    overwrite: bool,
    /// Number of frames to generate.
    #[arg(long)]
    frames: Option<usize>,
    /// Chance that a joint's heat map receives a distractor bump.
    #[arg(long)]
    distractor_probability: Option<f64>,
    /// Distractor peak relative to the true joint's peak.
    #[arg(long)]
    distractor_strength: Option<f64>,
    /// Upper bound of the uniform per-pixel background noise.
    #[arg(long)]
    noise_floor: Option<f64>,
}

#[derive(Serialize)]
struct Provenance<'a> {
    generator: &'static str,
    version: &'static str,
    seed: u64,
    dataset_seed: u64,
    frames: usize,
    /// SHA-256 of the canonical JSON of each part of the dataset spec.
    spec_sha256: BTreeMap<&'static str, String>,
    spec: &'a DatasetSpec,
}

fn spec_hashes(spec: &DatasetSpec) -> CliResult<BTreeMap<&'static str, String>> {
    let mut out = BTreeMap::new();
    out.insert("skeleton", sha256_hex(&serde_json::to_vec(&spec.skeleton)?));
    out.insert("camera", sha256_hex(&serde_json::to_vec(&spec.camera)?));
    out.insert(
        "placement",
        sha256_hex(&serde_json::to_vec(&spec.placement)?),
    );
    out.insert("box", sha256_hex(&serde_json::to_vec(&spec.box_policy)?));
    out.insert(
        "corruption",
        sha256_hex(&serde_json::to_vec(&spec.corruption)?),
    );
    out.insert("dataset", sha256_hex(&serde_json::to_vec(spec)?));
    Ok(out)
}

pub fn volume_name(frame: u64) -> String {
    format!("volumes/{frame:06}.plhm")
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let mut config = load_config(&args.common)?;
    if let Some(v) = args.frames {
        config.synth.frames = v;
    }
    let c = &mut config.dataset.corruption;
    if let Some(v) = args.distractor_probability {
        c.distractor_probability = v;
    }
    if let Some(v) = args.distractor_strength {
        c.strength = v;
    }
    if let Some(v) = args.noise_floor {
        c.noise_floor = v;
    }
    let output = require_path(&args.output, &config.paths.output, "output")?;
    let spec = config.dataset.clone();
    spec.validate()?;
    if config.synth.frames == 0 {
        return Err(CliError::usage("--frames must be at least 1"));
    }
    let staged = StagedDir::new(&output, args.overwrite)?;
    let dataset_seed = derive_seed(config.seed, "synth", 0);

    let frames: Vec<Frame> = run_in_pool(config.workers, || {
        (0..config.synth.frames as u64)
            .into_par_iter()
            .map(|i| spec.frame(dataset_seed, i).map_err(Into::into))
            .collect()
    })?;

    let mut manifest = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        let name = volume_name(i as u64);
        let mut bytes = Vec::new();
        frame.volume.write_to(&mut bytes)?;
        staged.write(&name, &bytes)?;
        manifest.push(ManifestEntry {
            frame: i as u64,
            path: name.into(),
        });
    }
    let poses_2d: Vec<_> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| record_2d(i as u64, &f.pose_2d))
        .collect();
    let poses_3d: Vec<_> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| record_3d(i as u64, &f.pose_3d))
        .collect();
    staged.write("poses_2d.jsonl", &jsonl(&poses_2d)?)?;
    staged.write("poses_3d.jsonl", &jsonl(&poses_3d)?)?;
    staged.write("manifest.txt", format_manifest(&manifest).as_bytes())?;
    staged.write("camera.json", camera_json(&spec.camera)?.as_bytes())?;
    let provenance = Provenance {
        generator: "plcrf synth",
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        dataset_seed,
        frames: frames.len(),
        spec_sha256: spec_hashes(&spec)?,
        spec: &spec,
    };
    staged.write("provenance.json", &pretty_json(&provenance)?)?;
    staged.commit()?;
    println!("wrote {} frames to {}", frames.len(), output.display());
    Ok(())
}
