use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use plcrf::formats::{read_manifest, read_poses_2d, read_poses_3d};
use plcrf::geometry::{error_2d, mpjpe, procrustes_error, BoundingBox, Pose2D, Pose3D};
use plcrf::heatmap::HeatMapVolume;
use serde::Serialize;

use crate::error::{CliError, CliResult, Context};
use crate::output::{pretty_json, write_file};
use crate::{load_config, require_existing, Common};

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Predicted 3D poses (JSON lines).
    #[arg(long)]
    predictions_3d: Option<PathBuf>,
    /// Ground-truth 3D poses (JSON lines).
    #[arg(long)]
    ground_truth_3d: Option<PathBuf>,
    /// Predicted 2D poses in image pixels (JSON lines).
    #[arg(long)]
    predictions_2d: Option<PathBuf>,
    /// Ground-truth 2D poses in image pixels (JSON lines).
    #[arg(long)]
    ground_truth_2d: Option<PathBuf>,
    /// Heat-map manifest supplying each frame's box; 2D errors are then
    /// measured in the 256-pixel crop instead of image pixels.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Joint that 3D poses are aligned on before the MPJPE.
    #[arg(long, default_value_t = 0)]
    root: usize,
    /// Write the report (JSON) here as well as printing the summary.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize)]
struct FrameMetrics {
    frame: u64,
    mpjpe: Option<f64>,
    similarity: Option<f64>,
    error_2d: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Report {
    frames: usize,
    mpjpe: Option<f64>,
    similarity: Option<f64>,
    error_2d: Option<f64>,
    /// `crop` (256-pixel box crop) or `image` pixels.
    error_2d_units: Option<&'static str>,
    per_frame: Vec<FrameMetrics>,
}

fn pick(flag: &Option<PathBuf>, config: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| config.clone())
}

fn aligned<T>(pred: Vec<(u64, T)>, gt: Vec<(u64, T)>, what: &str) -> CliResult<Vec<(u64, T, T)>> {
    if pred.len() != gt.len() {
        return Err(CliError::data(format!(
            "{what}: {} predicted frames but {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    pred.into_iter()
        .zip(gt)
        .map(|((fp, p), (fg, g))| {
            if fp != fg {
                Err(CliError::data(format!(
                    "{what}: predicted frame {fp} is paired with ground-truth frame {fg}"
                )))
            } else {
                Ok((fp, p, g))
            }
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn boxes(manifest: &Path) -> CliResult<BTreeMap<u64, BoundingBox>> {
    read_manifest(manifest)
        .context(manifest.display())?
        .into_iter()
        .map(|e| {
            let volume = HeatMapVolume::load(&e.path).context(e.path.display())?;
            Ok((e.frame, volume.bbox))
        })
        .collect()
}

pub fn run(args: EvalArgs) -> CliResult<()> {
    let config = load_config(&args.common)?;
    let paths = &config.paths;
    let pred_3d = pick(&args.predictions_3d, &paths.predictions_3d);
    let gt_3d = pick(&args.ground_truth_3d, &paths.ground_truth_3d);
    let pred_2d = pick(&args.predictions_2d, &paths.predictions_2d);
    let gt_2d = pick(&args.ground_truth_2d, &paths.ground_truth_2d);
    let manifest = pick(&args.manifest, &paths.manifest);
    let with_3d = match (&pred_3d, &gt_3d) {
        (Some(p), Some(g)) => Some((p.clone(), g.clone())),
        (None, None) => None,
        _ => {
            return Err(CliError::usage(
                "3D evaluation needs both --predictions-3d and --ground-truth-3d",
            ))
        }
    };
    let with_2d = match (&pred_2d, &gt_2d) {
        (Some(p), Some(g)) => Some((p.clone(), g.clone())),
        (None, None) => None,
        _ => {
            return Err(CliError::usage(
                "2D evaluation needs both --predictions-2d and --ground-truth-2d",
            ))
        }
    };
    if with_2d.is_none() && with_3d.is_none() {
        return Err(CliError::usage(
            "nothing to evaluate: pass 3D and/or 2D prediction and ground-truth files",
        ));
    }
    for p in with_3d
        .iter()
        .chain(with_2d.iter())
        .flat_map(|(a, b)| [a, b])
        .chain(manifest.iter())
    {
        require_existing(p, "input")?;
    }
    if let Some(out) = &args.output {
        crate::output::check_output_dir(out, true)?;
    }

    let mut per_frame: BTreeMap<u64, FrameMetrics> = BTreeMap::new();
    let mut order: Vec<u64> = Vec::new();
    let mut entry = |frame: u64, per_frame: &mut BTreeMap<u64, FrameMetrics>| {
        if !per_frame.contains_key(&frame) {
            order.push(frame);
        }
        per_frame.entry(frame).or_insert_with(|| FrameMetrics {
            frame,
            ..FrameMetrics::default()
        });
    };

    if let Some((p, g)) = &with_3d {
        let pred = read_poses_3d(p).context(p.display())?;
        let gt = read_poses_3d(g).context(g.display())?;
        for (frame, est, truth) in aligned::<Pose3D>(pred, gt, "3D")? {
            let at = format!("3D frame {frame}");
            let m = mpjpe(&truth, &est, args.root).context(&at)?;
            let s = procrustes_error(&truth, &est).context(&at)?;
            entry(frame, &mut per_frame);
            let f = per_frame.get_mut(&frame).unwrap();
            f.mpjpe = Some(m);
            f.similarity = Some(s);
        }
    }
    let mut units = None;
    if let Some((p, g)) = &with_2d {
        let pred = read_poses_2d(p).context(p.display())?;
        let gt = read_poses_2d(g).context(g.display())?;
        let boxes = manifest.as_deref().map(boxes).transpose()?;
        units = Some(if boxes.is_some() { "crop" } else { "image" });
        for (frame, est, truth) in aligned::<Pose2D>(pred, gt, "2D")? {
            let (est, truth) = match &boxes {
                Some(b) => {
                    let bbox = b.get(&frame).ok_or_else(|| {
                        CliError::data(format!("frame {frame} is not in the manifest"))
                    })?;
                    (bbox.pose_to_crop(&est), bbox.pose_to_crop(&truth))
                }
                None => (est, truth),
            };
            let e = error_2d(&truth, &est).context(format!("2D frame {frame}"))?;
            entry(frame, &mut per_frame);
            per_frame.get_mut(&frame).unwrap().error_2d = Some(e);
        }
    }

    let per_frame: Vec<FrameMetrics> = order.iter().map(|f| per_frame.remove(f).unwrap()).collect();
    let report = Report {
        frames: per_frame.len(),
        mpjpe: mean(per_frame.iter().filter_map(|f| f.mpjpe)),
        similarity: mean(per_frame.iter().filter_map(|f| f.similarity)),
        error_2d: mean(per_frame.iter().filter_map(|f| f.error_2d)),
        error_2d_units: units,
        per_frame,
    };
    if let Some(out) = &args.output {
        write_file(out, &pretty_json(&report)?)?;
    }
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    let mut text = String::new();
    let _ = writeln!(text, "frames:       {}", report.frames);
    let _ = writeln!(text, "MPJPE (mm):   {}", show(report.mpjpe));
    let _ = writeln!(text, "Similarity:   {}", show(report.similarity));
    let _ = writeln!(
        text,
        "2D error:     {}{}",
        show(report.error_2d),
        units.map_or(String::new(), |u| format!(" ({u} pixels)"))
    );
    print!("{text}");
    Ok(())
}
