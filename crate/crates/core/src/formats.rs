//! Text file formats: pose records, camera file, and heat-map manifest.
//!
//! Pose files hold one JSON object per line, `{"frame": 3, "joints": [[x, y], ...]}`
//! (or `[x, y, z]` for 3D, millimeters). The camera file is a single JSON object
//! `{"fx": .., "fy": .., "cx": .., "cy": ..}`. A manifest lists one heat-map
//! volume per line as `<frame> <relative path>`; blank lines and `#` comments
//! are ignored.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Pose2D, Pose3D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord<const D: usize> {
    pub frame: u64,
    #[serde(with = "joint_arrays")]
    pub joints: Vec<[f64; D]>,
}

mod joint_arrays {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(
        v: &[[f64; D]],
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = v.iter().map(|r| r.as_slice()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(
        d: De,
    ) -> Result<Vec<[f64; D]>, De::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        rows.into_iter()
            .map(|r| {
                let len = r.len();
                <[f64; D]>::try_from(r).map_err(|_| {
                    serde::de::Error::custom(format!("joint has {len} coordinates, expected {D}"))
                })
            })
            .collect()
    }
}

pub fn record_2d(frame: u64, pose: &Pose2D) -> PoseRecord<2> {
    PoseRecord {
        frame,
        joints: pose.joints.iter().map(|p| [p.x, p.y]).collect(),
    }
}

pub fn record_3d(frame: u64, pose: &Pose3D) -> PoseRecord<3> {
    PoseRecord {
        frame,
        joints: pose.joints.iter().map(|p| [p.x, p.y, p.z]).collect(),
    }
}

impl PoseRecord<2> {
    pub fn pose(&self) -> Result<Pose2D> {
        Pose2D::new(
            self.joints
                .iter()
                .map(|p| Vector2::new(p[0], p[1]))
                .collect(),
        )
    }
}

impl PoseRecord<3> {
    pub fn pose(&self) -> Result<Pose3D> {
        Pose3D::new(
            self.joints
                .iter()
                .map(|p| Vector3::new(p[0], p[1], p[2]))
                .collect(),
        )
    }
}

pub fn write_records<const D: usize>(mut out: impl Write, records: &[PoseRecord<D>]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<const D: usize>(input: impl BufRead) -> Result<Vec<PoseRecord<D>>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PoseRecord<D> = serde_json::from_str(&line)
            .map_err(|e| Error::Corrupt(format!("pose record on line {}: {e}", n + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_poses_2d(path: &Path) -> Result<Vec<(u64, Pose2D)>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_records::<2>(file)?
        .into_iter()
        .map(|r| Ok((r.frame, r.pose()?)))
        .collect()
}

pub fn read_poses_3d(path: &Path) -> Result<Vec<(u64, Pose3D)>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_records::<3>(file)?
        .into_iter()
        .map(|r| Ok((r.frame, r.pose()?)))
        .collect()
}

pub fn write_poses_2d(path: &Path, poses: &[(u64, Pose2D)]) -> Result<()> {
    let records: Vec<_> = poses.iter().map(|(f, p)| record_2d(*f, p)).collect();
    let mut buf = Vec::new();
    write_records(&mut buf, &records)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn write_poses_3d(path: &Path, poses: &[(u64, Pose3D)]) -> Result<()> {
    let records: Vec<_> = poses.iter().map(|(f, p)| record_3d(*f, p)).collect();
    let mut buf = Vec::new();
    write_records(&mut buf, &records)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_camera(path: &Path) -> Result<CameraModel> {
    let camera: CameraModel = serde_json::from_slice(&std::fs::read(path)?)?;
    camera.validate()?;
    Ok(camera)
}

pub fn camera_json(camera: &CameraModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(camera)? + "\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub frame: u64,
    pub path: PathBuf,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (frame, path) = line.split_once(char::is_whitespace).ok_or_else(|| {
            Error::Corrupt(format!(
                "manifest line {}: expected '<frame> <path>'",
                n + 1
            ))
        })?;
        let frame = frame.parse().map_err(|_| {
            Error::Corrupt(format!(
                "manifest line {}: bad frame index {frame:?}",
                n + 1
            ))
        })?;
        out.push(ManifestEntry {
            frame,
            path: PathBuf::from(path.trim()),
        });
    }
    Ok(out)
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut s = String::from("# frame path\n");
    for e in entries {
        s.push_str(&format!("{} {}\n", e.frame, e.path.display()));
    }
    s
}

/// Reads a manifest and resolves its paths against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_manifest(&std::fs::read_to_string(path)?)?
        .into_iter()
        .map(|e| ManifestEntry {
            frame: e.frame,
            path: base.join(e.path),
        })
        .collect())
}
