use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::pose::{Pose2D, Pose3D};
use crate::error::{Error, Result};

/// Side length, in pixels, of the normalized crop the 2D error metric is defined on.
pub const CROP_SIZE: f64 = 256.0;

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let camera = Self { fx, fy, cx, cy };
        camera.validate()?;
        Ok(camera)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidArgument(
                "principal point must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn project_point(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// `u = fx·X/Z + cx`, `v = fy·Y/Z + cy` per joint. Fails if any joint has `Z ≤ 0`.
pub fn project_perspective(pose: &Pose3D, camera: &CameraModel) -> Result<Pose2D> {
    if let Some((joint, p)) = pose.joints.iter().enumerate().find(|(_, p)| !(p.z > 0.0)) {
        return Err(Error::BehindCamera { joint, z: p.z });
    }
    Ok(Pose2D {
        joints: pose
            .joints
            .iter()
            .map(|p| camera.project_point(p))
            .collect(),
    })
}

/// Drops depth: `(u, v) = (X, Y)`.
pub fn project_orthographic(pose: &Pose3D) -> Pose2D {
    Pose2D {
        joints: pose.joints.iter().map(|p| Vector2::new(p.x, p.y)).collect(),
    }
}

/// Square subject box in original-image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub origin: Vector2<f64>,
    pub side: f64,
}

impl BoundingBox {
    pub fn new(origin: Vector2<f64>, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "box side must be positive, got {side}"
            )));
        }
        if !(origin.x.is_finite() && origin.y.is_finite()) {
            return Err(Error::InvalidArgument("box origin must be finite".into()));
        }
        Ok(Self { origin, side })
    }

    /// Smallest square centered on the points' bounding rectangle, enlarged by `margin`
    /// (0.15 adds 15% to the longer side).
    pub fn around(points: &[Vector2<f64>], margin: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot box an empty point set".into(),
            ));
        }
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = (hi - lo).amax();
        let side = extent * (1.0 + margin);
        let center = (lo + hi) / 2.0;
        Self::new(center - Vector2::new(side, side) / 2.0, side)
    }

    /// Maps a heat-map grid coordinate to image pixels. Integer grid coordinates
    /// address cell centers: cell `p` spans `[p, p + 1)` in cell units.
    pub fn grid_to_image(&self, p: &Vector2<f64>, grid_size: usize) -> Vector2<f64> {
        let cell = self.side / grid_size as f64;
        self.origin + (p + Vector2::new(0.5, 0.5)) * cell
    }

    /// Inverse of [`grid_to_image`](Self::grid_to_image).
    pub fn image_to_grid(&self, x: &Vector2<f64>, grid_size: usize) -> Vector2<f64> {
        let cell = self.side / grid_size as f64;
        (x - self.origin) / cell - Vector2::new(0.5, 0.5)
    }

    /// Image pixels to the 256×256 normalized crop.
    pub fn image_to_crop(&self, x: &Vector2<f64>) -> Vector2<f64> {
        (x - self.origin) * (CROP_SIZE / self.side)
    }

    pub fn pose_to_crop(&self, pose: &Pose2D) -> Pose2D {
        pose.map(|p| self.image_to_crop(p))
    }
}

/// Grid coordinate to original-image pixels (pixel-center convention).
pub fn crop_to_image(
    point: &Vector2<f64>,
    bbox: &BoundingBox,
    heatmap_size: usize,
) -> Vector2<f64> {
    bbox.grid_to_image(point, heatmap_size)
}

/// Original-image pixels to grid coordinates.
pub fn image_to_crop(
    point: &Vector2<f64>,
    bbox: &BoundingBox,
    heatmap_size: usize,
) -> Vector2<f64> {
    bbox.image_to_grid(point, heatmap_size)
}
