use nalgebra::Vector2;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Unnormalized Gaussian target: `exp(−‖p − joint‖² / 2σ²)` at each pixel center.
pub fn render_groundtruth_heatmap(joint: &Vector2<f64>, size: usize, sigma: f64) -> Result<Grid> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    Grid::from_fn(size, size, |x, y| {
        let d = Vector2::new(x as f64, y as f64) - joint;
        (-d.norm_squared() * inv).exp()
    })
}
