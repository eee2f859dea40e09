//! Flat-kernel density estimation and mean-shift mode seeking on a heat-map grid.

use std::cmp::Ordering;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Iteration stops once a step moves less than this (grid units).
pub const CONVERGENCE_TOLERANCE: f64 = 1e-4;
pub const MAX_ITERATIONS: usize = 100;

/// A joint candidate: sub-pixel grid position and its smoothed heat-map value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub position: Vector2<f64>,
    pub value: f64,
}

/// Descending by value; ties by (y, x).
pub(crate) fn mode_order(a: &Mode, b: &Mode) -> Ordering {
    b.value
        .total_cmp(&a.value)
        .then(a.position.y.total_cmp(&b.position.y))
        .then(a.position.x.total_cmp(&b.position.x))
}

/// Sum of heat-map values over pixels strictly within `bandwidth` of `p`.
pub fn kde_value(grid: &Grid, p: &Vector2<f64>, bandwidth: f64) -> f64 {
    let mut total = 0.0;
    grid.for_each_in_disc(p, bandwidth, |_, _, w| total += w);
    total
}

/// Epanechnikov-profile density `Σ h(p_j)·(1 − ‖p − p_j‖²/b²)` over the window.
///
/// Flat-kernel mean shift is a gradient ascent on this density (its shadow),
/// so it never decreases along the iterates even when the flat sum does.
pub fn shadow_density(grid: &Grid, p: &Vector2<f64>, bandwidth: f64) -> f64 {
    let inv = 1.0 / (bandwidth * bandwidth);
    let mut total = 0.0;
    grid.for_each_in_disc(p, bandwidth, |x, y, w| {
        let d2 = (x as f64 - p.x).powi(2) + (y as f64 - p.y).powi(2);
        total += w * (1.0 - d2 * inv);
    });
    total
}

/// Weighted mean of the pixels within the window around `p`.
pub fn mean_shift_step(grid: &Grid, p: &Vector2<f64>, bandwidth: f64) -> Result<Vector2<f64>> {
    let (mut sx, mut sy, mut total) = (0.0, 0.0, 0.0);
    grid.for_each_in_disc(p, bandwidth, |x, y, w| {
        sx += w * x as f64;
        sy += w * y as f64;
        total += w;
    });
    if total <= 0.0 {
        return Err(Error::EmptyWindow { x: p.x, y: p.y });
    }
    Ok(Vector2::new(sx / total, sy / total))
}

/// Runs mean shift from `start` until the step falls under the tolerance or the
/// iteration cap is hit. An empty window ends the climb where it stands.
pub fn climb(grid: &Grid, start: Vector2<f64>, bandwidth: f64) -> Vector2<f64> {
    let mut q = start;
    for _ in 0..MAX_ITERATIONS {
        let Ok(next) = mean_shift_step(grid, &q, bandwidth) else {
            break;
        };
        let moved = (next - q).norm();
        q = next;
        if moved < CONVERGENCE_TOLERANCE {
            break;
        }
    }
    q
}

/// A converged point is kept only if small perturbations climb back to it.
/// Saddles between bumps are fixed points of the iteration but fail this.
fn is_stable(grid: &Grid, q: &Vector2<f64>, bandwidth: f64) -> bool {
    let step = bandwidth / 4.0;
    let merge = bandwidth / 2.0;
    [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)]
        .iter()
        .all(|&(dx, dy)| (climb(grid, q + Vector2::new(dx, dy), bandwidth) - q).norm() < merge)
}

/// Finds up to `max_candidates` modes of the smoothed heat map, best first.
///
/// Every pixel with positive value seeds a climb; converged points closer than
/// `bandwidth / 2` are merged into the earliest one.
pub fn find_modes(grid: &Grid, bandwidth: f64, max_candidates: usize) -> Result<Vec<Mode>> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if max_candidates == 0 {
        return Err(Error::InvalidArgument(
            "max_candidates must be at least 1".into(),
        ));
    }
    let merge = bandwidth / 2.0;
    let mut converged: Vec<Vector2<f64>> = Vec::new();
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            if grid.get(x, y) <= 0.0 {
                continue;
            }
            let q = climb(grid, Vector2::new(x as f64, y as f64), bandwidth);
            if !converged.iter().any(|c| (c - q).norm() < merge) {
                converged.push(q);
            }
        }
    }

    let mut modes: Vec<Mode> = converged
        .iter()
        .map(|q| Mode {
            position: *q,
            value: kde_value(grid, q, bandwidth),
        })
        .collect();
    modes.sort_by(mode_order);

    let fallback = modes.first().copied();
    modes.retain(|m| is_stable(grid, &m.position, bandwidth));
    if modes.is_empty() {
        modes.extend(fallback);
    }
    modes.truncate(max_candidates);
    Ok(modes)
}
