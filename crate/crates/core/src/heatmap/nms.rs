//! Non-maximum-suppression candidate baseline on an upsampled heat map.

use nalgebra::Vector2;

use super::grid::Grid;
use super::meanshift::{mode_order, Mode};
use crate::error::{Error, Result};

/// Bilinear upsampling; upsampled pixel `u` sits at grid coordinate `u / upscale`.
fn upsample(grid: &Grid, upscale: usize) -> (usize, usize, Vec<f64>) {
    let w = (grid.width() - 1) * upscale + 1;
    let h = (grid.height() - 1) * upscale + 1;
    let s = upscale as f64;
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        let gy = v as f64 / s;
        let y0 = (gy.floor() as usize).min(grid.height() - 1);
        let y1 = (y0 + 1).min(grid.height() - 1);
        let ty = gy - y0 as f64;
        for u in 0..w {
            let gx = u as f64 / s;
            let x0 = (gx.floor() as usize).min(grid.width() - 1);
            let x1 = (x0 + 1).min(grid.width() - 1);
            let tx = gx - x0 as f64;
            let top = grid.get(x0, y0) * (1.0 - tx) + grid.get(x1, y0) * tx;
            let bottom = grid.get(x0, y1) * (1.0 - tx) + grid.get(x1, y1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    (w, h, out)
}

/// Upsamples by `upscale`, keeps strict 8-neighborhood maxima, and greedily
/// suppresses any maximum within `bandwidth` grid units of a stronger one.
/// Positions are returned in grid coordinates, values are upsampled heat values.
pub fn find_modes_nms(
    grid: &Grid,
    max_candidates: usize,
    upscale: usize,
    bandwidth: f64,
) -> Result<Vec<Mode>> {
    if upscale == 0 {
        return Err(Error::InvalidArgument("upscale must be at least 1".into()));
    }
    if max_candidates == 0 {
        return Err(Error::InvalidArgument(
            "max_candidates must be at least 1".into(),
        ));
    }
    let (w, h, up) = upsample(grid, upscale);
    let s = upscale as f64;
    let mut peaks = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let c = up[v * w + u];
            if c <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    if du == 0 && dv == 0 {
                        continue;
                    }
                    let (nu, nv) = (u as i64 + du, v as i64 + dv);
                    if nu < 0 || nv < 0 || nu >= w as i64 || nv >= h as i64 {
                        continue;
                    }
                    if up[nv as usize * w + nu as usize] >= c {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push(Mode {
                    position: Vector2::new(u as f64 / s, v as f64 / s),
                    value: c,
                });
            }
        }
    }
    if peaks.is_empty() {
        let (x, y) = grid.argmax();
        peaks.push(Mode {
            position: Vector2::new(x as f64, y as f64),
            value: grid.get(x, y),
        });
    }
    peaks.sort_by(mode_order);

    let mut kept: Vec<Mode> = Vec::new();
    for p in peaks {
        if kept.len() == max_candidates {
            break;
        }
        if kept
            .iter()
            .all(|k| (k.position - p.position).norm() > bandwidth)
        {
            kept.push(p);
        }
    }
    Ok(kept)
}
