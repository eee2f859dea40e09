use nalgebra::Vector2;

use crate::error::{Error, Result};

/// One joint's likelihood map. Row-major; `values[y * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl Grid {
    /// Builds a grid from raw detector output, clamping negatives to zero.
    ///
    /// Rejects non-finite values and grids with no positive mass.
    pub fn new(width: usize, height: usize, mut values: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "grid dimensions must be positive".into(),
            ));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "heat map contains non-finite values".into(),
            ));
        }
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument("heat map is all zero".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Evaluates `f` at every pixel center.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y) as f32);
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x] as f64
    }

    /// Multiplies every value by `factor > 0`.
    pub fn scaled(&self, factor: f32) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Mirror about the vertical center line.
    pub fn mirrored_x(&self) -> Grid {
        let mut values = Vec::with_capacity(self.values.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                values.push(self.values[y * self.width + x]);
            }
        }
        Grid {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// Pixel with the largest value; ties go to the first in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    /// Visits every pixel strictly closer than `radius` to `p`.
    #[inline]
    pub(crate) fn for_each_in_disc(
        &self,
        p: &Vector2<f64>,
        radius: f64,
        mut f: impl FnMut(usize, usize, f64),
    ) {
        let r2 = radius * radius;
        let x0 = (p.x - radius).floor().max(0.0) as i64;
        let y0 = (p.y - radius).floor().max(0.0) as i64;
        let x1 = ((p.x + radius).ceil() as i64).min(self.width as i64 - 1);
        let y1 = ((p.y + radius).ceil() as i64).min(self.height as i64 - 1);
        for y in y0..=y1 {
            let dy = y as f64 - p.y;
            let row = y as usize * self.width;
            for x in x0..=x1 {
                let dx = x as f64 - p.x;
                if dx * dx + dy * dy < r2 {
                    f(x as usize, y as usize, self.values[row + x as usize] as f64);
                }
            }
        }
    }
}
