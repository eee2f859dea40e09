use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector2;

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const VOLUME_MAGIC: [u8; 4] = *b"PLHM";

/// Per-joint heat maps of one frame plus the subject box they were cropped from.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMapVolume {
    pub maps: Vec<Grid>,
    pub bbox: BoundingBox,
}

impl HeatMapVolume {
    pub fn new(maps: Vec<Grid>, bbox: BoundingBox) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::InvalidArgument("volume needs at least one joint".into()))?;
        let (w, h) = (first.width(), first.height());
        if w != h {
            return Err(Error::InvalidArgument(format!(
                "heat maps must be square, got {w}x{h}"
            )));
        }
        if let Some(g) = maps.iter().find(|g| g.width() != w || g.height() != h) {
            return Err(Error::DimensionMismatch {
                expected: w * h,
                actual: g.width() * g.height(),
            });
        }
        Ok(Self { maps, bbox })
    }

    pub fn joint_count(&self) -> usize {
        self.maps.len()
    }

    pub fn grid_size(&self) -> usize {
        self.maps[0].width()
    }

    /// Little-endian: magic, `u32` M, H, W, `M·H·W` `f32` (joint-major, row-major),
    /// then box origin x, origin y, side, reserved as `f64`.
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let size = self.grid_size() as u32;
        let mut buf = Vec::with_capacity(16 + self.maps.len() * (size * size) as usize * 4 + 32);
        buf.extend_from_slice(&VOLUME_MAGIC);
        for v in [self.maps.len() as u32, size, size] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for g in &self.maps {
            for v in g.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in [self.bbox.origin.x, self.bbox.origin.y, self.bbox.side, 0.0] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != VOLUME_MAGIC {
            return Err(Error::Corrupt("bad heat-map volume magic".into()));
        }
        let m = cur.u32()? as usize;
        let h = cur.u32()? as usize;
        let w = cur.u32()? as usize;
        let cells = m
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .ok_or_else(|| Error::Corrupt("volume dimensions overflow".into()))?;
        if bytes.len() != 16 + cells * 4 + 32 {
            return Err(Error::Corrupt(format!(
                "volume {m}x{h}x{w} needs {} bytes, file has {}",
                16 + cells * 4 + 32,
                bytes.len()
            )));
        }
        let mut maps = Vec::with_capacity(m);
        for _ in 0..m {
            let mut values = Vec::with_capacity(h * w);
            for _ in 0..h * w {
                values.push(f32::from_le_bytes(cur.take(4)?.try_into().unwrap()));
            }
            maps.push(Grid::new(w, h, values)?);
        }
        let ox = cur.f64()?;
        let oy = cur.f64()?;
        let side = cur.f64()?;
        let _reserved = cur.f64()?;
        Self::new(maps, BoundingBox::new(Vector2::new(ox, oy), side)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Corrupt("unexpected end of heat-map volume".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
