//! Axis-aligned slices of the distance field for plotting.

use std::io::{self, Write};

use crate::index::VoxelBox;
use crate::key::VoxelKey;
use crate::map::EsdfMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            _ => Err(format!("unknown axis '{s}'")),
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Row-major grid of distances in voxels; `+inf` where unknown.
///
/// Columns run along the first remaining axis and rows along the second:
/// `(x, y)` for a z slice, `(x, z)` for a y slice, `(y, z)` for an x slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Slice {
    pub fn extract(map: &EsdfMap, axis: Axis, index: i32, region: VoxelBox) -> Self {
        let (cols, rows) = match axis {
            Axis::X => ((region.min.y, region.max.y), (region.min.z, region.max.z)),
            Axis::Y => ((region.min.x, region.max.x), (region.min.z, region.max.z)),
            Axis::Z => ((region.min.x, region.max.x), (region.min.y, region.max.y)),
        };
        let width = (cols.1 - cols.0).max(0) as usize;
        let height = (rows.1 - rows.0).max(0) as usize;
        let mut values = Vec::with_capacity(width * height);
        for r in rows.0..rows.1 {
            for c in cols.0..cols.1 {
                let key = match axis {
                    Axis::X => VoxelKey::new(index, c, r),
                    Axis::Y => VoxelKey::new(c, index, r),
                    Axis::Z => VoxelKey::new(c, r, index),
                };
                values.push(map.distance_voxels(key).unwrap_or(f64::INFINITY));
            }
        }
        Self { width, height, values }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for row in self.values.chunks(self.width.max(1)) {
            let line: Vec<String> = row
                .iter()
                .map(|v| {
                    if v.is_finite() {
                        format!("{v}")
                    } else {
                        "inf".to_string()
                    }
                })
                .collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Binary 8-bit PGM; distances are clamped to `max_distance` and scaled
    /// linearly onto 0..=255.
    pub fn write_pgm<W: Write>(&self, mut w: W, max_distance: f64) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .values
            .iter()
            .map(|&v| {
                let t = if max_distance > 0.0 {
                    (v / max_distance).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                (t * 255.0).round() as u8
            })
            .collect();
        w.write_all(&bytes)
    }
}
