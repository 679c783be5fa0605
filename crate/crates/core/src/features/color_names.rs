use std::path::Path;
use std::sync::{Arc, OnceLock};

use super::FeatureMap;
use crate::error::{Error, Result};
use crate::imgproc::ImageBuffer;

pub const COLOR_NAME_CHANNELS: usize = 10;
pub const TABLE_ROWS: usize = 32 * 32 * 32;

pub const COLOR_NAMES: [&str; COLOR_NAME_CHANNELS] = [
    "black", "blue", "brown", "gray", "green", "orange", "purple", "red", "white", "yellow",
];

static BUILTIN: &[u8] = include_bytes!("../../assets/color_names.bin");

/// RGB -> color-name probability lookup over a 32x32x32 quantized cube.
///
/// Row index is `r/8 + 32*(g/8) + 1024*(b/8)` on 8-bit values. The on-disk
/// format is either `32768 * 10` little-endian `f32` values, or text with ten
/// whitespace-separated numbers per line.
#[derive(Debug, Clone)]
pub struct ColorNameTable {
    rows: Vec<[f64; COLOR_NAME_CHANNELS]>,
}

impl ColorNameTable {
    pub fn builtin() -> Arc<ColorNameTable> {
        static TABLE: OnceLock<Arc<ColorNameTable>> = OnceLock::new();
        TABLE
            .get_or_init(|| Arc::new(Self::from_bytes(BUILTIN).expect("embedded color-name table is well formed")))
            .clone()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Config(format!("color-name table {}: {e}", path.display())))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Config(format!("color-name table {}: {e}", path.display())))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() == TABLE_ROWS * COLOR_NAME_CHANNELS * 4 {
            let rows = bytes
                .chunks_exact(COLOR_NAME_CHANNELS * 4)
                .map(|row| {
                    let mut out = [0.0; COLOR_NAME_CHANNELS];
                    for (slot, b) in out.iter_mut().zip(row.chunks_exact(4)) {
                        *slot = f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
                    }
                    out
                })
                .collect();
            return Ok(Self { rows });
        }
        let text = std::str::from_utf8(bytes)
            .map_err(|_| Error::Config("color-name table is neither binary f32 nor text".into()))?;
        Self::from_text(text)
    }

    fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::with_capacity(TABLE_ROWS);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut row = [0.0; COLOR_NAME_CHANNELS];
            let mut n = 0;
            for tok in line.split_whitespace() {
                if n == COLOR_NAME_CHANNELS {
                    return Err(Error::Config(format!("too many values in row {}", rows.len())));
                }
                row[n] = tok
                    .parse()
                    .map_err(|e| Error::Config(format!("bad value {tok:?}: {e}")))?;
                n += 1;
            }
            if n != COLOR_NAME_CHANNELS {
                return Err(Error::Config(format!("row {} has {n} values", rows.len())));
            }
            rows.push(row);
        }
        if rows.len() != TABLE_ROWS {
            return Err(Error::Config(format!("expected {TABLE_ROWS} rows, got {}", rows.len())));
        }
        Ok(Self { rows })
    }

    pub fn from_rows(rows: Vec<[f64; COLOR_NAME_CHANNELS]>) -> Result<Self> {
        if rows.len() != TABLE_ROWS {
            return Err(Error::Config(format!("expected {TABLE_ROWS} rows, got {}", rows.len())));
        }
        Ok(Self { rows })
    }

    #[inline]
    pub fn index(rgb: [f64; 3]) -> usize {
        let q = |v: f64| ((v.clamp(0.0, 1.0) * 255.0).round() as usize) >> 3;
        q(rgb[0]) + 32 * q(rgb[1]) + 1024 * q(rgb[2])
    }

    #[inline]
    pub fn lookup(&self, rgb: [f64; 3]) -> &[f64; COLOR_NAME_CHANNELS] {
        &self.rows[Self::index(rgb)]
    }

    pub fn row(&self, index: usize) -> &[f64; COLOR_NAME_CHANNELS] {
        &self.rows[index]
    }
}

/// Per-pixel color-name probabilities average-pooled onto the `cell` grid.
/// Grayscale patches are looked up with the gray value replicated.
pub fn color_names(patch: &ImageBuffer, table: &ColorNameTable, cell: usize) -> FeatureMap {
    let cells_y = patch.height() / cell;
    let cells_x = patch.width() / cell;
    let mut out = FeatureMap::zeros(cells_y, cells_x, COLOR_NAME_CHANNELS);
    if cells_y == 0 || cells_x == 0 {
        return out;
    }
    let inv = 1.0 / (cell * cell) as f64;
    let plane = cells_y * cells_x;
    let data = out.data_mut();
    for y in 0..cells_y * cell {
        let cy = y / cell;
        for x in 0..cells_x * cell {
            let idx = cy * cells_x + x / cell;
            let probs = table.lookup(patch.rgb(y, x));
            for (c, p) in probs.iter().enumerate() {
                data[c * plane + idx] += p * inv;
            }
        }
    }
    out
}
