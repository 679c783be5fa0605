//! Hand-crafted appearance features: 31-channel fHOG, 10-channel Color
//! Names (both on a 4x4-pixel cell grid), and the 512-bin joint color
//! histogram used by the re-detector.

mod color_names;
mod histogram;
mod hog;

pub use color_names::{color_names, ColorNameTable, COLOR_NAMES, COLOR_NAME_CHANNELS, TABLE_ROWS};
pub use histogram::{color_bin, quantized_color_histogram, HistogramVector, HISTOGRAM_BINS};
pub use hog::{hog, HOG_CHANNELS};

use crate::error::{Error, Result};
use crate::imgproc::ImageBuffer;

/// Default cell side in pixels shared by HOG and pooled Color Names.
pub const CELL_SIZE: usize = 4;

/// Dense `m x n x d` real tensor stored channel-planar: channel `c`
/// occupies `data[c*m*n .. (c+1)*m*n]` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        Self {
            rows,
            cols,
            channels,
            data: vec![0.0; rows * cols * channels],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols * channels {
            return Err(Error::DimensionMismatch {
                expected: rows * cols * channels,
                actual: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn plane_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let len = self.plane_len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let len = self.plane_len();
        &mut self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[c * self.rows * self.cols + i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        let idx = c * self.rows * self.cols + i * self.cols + j;
        self.data[idx] = v;
    }

    /// `(1 - eta) * self + eta * other`, in place.
    pub fn blend(&mut self, other: &FeatureMap, eta: f64) -> Result<()> {
        if self.grid() != other.grid() || self.channels != other.channels {
            return Err(Error::GridMismatch {
                expected: self.grid(),
                actual: other.grid(),
            });
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = (1.0 - eta) * *a + eta * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Concatenates HOG and Color Names channels and tapers every channel with
/// `window`.
pub fn fuse(hog: &FeatureMap, cn: &FeatureMap, window: &FeatureMap) -> Result<FeatureMap> {
    let grid = hog.grid();
    for other in [cn.grid(), window.grid()] {
        if other != grid {
            return Err(Error::GridMismatch {
                expected: grid,
                actual: other,
            });
        }
    }
    let plane = hog.plane_len();
    let mut data = Vec::with_capacity(plane * (hog.channels + cn.channels));
    data.extend_from_slice(&hog.data);
    data.extend_from_slice(&cn.data);
    let w = window.channel(0);
    for chunk in data.chunks_exact_mut(plane) {
        for (v, &wv) in chunk.iter_mut().zip(w) {
            *v *= wv;
        }
    }
    FeatureMap::from_vec(grid.0, grid.1, hog.channels + cn.channels, data)
}

/// HOG + Color Names on the `CELL_SIZE` grid, windowed.
pub fn extract_fused(patch: &ImageBuffer, table: &ColorNameTable, window: &FeatureMap) -> Result<FeatureMap> {
    let h = hog(patch, CELL_SIZE);
    let cn = color_names(patch, table, CELL_SIZE);
    fuse(&h, &cn, window)
}
