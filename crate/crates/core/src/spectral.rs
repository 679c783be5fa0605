//! Multi-channel 2-D DFTs, Gaussian regression labels and the
//! frequency-domain correlation response shared by every filter.
//!
//! Convention: unnormalized forward transform, `1/(mn)` on the inverse.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::features::FeatureMap;

/// Complex `m x n x d` spectrum, channel-planar like [`FeatureMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMap {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<Complex64>,
}

impl SpectralMap {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        Self {
            rows,
            cols,
            channels,
            data: vec![Complex64::new(0.0, 0.0); rows * cols * channels],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, channels: usize, data: Vec<Complex64>) -> Result<Self> {
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

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let len = self.plane_len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.plane_len();
        &mut self.data[c * len..(c + 1) * len]
    }

    /// Per-bin power summed over channels, `sum_k conj(X^k) X^k`.
    pub fn power(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.plane_len()];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(self.channel(c)) {
                *o += v.norm_sqr();
            }
        }
        out
    }
}

/// Real `m x n` correlation scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ResponseMap {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Index of the maximum; ties go to the smallest row, then column.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = k;
            }
        }
        (best / self.cols, best % self.cols)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Planned forward/inverse transforms for one `m x n` grid.
pub struct Fourier2d {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier2d")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Clone for Fourier2d {
    fn clone(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            row_fwd: Arc::clone(&self.row_fwd),
            row_inv: Arc::clone(&self.row_inv),
            col_fwd: Arc::clone(&self.col_fwd),
            col_inv: Arc::clone(&self.col_inv),
        }
    }
}

impl Fourier2d {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn check(&self, grid: (usize, usize)) -> Result<()> {
        if grid != (self.rows, self.cols) {
            return Err(Error::GridMismatch {
                expected: (self.rows, self.cols),
                actual: grid,
            });
        }
        Ok(())
    }

    fn transform_plane(&self, plane: &mut [Complex64], row: &dyn Fft<f64>, col: &dyn Fft<f64>) {
        let (m, n) = (self.rows, self.cols);
        if n > 1 {
            row.process(plane);
        }
        if m > 1 {
            let mut t = vec![Complex64::new(0.0, 0.0); m * n];
            for i in 0..m {
                for j in 0..n {
                    t[j * m + i] = plane[i * n + j];
                }
            }
            col.process(&mut t);
            for i in 0..m {
                for j in 0..n {
                    plane[i * n + j] = t[j * m + i];
                }
            }
        }
    }

    pub fn forward(&self, x: &FeatureMap) -> Result<SpectralMap> {
        self.check(x.grid())?;
        let data: Vec<Complex64> = x.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut out = SpectralMap::from_vec(self.rows, self.cols, x.channels(), data)?;
        self.forward_in_place(&mut out)?;
        Ok(out)
    }

    pub fn forward_in_place(&self, x: &mut SpectralMap) -> Result<()> {
        self.check(x.grid())?;
        let len = x.plane_len();
        for plane in x.data.chunks_exact_mut(len) {
            self.transform_plane(plane, self.row_fwd.as_ref(), self.col_fwd.as_ref());
        }
        Ok(())
    }

    pub fn inverse_complex(&self, x: &SpectralMap) -> Result<SpectralMap> {
        self.check(x.grid())?;
        let mut out = x.clone();
        let len = out.plane_len();
        let scale = 1.0 / len as f64;
        for plane in out.data.chunks_exact_mut(len) {
            self.transform_plane(plane, self.row_inv.as_ref(), self.col_inv.as_ref());
            plane.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(out)
    }

    /// Inverse transform keeping the real part.
    pub fn inverse(&self, x: &SpectralMap) -> Result<FeatureMap> {
        let c = self.inverse_complex(x)?;
        let data = c.data.iter().map(|v| v.re).collect();
        FeatureMap::from_vec(self.rows, self.cols, x.channels, data)
    }

    /// `real(idft(sum_l conj(A^l) Z^l / (B + lambda)))`.
    pub fn response(&self, a: &SpectralMap, b: &[f64], z: &SpectralMap, lambda: f64) -> Result<ResponseMap> {
        self.check(a.grid())?;
        self.check(z.grid())?;
        if a.channels() != z.channels() {
            return Err(Error::DimensionMismatch {
                expected: a.channels(),
                actual: z.channels(),
            });
        }
        if b.len() != a.plane_len() {
            return Err(Error::DimensionMismatch {
                expected: a.plane_len(),
                actual: b.len(),
            });
        }
        let len = a.plane_len();
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        for c in 0..a.channels() {
            for ((o, av), zv) in acc.iter_mut().zip(a.channel(c)).zip(z.channel(c)) {
                *o += av.conj() * zv;
            }
        }
        for (o, &bv) in acc.iter_mut().zip(b) {
            *o /= bv + lambda;
        }
        let mut spec = SpectralMap::from_vec(self.rows, self.cols, 1, acc)?;
        let len_inv = 1.0 / len as f64;
        self.transform_plane(&mut spec.data, self.row_inv.as_ref(), self.col_inv.as_ref());
        let data = spec.data.iter().map(|v| v.re * len_inv).collect();
        ResponseMap::from_vec(self.rows, self.cols, data)
    }
}

pub fn dft(x: &FeatureMap) -> SpectralMap {
    Fourier2d::new(x.rows(), x.cols())
        .forward(x)
        .expect("grid matches its own plan")
}

pub fn idft(x: &SpectralMap) -> FeatureMap {
    Fourier2d::new(x.rows(), x.cols())
        .inverse(x)
        .expect("grid matches its own plan")
}

pub fn spectral_response(a: &SpectralMap, b: &[f64], z: &SpectralMap, lambda: f64) -> Result<ResponseMap> {
    Fourier2d::new(a.rows(), a.cols()).response(a, b, z, lambda)
}

/// Gaussian label with unit peak moved to index `(0, 0)` by a circular shift
/// of the grid-centered bump (center at `(m/2, n/2)`).
pub fn gaussian_label(m: usize, n: usize, sigma: f64) -> FeatureMap {
    let (u0, v0) = (m / 2, n / 2);
    let denom = 2.0 * sigma * sigma;
    let mut out = FeatureMap::zeros(m, n, 1);
    for i in 0..m {
        let du = ((i + u0) % m) as f64 - u0 as f64;
        for j in 0..n {
            let dv = ((j + v0) % n) as f64 - v0 as f64;
            out.set(i, j, 0, (-(du * du + dv * dv) / denom).exp());
        }
    }
    out
}
