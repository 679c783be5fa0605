//! Translation correlation filter: closed-form training, running
//! numerator/denominator updates, PCA channel compression and detection.

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::spectral::{Fourier2d, ResponseMap, SpectralMap};

/// Fourier-domain filter `A / (B + lambda)` with the running template it was
/// learned from.
#[derive(Debug, Clone)]
pub struct LinearFilterModel {
    numerator: SpectralMap,
    denominator: Vec<f64>,
    template: FeatureMap,
    label: SpectralMap,
    lambda: f64,
    eta: f64,
    plan: Fourier2d,
}

impl PartialEq for LinearFilterModel {
    fn eq(&self, other: &Self) -> bool {
        self.numerator == other.numerator
            && self.denominator == other.denominator
            && self.template == other.template
            && self.label == other.label
            && self.lambda == other.lambda
            && self.eta == other.eta
    }
}

fn check_grid(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::GridMismatch { expected, actual });
    }
    Ok(())
}

/// `conj(Y) * X^l` for every channel.
fn label_correlation(label: &SpectralMap, x: &SpectralMap) -> SpectralMap {
    let mut out = x.clone();
    let y = label.channel(0);
    for c in 0..out.channels() {
        for (v, yv) in out.channel_mut(c).iter_mut().zip(y) {
            *v *= yv.conj();
        }
    }
    out
}

impl LinearFilterModel {
    /// Single-sample solution: `A = conj(Y) X`, `B = sum_k |X^k|^2`, `mu = x`.
    pub fn train_initial(x: &FeatureMap, label: &SpectralMap, lambda: f64, eta: f64) -> Result<Self> {
        check_grid(label.grid(), x.grid())?;
        if lambda <= 0.0 {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        let plan = Fourier2d::new(x.rows(), x.cols());
        let xf = plan.forward(x)?;
        Ok(Self {
            numerator: label_correlation(label, &xf),
            denominator: xf.power(),
            template: x.clone(),
            label: label.clone(),
            lambda,
            eta,
            plan,
        })
    }

    /// Running update of numerator, denominator and template with rate eta.
    pub fn update_model(&mut self, x: &FeatureMap) -> Result<()> {
        check_grid(self.template.grid(), x.grid())?;
        if x.channels() != self.template.channels() {
            return Err(Error::DimensionMismatch {
                expected: self.template.channels(),
                actual: x.channels(),
            });
        }
        let xf = self.plan.forward(x)?;
        let fresh = label_correlation(&self.label, &xf);
        let eta = self.eta;
        for (a, f) in self.numerator.data_mut().iter_mut().zip(fresh.data()) {
            *a = *a * (1.0 - eta) + f * eta;
        }
        for (b, p) in self.denominator.iter_mut().zip(xf.power()) {
            *b = (1.0 - eta) * *b + eta * p;
        }
        self.template.blend(x, eta)
    }

    pub fn numerator(&self) -> &SpectralMap {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn template(&self) -> &FeatureMap {
        &self.template
    }

    pub fn label(&self) -> &SpectralMap {
        &self.label
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn grid(&self) -> (usize, usize) {
        self.template.grid()
    }

    pub fn plan(&self) -> &Fourier2d {
        &self.plan
    }

    /// The filter spectrum `F^l = A^l / (B + lambda)`.
    pub fn filter(&self) -> SpectralMap {
        let mut f = self.numerator.clone();
        for c in 0..f.channels() {
            for (v, &b) in f.channel_mut(c).iter_mut().zip(&self.denominator) {
                *v /= b + self.lambda;
            }
        }
        f
    }

    /// Uncompressed detection: response of the stored filter on `z`.
    pub fn respond(&self, z: &FeatureMap) -> Result<ResponseMap> {
        check_grid(self.grid(), z.grid())?;
        let zf = self.plan.forward(z)?;
        self.plan.response(&self.numerator, &self.denominator, &zf, self.lambda)
    }

    /// Blends the template only; the filter itself is left untouched.
    pub fn update_template(&mut self, x: &FeatureMap) -> Result<()> {
        self.template.blend(x, self.eta)
    }

    pub fn blend_template(&mut self, x: &FeatureMap, weight: f64) -> Result<()> {
        self.template.blend(x, weight)
    }

    /// Compressed model: `mu = x`, `A = conj(Y) F{P x}`, `B = sum |F{P x}|^2`.
    pub fn train_compressed(
        x: &FeatureMap,
        label: &SpectralMap,
        projection: &ProjectionMatrix,
        lambda: f64,
        eta: f64,
    ) -> Result<Self> {
        let compressed = projection.project(x)?;
        let mut model = Self::train_initial(&compressed, label, lambda, eta)?;
        model.template = x.clone();
        Ok(model)
    }

    /// Re-solves the compressed filter under a fresh projection: the
    /// numerator is rebuilt from the projected template and the denominator
    /// accumulates the projected sample's power.
    pub fn resolve_compressed(&mut self, x: &FeatureMap, projection: &ProjectionMatrix) -> Result<()> {
        check_grid(self.grid(), x.grid())?;
        let tf = self.plan.forward(&projection.project(&self.template)?)?;
        let xf = self.plan.forward(&projection.project(x)?)?;
        self.numerator = label_correlation(&self.label, &tf);
        let eta = self.eta;
        for (b, p) in self.denominator.iter_mut().zip(xf.power()) {
            *b = (1.0 - eta) * *b + eta * p;
        }
        Ok(())
    }
}

/// Row-orthonormal `d x D` channel projection, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ProjectionMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self {
            rows: dim,
            cols: dim,
            data,
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Compressed dimension `d`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Raw dimension `D`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Applies `P` to the channel vector of every cell.
    pub fn project(&self, x: &FeatureMap) -> Result<FeatureMap> {
        if x.channels() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: x.channels(),
            });
        }
        let plane = x.plane_len();
        let mut out = FeatureMap::zeros(x.rows(), x.cols(), self.rows);
        for k in 0..self.rows {
            let dst = out.channel_mut(k);
            for l in 0..self.cols {
                let w = self.data[k * self.cols + l];
                if w == 0.0 {
                    continue;
                }
                let src = &x.data()[l * plane..(l + 1) * plane];
                for (o, &s) in dst.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        Ok(out)
    }

    /// `max |P P^T - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.rows {
                let dot: f64 = (0..self.cols).map(|k| self.get(i, k) * self.get(j, k)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Top-`d` principal channel directions of `mu` (cells as observations,
/// uncentered second moments), orthonormalized with a thin QR.
pub fn compute_projection(mu: &FeatureMap, d: usize) -> Result<ProjectionMatrix> {
    let dim = mu.channels();
    if d == 0 || d > dim {
        return Err(Error::InvalidArgument(format!(
            "compressed dimension {d} must lie in 1..={dim}"
        )));
    }
    let cells = mu.plane_len();
    // samples: cells x D
    let samples = DMatrix::from_fn(cells, dim, |p, l| mu.data()[l * cells + p]);

    let directions = if cells >= dim {
        let scatter = samples.transpose() * &samples;
        let eig = SymmetricEigen::new(scatter);
        let order = descending(eig.eigenvalues.as_slice());
        DMatrix::from_fn(dim, d, |r, c| eig.eigenvectors[(r, order[c])])
    } else {
        // Same principal subspace through the smaller Gram matrix.
        let gram = &samples * samples.transpose();
        let eig = SymmetricEigen::new(gram);
        let order = descending(eig.eigenvalues.as_slice());
        let mut dirs = DMatrix::zeros(dim, d);
        for (c, &k) in order.iter().take(d).enumerate() {
            let lambda = eig.eigenvalues[k];
            if lambda <= 1e-12 {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            let u = samples.transpose() * v / lambda.sqrt();
            dirs.set_column(c, &u);
        }
        dirs
    };

    let q = complete_orthonormal(directions);
    let data = (0..d).flat_map(|r| (0..dim).map(move |c| (r, c))).map(|(r, c)| q[(c, r)]).collect();
    ProjectionMatrix::from_rows(d, dim, data)
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Thin QR, with any rank-deficient columns replaced by unused basis vectors.
fn complete_orthonormal(dirs: DMatrix<f64>) -> DMatrix<f64> {
    let (dim, d) = dirs.shape();
    let q = dirs.clone().qr().q();
    let mut out = DMatrix::zeros(dim, d);
    let mut filled = 0;
    for c in 0..d {
        if dirs.column(c).norm() > 1e-12 {
            out.set_column(filled, &q.column(c));
            filled += 1;
        }
    }
    let mut candidate = 0;
    while filled < d && candidate < dim {
        let mut v = nalgebra::DVector::zeros(dim);
        v[candidate] = 1.0;
        for c in 0..filled {
            let col = out.column(c).clone_owned();
            v -= &col * col.dot(&v);
        }
        let n = v.norm();
        if n > 1e-8 {
            out.set_column(filled, &(v / n));
            filled += 1;
        }
        candidate += 1;
    }
    out
}

/// Outcome of one detection.
#[derive(Debug, Clone)]
pub struct Detection {
    pub response: ResponseMap,
    /// Signed sub-cell displacement `(dy, dx)`.
    pub peak: (f64, f64),
    /// Response value at the discrete argmax.
    pub r_max: f64,
}

/// Compresses `z` with `P` and evaluates the stored compressed filter on it.
pub fn detect(model: &LinearFilterModel, projection: &ProjectionMatrix, z: &FeatureMap) -> Result<Detection> {
    if projection.rows() != model.numerator.channels() {
        return Err(Error::DimensionMismatch {
            expected: model.numerator.channels(),
            actual: projection.rows(),
        });
    }
    check_grid(model.grid(), z.grid())?;
    let compressed = projection.project(z)?;
    let zf = model.plan.forward(&compressed)?;
    let response = model
        .plan
        .response(&model.numerator, &model.denominator, &zf, model.lambda)?;
    Ok(locate_peak(response))
}

pub fn locate_peak(response: ResponseMap) -> Detection {
    let (m, n) = (response.rows(), response.cols());
    let (pi, pj) = response.argmax();
    let r_max = response.get(pi, pj);
    let dy = signed_shift(pi, m) + parabolic_offset(
        response.get((pi + m - 1) % m, pj),
        r_max,
        response.get((pi + 1) % m, pj),
    );
    let dx = signed_shift(pj, n) + parabolic_offset(
        response.get(pi, (pj + n - 1) % n),
        r_max,
        response.get(pi, (pj + 1) % n),
    );
    Detection {
        response,
        peak: (dy, dx),
        r_max,
    }
}

#[inline]
fn signed_shift(index: usize, len: usize) -> f64 {
    if index > len / 2 {
        index as f64 - len as f64
    } else {
        index as f64
    }
}

/// Vertex of the parabola through three equally spaced samples, relative to
/// the middle one.
#[inline]
fn parabolic_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom < 0.0 {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Per-bin gradient of `|sum_l conj(F^l) X^l - Y|^2 + lambda sum_l |F^l|^2`
/// at the model's filter; zero at the optimum.
pub fn normal_equation_residual(model: &LinearFilterModel, x: &FeatureMap) -> Result<f64> {
    let xf = model.plan.forward(x)?;
    let f = model.filter();
    let y = model.label.channel(0);
    let mut worst: f64 = 0.0;
    for p in 0..xf.plane_len() {
        let mut fit = Complex64::new(0.0, 0.0);
        for l in 0..xf.channels() {
            fit += f.channel(l)[p].conj() * xf.channel(l)[p];
        }
        let err = fit - y[p];
        for l in 0..xf.channels() {
            let g = xf.channel(l)[p].conj() * err + model.lambda * f.channel(l)[p].conj();
            worst = worst.max(g.norm());
        }
    }
    Ok(worst)
}
