//! Low-light enhancement: the luminance gate, a cheap exposure gain for live
//! tracking, and the illumination-map estimator used as the quality reference.

use crate::error::{Error, Result};
use crate::imgproc::{mean_luminance, BoundingBox, ImageBuffer};

/// Kernel half-width of the weight window (5x5).
const WEIGHT_RADIUS: isize = 2;
/// Largest gain the fast path applies in one pass.
pub const MAX_GAIN: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EnhanceConfig {
    /// Exposure control.
    pub k: f64,
    /// Luminance gate on the 0-255 scale.
    pub t_l: f64,
    pub iterations: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub sigma: f64,
    /// Atmospheric light of the inverted model.
    pub alpha: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            t_l: 48.0,
            iterations: 1,
            beta: 0.15,
            epsilon: 1e-3,
            sigma: 2.0,
            alpha: 0.95,
            tolerance: 1e-6,
            max_iterations: 1000,
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.k > 0.0) {
            return bad("k must be positive");
        }
        if !(0.0..=255.0).contains(&self.t_l) {
            return bad("t_l must lie in [0, 255]");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.beta >= 0.0) {
            return bad("beta must be non-negative");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Per-pixel scalar field, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl IlluminationMap {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
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
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    pub horizontal: IlluminationMap,
    pub vertical: IlluminationMap,
}

pub fn should_enhance(img: &ImageBuffer, bb: Option<&BoundingBox>, cfg: &EnhanceConfig) -> bool {
    mean_luminance(img, bb) < cfg.t_l
}

/// Gain that lifts the box luminance towards `128 k`, within `[1, MAX_GAIN]`.
pub fn exposure_gain(mean: f64, cfg: &EnhanceConfig) -> f64 {
    (cfg.k * (128.0 / 255.0) / (mean / 255.0).max(cfg.epsilon)).clamp(1.0, MAX_GAIN)
}

pub fn fast_enhance(img: &ImageBuffer, bb: Option<&BoundingBox>, cfg: &EnhanceConfig) -> ImageBuffer {
    let mut out = img.clone();
    for _ in 0..cfg.iterations {
        let g = exposure_gain(mean_luminance(&out, bb), cfg);
        if g == 1.0 {
            break;
        }
        for v in out.data_mut() {
            *v = (*v * g).min(1.0);
        }
    }
    out
}

pub fn initial_illumination(img: &ImageBuffer) -> IlluminationMap {
    let c = img.channels();
    let data = img
        .data()
        .chunks_exact(c)
        .map(|px| px.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    IlluminationMap {
        rows: img.height(),
        cols: img.width(),
        data,
    }
}

/// Normalized `(2r+1)^2` Gaussian, row-major.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let mut k = Vec::new();
    for dy in -WEIGHT_RADIUS..=WEIGHT_RADIUS {
        for dx in -WEIGHT_RADIUS..=WEIGHT_RADIUS {
            k.push((-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Forward differences with a replicated last row/column (zero there).
fn gradients(t: &IlluminationMap) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (t.rows, t.cols);
    let mut gh = vec![0.0; m * n];
    let mut gv = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            if j + 1 < n {
                gh[i * n + j] = t.get(i, j + 1) - t.get(i, j);
            }
            if i + 1 < m {
                gv[i * n + j] = t.get(i + 1, j) - t.get(i, j);
            }
        }
    }
    (gh, gv)
}

pub fn build_weights(t_hat: &IlluminationMap, cfg: &EnhanceConfig) -> WeightField {
    let (m, n) = (t_hat.rows, t_hat.cols);
    let kernel = gaussian_kernel(cfg.sigma);
    let kernel_sum: f64 = kernel.iter().sum();
    let (gh, gv) = gradients(t_hat);
    let clamp = |v: isize, len: usize| v.clamp(0, len as isize - 1) as usize;
    let mut wh = vec![0.0; m * n];
    let mut wv = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let (mut sh, mut sv) = (0.0, 0.0);
            let mut kk = 0;
            for dy in -WEIGHT_RADIUS..=WEIGHT_RADIUS {
                let y = clamp(i as isize + dy, m);
                for dx in -WEIGHT_RADIUS..=WEIGHT_RADIUS {
                    let x = clamp(j as isize + dx, n);
                    sh += kernel[kk] * gh[y * n + x];
                    sv += kernel[kk] * gv[y * n + x];
                    kk += 1;
                }
            }
            wh[i * n + j] = kernel_sum / (sh.abs() + cfg.epsilon);
            wv[i * n + j] = kernel_sum / (sv.abs() + cfg.epsilon);
        }
    }
    WeightField {
        horizontal: IlluminationMap { rows: m, cols: n, data: wh },
        vertical: IlluminationMap { rows: m, cols: n, data: wv },
    }
}

/// The refinement objective as a sparse operator
/// `M = I + beta (Dh' Ah Dh + Dv' Av Dv)`.
#[derive(Debug, Clone)]
pub struct RefineSystem {
    rows: usize,
    cols: usize,
    beta: f64,
    ah: Vec<f64>,
    av: Vec<f64>,
    t_hat: Vec<f64>,
}

impl RefineSystem {
    pub fn new(t_hat: &IlluminationMap, cfg: &EnhanceConfig) -> Self {
        let w = build_weights(t_hat, cfg);
        let (gh, gv) = gradients(t_hat);
        let ah = w
            .horizontal
            .data
            .iter()
            .zip(&gh)
            .map(|(w, g)| w / (g.abs() + cfg.epsilon))
            .collect();
        let av = w
            .vertical
            .data
            .iter()
            .zip(&gv)
            .map(|(w, g)| w / (g.abs() + cfg.epsilon))
            .collect();
        Self {
            rows: t_hat.rows,
            cols: t_hat.cols,
            beta: cfg.beta,
            ah,
            av,
            t_hat: t_hat.data.clone(),
        }
    }

    /// Per-pixel smoothness coefficients `(Ah, Av)`.
    pub fn coefficients(&self) -> (&[f64], &[f64]) {
        (&self.ah, &self.av)
    }

    pub fn objective(&self, t: &[f64]) -> f64 {
        let (m, n) = (self.rows, self.cols);
        let mut f: f64 = t.iter().zip(&self.t_hat).map(|(a, b)| (a - b).powi(2)).sum();
        let mut smooth = 0.0;
        for i in 0..m {
            for j in 0..n {
                let p = i * n + j;
                if j + 1 < n {
                    smooth += self.ah[p] * (t[p + 1] - t[p]).powi(2);
                }
                if i + 1 < m {
                    smooth += self.av[p] * (t[p + n] - t[p]).powi(2);
                }
            }
        }
        f += self.beta * smooth;
        f
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (m, n) = (self.rows, self.cols);
        out.copy_from_slice(x);
        if self.beta == 0.0 {
            return;
        }
        for i in 0..m {
            for j in 0..n {
                let p = i * n + j;
                if j + 1 < n {
                    let flux = self.beta * self.ah[p] * (x[p + 1] - x[p]);
                    out[p] -= flux;
                    out[p + 1] += flux;
                }
                if i + 1 < m {
                    let flux = self.beta * self.av[p] * (x[p + n] - x[p]);
                    out[p] -= flux;
                    out[p + n] += flux;
                }
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let (m, n) = (self.rows, self.cols);
        let mut d = vec![1.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let p = i * n + j;
                if j + 1 < n {
                    d[p] += self.beta * self.ah[p];
                    d[p + 1] += self.beta * self.ah[p];
                }
                if i + 1 < m {
                    d[p] += self.beta * self.av[p];
                    d[p + n] += self.beta * self.av[p];
                }
            }
        }
        d
    }

    pub fn rhs(&self) -> &[f64] {
        &self.t_hat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub map: IlluminationMap,
    pub converged: bool,
    pub iterations: usize,
}

/// Solves the refinement system by Jacobi-preconditioned conjugate
/// gradients from `T_hat`, calling `observe` with every iterate.
pub fn refine_with(t_hat: &IlluminationMap, cfg: &EnhanceConfig, mut observe: impl FnMut(&[f64])) -> Refinement {
    let sys = RefineSystem::new(t_hat, cfg);
    let b = sys.rhs();
    let len = b.len();
    let mut x = b.to_vec();
    observe(&x);
    let mut ax = vec![0.0; len];
    sys.apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let inv_diag: Vec<f64> = sys.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; len];
    let mut iterations = 0;
    let mut converged = b_norm == 0.0 || r.iter().map(|v| v * v).sum::<f64>().sqrt() <= cfg.tolerance * b_norm;
    while !converged && iterations < cfg.max_iterations {
        sys.apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        for k in 0..len {
            x[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        iterations += 1;
        observe(&x);
        if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= cfg.tolerance * b_norm {
            converged = true;
            break;
        }
        for k in 0..len {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let ratio = rz_next / rz;
        rz = rz_next;
        for k in 0..len {
            p[k] = z[k] + ratio * p[k];
        }
    }
    if !converged {
        log::warn!("illumination refinement stopped after {iterations} iterations without converging");
    }
    let data = x.iter().map(|v| v.clamp(cfg.epsilon, 1.0)).collect();
    Refinement {
        map: IlluminationMap {
            rows: t_hat.rows,
            cols: t_hat.cols,
            data,
        },
        converged,
        iterations,
    }
}

pub fn refine_illumination(t_hat: &IlluminationMap, cfg: &EnhanceConfig) -> Refinement {
    refine_with(t_hat, cfg, |_| {})
}

/// `L / (T + eps)` per channel, clamped to `[0, 1]`.
pub fn recover(img: &ImageBuffer, t: &IlluminationMap, cfg: &EnhanceConfig) -> Result<ImageBuffer> {
    if (t.rows, t.cols) != (img.height(), img.width()) {
        return Err(Error::GridMismatch {
            expected: (img.height(), img.width()),
            actual: (t.rows, t.cols),
        });
    }
    let c = img.channels();
    let mut out = img.clone();
    for (px, &tv) in out.data_mut().chunks_exact_mut(c).zip(&t.data) {
        for v in px {
            *v = (*v / (tv + cfg.epsilon)).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Recovery through the haze model of the inverted image.
pub fn recover_inverted(img: &ImageBuffer, cfg: &EnhanceConfig) -> Result<ImageBuffer> {
    let alpha = cfg.alpha;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let t_hat = initial_illumination(img);
    let c = img.channels();
    let mut out = img.clone();
    for (px, &m) in out.data_mut().chunks_exact_mut(c).zip(&t_hat.data) {
        let t = 1.0 - 1.0 / alpha + m / alpha;
        let denom = t.max(0.0) + cfg.epsilon;
        for v in px {
            *v = ((*v - 1.0 + alpha) / denom + (1.0 - alpha)).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Full reference path: estimate, refine, recover.
pub fn lime_enhance(img: &ImageBuffer, cfg: &EnhanceConfig) -> Result<ImageBuffer> {
    let refined = refine_illumination(&initial_illumination(img), cfg);
    recover(img, &refined.map, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(seed: u64, m: usize, n: usize) -> IlluminationMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        IlluminationMap::from_vec(m, n, (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    fn bb() -> BoundingBox {
        BoundingBox::new(0.0, 0.0, 4.0, 4.0)
    }

    #[test]
    fn gate_is_strict() {
        let cfg = EnhanceConfig::default();
        let dark = ImageBuffer::filled(4, 4, 3, 20.0 / 255.0);
        let bright = ImageBuffer::filled(4, 4, 3, 120.0 / 255.0);
        let edge = ImageBuffer::filled(4, 4, 3, 48.0 / 255.0);
        assert!(should_enhance(&dark, Some(&bb()), &cfg));
        assert!(!should_enhance(&bright, Some(&bb()), &cfg));
        assert!(!should_enhance(&edge, Some(&bb()), &cfg));
    }

    #[test]
    fn gate_reads_box_not_frame() {
        let mut img = ImageBuffer::filled(20, 20, 3, 0.8);
        for y in 0..5 {
            for x in 0..5 {
                for c in 0..3 {
                    img.set(y, x, c, 0.05);
                }
            }
        }
        let cfg = EnhanceConfig::default();
        assert!(!should_enhance(&img, None, &cfg));
        assert!(should_enhance(&img, Some(&BoundingBox::new(0.0, 0.0, 5.0, 5.0)), &cfg));
    }

    #[test]
    fn fast_gain_examples() {
        let cfg = EnhanceConfig::default();
        assert!((exposure_gain(32.0, &cfg) - 4.0).abs() < 1e-12);
        assert_eq!(exposure_gain(130.0, &cfg), 1.0);
        let bright = ImageBuffer::filled(4, 4, 3, 0.6);
        assert_eq!(fast_enhance(&bright, Some(&bb()), &cfg), bright);
        let zero = ImageBuffer::new(4, 4, 3);
        assert_eq!(fast_enhance(&zero, Some(&bb()), &cfg), zero);
        let mut img = ImageBuffer::filled(4, 4, 3, 32.0 / 255.0);
        img.set(0, 0, 0, 0.1);
        img.set(0, 0, 1, 0.1);
        img.set(0, 0, 2, 0.1);
        let out = fast_enhance(&img, Some(&BoundingBox::new(1.0, 1.0, 2.0, 2.0)), &cfg);
        assert!((out.get(0, 0, 0) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn fast_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..8 * 8 * 3).map(|_| rng.random_range(0.0..0.2)).collect();
        let img = ImageBuffer::from_vec(8, 8, 3, data).unwrap();
        let cfg = EnhanceConfig {
            iterations: 3,
            ..Default::default()
        };
        let out = fast_enhance(&img, None, &cfg);
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!(a >= b && *a <= 1.0);
        }
    }

    #[test]
    fn illumination_is_channel_max() {
        let img = ImageBuffer::from_vec(1, 1, 3, vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(initial_illumination(&img).data(), &[0.5]);
        let gray = ImageBuffer::from_vec(1, 2, 1, vec![0.7, 0.1]).unwrap();
        assert_eq!(initial_illumination(&gray).data(), &[0.7, 0.1]);
    }

    #[test]
    fn constant_map_weights() {
        let cfg = EnhanceConfig::default();
        let w = build_weights(&IlluminationMap::filled(6, 6, 0.4), &cfg);
        for v in w.horizontal.data().iter().chain(w.vertical.data()) {
            assert!((v - 1.0 / cfg.epsilon).abs() < 1e-6);
        }
    }

    #[test]
    fn weights_match_direct_sum() {
        let cfg = EnhanceConfig::default();
        let t = random_map(5, 8, 8);
        let w = build_weights(&t, &cfg);
        let at = |i: isize, j: isize| t.get(i.clamp(0, 7) as usize, j.clamp(0, 7) as usize);
        let dh = |i: isize, j: isize| if j >= 7 { 0.0 } else { at(i, j + 1) - at(i, j) };
        let dv = |i: isize, j: isize| if i >= 7 { 0.0 } else { at(i + 1, j) - at(i, j) };
        for i in 0..8isize {
            for j in 0..8isize {
                let (mut g, mut sh, mut sv) = (0.0, 0.0, 0.0);
                let mut norm = 0.0;
                for dy in -2..=2isize {
                    for dx in -2..=2isize {
                        norm += (-((dy * dy + dx * dx) as f64) / 8.0).exp();
                    }
                }
                for dy in -2..=2isize {
                    for dx in -2..=2isize {
                        let k = (-((dy * dy + dx * dx) as f64) / 8.0).exp() / norm;
                        let (y, x) = ((i + dy).clamp(0, 7), (j + dx).clamp(0, 7));
                        g += k;
                        sh += k * dh(y, x);
                        sv += k * dv(y, x);
                    }
                }
                let p = (i * 8 + j) as usize;
                assert!((w.horizontal.data()[p] - g / (sh.abs() + 1e-3)).abs() < 1e-9);
                assert!((w.vertical.data()[p] - g / (sv.abs() + 1e-3)).abs() < 1e-9);
                assert!(w.horizontal.data()[p] > 0.0 && w.vertical.data()[p] > 0.0);
            }
        }
    }

    fn dense_solution(t: &IlluminationMap, cfg: &EnhanceConfig) -> Vec<f64> {
        let sys = RefineSystem::new(t, cfg);
        let (ah, av) = sys.coefficients();
        let (m, n) = (t.rows(), t.cols());
        let len = m * n;
        let mut dh = DMatrix::<f64>::zeros(len, len);
        let mut dv = DMatrix::<f64>::zeros(len, len);
        for i in 0..m {
            for j in 0..n {
                let p = i * n + j;
                if j + 1 < n {
                    dh[(p, p)] = -1.0;
                    dh[(p, p + 1)] = 1.0;
                }
                if i + 1 < m {
                    dv[(p, p)] = -1.0;
                    dv[(p, p + n)] = 1.0;
                }
            }
        }
        let ah = DMatrix::from_diagonal(&DVector::from_column_slice(ah));
        let av = DMatrix::from_diagonal(&DVector::from_column_slice(av));
        let lhs = DMatrix::<f64>::identity(len, len) + cfg.beta * (dh.transpose() * ah * &dh + dv.transpose() * av * &dv);
        let rhs = DVector::from_column_slice(t.data());
        lhs.lu().solve(&rhs).unwrap().iter().cloned().collect()
    }

    #[test]
    fn refinement_matches_dense_solve() {
        let cfg = EnhanceConfig::default();
        for seed in 0..5 {
            let t = random_map(100 + seed, 8, 8);
            let out = refine_illumination(&t, &cfg);
            assert!(out.converged);
            let dense = dense_solution(&t, &cfg);
            for (a, b) in out.map.data().iter().zip(&dense) {
                assert!((a - b.clamp(cfg.epsilon, 1.0)).abs() < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn objective_never_increases() {
        let cfg = EnhanceConfig::default();
        let t = random_map(7, 8, 8);
        let sys = RefineSystem::new(&t, &cfg);
        let mut values = Vec::new();
        refine_with(&t, &cfg, |x| values.push(sys.objective(x)));
        assert!(values.len() > 1);
        for w in values.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{values:?}");
        }
    }

    #[test]
    fn trivial_refinements() {
        let t = random_map(8, 8, 8);
        let cfg = EnhanceConfig {
            beta: 0.0,
            ..Default::default()
        };
        assert_eq!(refine_illumination(&t, &cfg).map, t);
        let c = IlluminationMap::filled(5, 5, 0.3);
        assert_eq!(refine_illumination(&c, &EnhanceConfig::default()).map, c);
    }

    #[test]
    fn recovery_examples() {
        let cfg = EnhanceConfig::default();
        let img = ImageBuffer::from_vec(1, 1, 3, vec![0.2, 0.5, 0.3]).unwrap();
        let r = recover(&img, &IlluminationMap::filled(1, 1, 0.5), &cfg).unwrap();
        for (v, e) in r.data().iter().zip([0.2 / 0.501, 0.5 / 0.501, 0.3 / 0.501]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!((r.get(0, 0, 0) - 0.399).abs() < 1e-3);
        let one = recover(&img, &IlluminationMap::filled(1, 1, 1.0), &cfg).unwrap();
        assert!((one.get(0, 0, 1) - 0.5 / 1.001).abs() < 1e-12);
        let black = ImageBuffer::new(2, 2, 3);
        assert_eq!(recover(&black, &IlluminationMap::filled(2, 2, 0.2), &cfg).unwrap(), black);
        assert!(recover(&black, &IlluminationMap::filled(3, 2, 0.2), &cfg).is_err());
    }

    #[test]
    fn inverted_model() {
        let cfg = EnhanceConfig::default();
        let white = ImageBuffer::filled(2, 2, 3, 1.0);
        for v in recover_inverted(&white, &cfg).unwrap().data() {
            assert!((v - 1.0).abs() <= cfg.epsilon);
        }
        let img = ImageBuffer::from_vec(1, 1, 3, vec![0.2, 0.5, 0.3]).unwrap();
        let unit = EnhanceConfig {
            alpha: 1.0,
            ..Default::default()
        };
        let r = recover_inverted(&img, &unit).unwrap();
        for (v, l) in r.data().iter().zip([0.2, 0.5, 0.3]) {
            assert!((v - l / (0.5 + 1e-3)).abs() < 1e-12);
        }
        let a: f64 = 0.9;
        let cfg = EnhanceConfig {
            alpha: a,
            ..Default::default()
        };
        let px = [0.6, 0.7, 0.65];
        let img = ImageBuffer::from_vec(1, 1, 3, px.to_vec()).unwrap();
        let t = 1.0 - 1.0 / a + 0.7 / a;
        let r = recover_inverted(&img, &cfg).unwrap();
        for (v, l) in r.data().iter().zip(px) {
            let expect: f64 = (l - 1.0 + a) / (t + 1e-3) + (1.0 - a);
            assert!((v - expect.clamp(0.0, 1.0)).abs() < 1e-12);
        }
        let zero_alpha = EnhanceConfig {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(recover_inverted(&img, &zero_alpha).is_err());
    }

    #[test]
    fn recoveries_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..10 * 10 * 3).map(|_| rng.random_range(0.0..1.0)).collect();
        let img = ImageBuffer::from_vec(10, 10, 3, data).unwrap();
        let cfg = EnhanceConfig::default();
        for out in [lime_enhance(&img, &cfg).unwrap(), recover_inverted(&img, &cfg).unwrap()] {
            assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
