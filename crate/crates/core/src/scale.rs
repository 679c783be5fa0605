//! 1-D scale filter over a pyramid of resampled target patches.
//!
//! Each of the `N` scale samples is a flattened HOG descriptor of the
//! target crop at size `a^n (W, H)`. Scores over the `N` exponents are
//! upsampled to `N_interp` points by trigonometric interpolation before the
//! arg-max, so the estimate resolves half steps.

use rustfft::num_complex::Complex64;

use crate::dcf::{compute_projection, LinearFilterModel, ProjectionMatrix};
use crate::error::{Error, Result};
use crate::features::{hog, FeatureMap, CELL_SIZE};
use crate::imgproc::{extract_patch, BoundingBox, ImageBuffer};
use crate::spectral::{Fourier2d, SpectralMap};

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleConfig {
    /// Number of scale samples (odd).
    pub n_scales: usize,
    /// Number of interpolated scores.
    pub n_interp: usize,
    /// Scale step `a`.
    pub step: f64,
    /// Label spread in scale-step units.
    pub sigma: f64,
    pub lambda: f64,
    pub eta: f64,
    /// Compressed dimension; `None` picks `min(n_scales, D_s)`.
    pub dims: Option<usize>,
    /// Pixel-area budget of the resampled scale template.
    pub model_max_area: f64,
    pub min_scale: f64,
    pub max_scale: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            n_scales: 17,
            n_interp: 33,
            step: 1.02,
            sigma: (17f64).sqrt() / 4.0,
            lambda: 0.01,
            eta: 0.025,
            dims: None,
            model_max_area: 512.0,
            min_scale: 0.2,
            max_scale: 5.0,
        }
    }
}

impl ScaleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_scales == 0 || self.n_scales.is_multiple_of(2) {
            return Err(Error::Config(format!("scale count must be odd, got {}", self.n_scales)));
        }
        if self.n_interp < self.n_scales {
            return Err(Error::Config("interpolated scale count below sample count".into()));
        }
        if self.step <= 1.0 {
            return Err(Error::Config(format!("scale step must exceed 1, got {}", self.step)));
        }
        if !(self.min_scale > 0.0 && self.min_scale <= 1.0 && self.max_scale >= 1.0) {
            return Err(Error::Config("scale clamp must satisfy 0 < min <= 1 <= max".into()));
        }
        Ok(())
    }

    /// Exponents `-(N-1)/2 ..= (N-1)/2`.
    pub fn exponents(&self) -> Vec<i32> {
        let half = (self.n_scales as i32 - 1) / 2;
        (-half..=half).collect()
    }
}

/// Crop sizes `round(a^n * (w, h))`, floored at 8 px, for every exponent.
pub fn scale_patch_sizes(cfg: &ScaleConfig, w: f64, h: f64) -> Vec<(usize, usize)> {
    cfg.exponents()
        .into_iter()
        .map(|n| {
            let f = cfg.step.powi(n);
            (((f * w).round() as usize).max(8), ((f * h).round() as usize).max(8))
        })
        .collect()
}

/// MATLAB-style `hann(N)`: strictly positive at both ends.
fn scale_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos()))
        .collect()
}

/// Interpolates `samples` (odd length) at `count` evenly spaced positions
/// spanning the first to the last sample, using the band-limited periodic
/// interpolant.
pub fn trig_interpolate(samples: &[f64], count: usize) -> Vec<f64> {
    let n = samples.len();
    if n == 0 || count == 0 {
        return Vec::new();
    }
    if n == 1 || count == 1 {
        return vec![samples[0]; count];
    }
    let half = (n as i64 - 1) / 2;
    let coeffs: Vec<(i64, Complex64)> = (-half..=half)
        .map(|k| {
            let mut c = Complex64::new(0.0, 0.0);
            for (j, &s) in samples.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * j as i64) as f64 / n as f64;
                c += s * Complex64::from_polar(1.0, ang);
            }
            (k, c)
        })
        .collect();
    let span = (n - 1) as f64;
    (0..count)
        .map(|i| {
            let t = span * i as f64 / (count - 1) as f64;
            let v: Complex64 = coeffs
                .iter()
                .map(|&(k, c)| c * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * t / n as f64))
                .sum();
            v.re / n as f64
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ScaleModel {
    cfg: ScaleConfig,
    base_size: (f64, f64),
    template_size: (usize, usize),
    current_scale: f64,
    window: Vec<f64>,
    label: SpectralMap,
    plan: Fourier2d,
    filter: Option<LinearFilterModel>,
    projection: Option<ProjectionMatrix>,
}

impl ScaleModel {
    /// Untrained model for a target of `base_size = (w, h)` pixels.
    pub fn new(cfg: ScaleConfig, base_size: (f64, f64)) -> Result<Self> {
        cfg.validate()?;
        let (w, h) = base_size;
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::InvalidArgument(format!("target size must be positive, got {w}x{h}")));
        }
        let factor = (cfg.model_max_area / (w * h)).sqrt();
        let snap = |v: f64| (((v * factor) / CELL_SIZE as f64).floor() as usize * CELL_SIZE).max(8);
        let template_size = (snap(w), snap(h));

        let n = cfg.n_scales;
        let center = (n - 1) / 2;
        let mut label_map = FeatureMap::zeros(1, n, 1);
        for k in 0..n {
            let d = k as f64 - center as f64;
            label_map.set(0, k, 0, (-0.5 * d * d / (cfg.sigma * cfg.sigma)).exp());
        }
        let plan = Fourier2d::new(1, n);
        let label = plan.forward(&label_map)?;
        Ok(Self {
            window: scale_window(n),
            cfg,
            base_size,
            template_size,
            current_scale: 1.0,
            label,
            plan,
            filter: None,
            projection: None,
        })
    }

    pub fn config(&self) -> &ScaleConfig {
        &self.cfg
    }

    pub fn current_scale(&self) -> f64 {
        self.current_scale
    }

    pub fn set_current_scale(&mut self, scale: f64) {
        self.current_scale = scale.clamp(self.cfg.min_scale, self.cfg.max_scale);
    }

    /// Current target size in pixels.
    pub fn target_size(&self) -> (f64, f64) {
        (self.base_size.0 * self.current_scale, self.base_size.1 * self.current_scale)
    }

    pub fn is_trained(&self) -> bool {
        self.filter.is_some()
    }

    pub fn filter(&self) -> Option<&LinearFilterModel> {
        self.filter.as_ref()
    }

    pub fn projection(&self) -> Option<&ProjectionMatrix> {
        self.projection.as_ref()
    }

    /// `1 x N x D_s` pyramid around `center` at the current scale.
    pub fn build_scale_pyramid(&self, img: &ImageBuffer, center: (f64, f64)) -> FeatureMap {
        let (w, h) = self.target_size();
        let sizes = scale_patch_sizes(&self.cfg, w, h);
        let n = sizes.len();
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (k, &(pw, ph)) in sizes.iter().enumerate() {
            let bb = BoundingBox::from_center(center.0, center.1, pw as f64, ph as f64);
            let patch = extract_patch(img, &bb, 1.0, self.template_size);
            let f = hog(&patch, CELL_SIZE);
            let wk = self.window[k];
            columns.push(f.data().iter().map(|v| v * wk).collect());
        }
        let dim = columns[0].len();
        let mut out = FeatureMap::zeros(1, n, dim);
        for (k, col) in columns.iter().enumerate() {
            for (c, &v) in col.iter().enumerate() {
                out.set(0, k, c, v);
            }
        }
        out
    }

    fn dims_for(&self, raw: usize) -> usize {
        self.cfg.dims.unwrap_or(self.cfg.n_scales).min(raw).max(1)
    }

    /// Trains on the first pyramid, otherwise applies the running update and
    /// refreshes the projection.
    pub fn update_scale(&mut self, pyramid: &FeatureMap) -> Result<()> {
        if pyramid.grid() != (1, self.cfg.n_scales) {
            return Err(Error::GridMismatch {
                expected: (1, self.cfg.n_scales),
                actual: pyramid.grid(),
            });
        }
        let dims = self.dims_for(pyramid.channels());
        match self.filter.as_mut() {
            None => {
                let p = compute_projection(pyramid, dims)?;
                self.filter = Some(LinearFilterModel::train_compressed(
                    pyramid,
                    &self.label,
                    &p,
                    self.cfg.lambda,
                    self.cfg.eta,
                )?);
                self.projection = Some(p);
            }
            Some(filter) => {
                filter.update_template(pyramid)?;
                let p = compute_projection(filter.template(), dims)?;
                filter.resolve_compressed(pyramid, &p)?;
                self.projection = Some(p);
            }
        }
        Ok(())
    }

    /// Raw scores over the `N` scale samples.
    pub fn scores(&self, pyramid: &FeatureMap) -> Result<Vec<f64>> {
        let (filter, p) = match (&self.filter, &self.projection) {
            (Some(f), Some(p)) => (f, p),
            _ => return Err(Error::Untrained),
        };
        let zf = self.plan.forward(&p.project(pyramid)?)?;
        let r = self
            .plan
            .response(filter.numerator(), filter.denominator(), &zf, filter.lambda())?;
        Ok(r.data().to_vec())
    }

    /// Returns `(multiplier, s_max)` without changing the model.
    pub fn estimate(&self, pyramid: &FeatureMap) -> Result<(f64, f64)> {
        let scores = self.scores(pyramid)?;
        let interp = trig_interpolate(&scores, self.cfg.n_interp);
        let mut best = 0;
        for (i, &v) in interp.iter().enumerate() {
            if v > interp[best] {
                best = i;
            }
        }
        let half = (self.cfg.n_scales - 1) as f64 / 2.0;
        let exponent = -half + best as f64 * (2.0 * half) / (self.cfg.n_interp - 1) as f64;
        Ok((self.cfg.step.powf(exponent), interp[best]))
    }

    /// Estimates the scale change and folds it into `current_scale`.
    pub fn estimate_scale(&mut self, pyramid: &FeatureMap) -> Result<(f64, f64)> {
        let (mult, s_max) = self.estimate(pyramid)?;
        self.set_current_scale(self.current_scale * mult);
        Ok((mult, s_max))
    }
}
