//! Response-quality measures, the confidence gates that decide when models
//! may learn, and the conservatively updated long-term filter.

use crate::dcf::{LinearFilterModel, ProjectionMatrix};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::spectral::{ResponseMap, SpectralMap};

/// Average peak-to-correlation energy. Constant maps score 0.
pub fn apce(r: &ResponseMap) -> f64 {
    let max = r.max();
    let min = r.min();
    if max == min {
        return 0.0;
    }
    let n = r.data().len() as f64;
    let energy: f64 = r.data().iter().map(|v| (v - min).powi(2)).sum::<f64>() / n;
    if energy == 0.0 {
        return 0.0;
    }
    (max - min).powi(2) / energy
}

/// Confidence of the squared response map: APCE's form with every value
/// replaced by its square (`R_max^2`, `R_min^2` taken from the raw extrema).
pub fn csrm(r: &ResponseMap) -> f64 {
    let max2 = r.max().powi(2);
    let min2 = r.min().powi(2);
    let n = r.data().len() as f64;
    let energy: f64 = r.data().iter().map(|v| (v * v - min2).powi(2)).sum::<f64>() / n;
    if energy == 0.0 {
        return 0.0;
    }
    (max2 - min2).powi(2) / energy
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QualityMetric {
    #[default]
    Apce,
    Csrm,
}

impl std::str::FromStr for QualityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "apce" => Ok(Self::Apce),
            "csrm" | "csr" => Ok(Self::Csrm),
            other => Err(Error::Config(format!("unknown quality metric {other:?}"))),
        }
    }
}

impl std::fmt::Display for QualityMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Apce => "apce",
            Self::Csrm => "csrm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateConfig {
    /// Fraction of the historical mean peak required to learn.
    pub response_factor: f64,
    /// Fraction of the historical mean quality required to learn.
    pub quality_factor: f64,
    pub metric: QualityMetric,
    /// Re-detection trigger on the long-term confidence.
    pub t_r: f64,
    /// Acceptance threshold for candidates and long-term learning.
    pub t_a: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            response_factor: 0.9,
            quality_factor: 0.75,
            metric: QualityMetric::Apce,
            t_r: 0.2,
            t_a: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Gates {
    pub update_ok: bool,
    pub redetect_needed: bool,
    pub accept_candidate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConfidenceReport {
    pub r_max: f64,
    pub apce: f64,
    pub csrm: f64,
    pub c_long: f64,
    pub gates: Gates,
    /// The frame was enhanced before tracking.
    pub enhanced: bool,
    /// A re-detection candidate replaced the filter's position.
    pub redetected: bool,
}

impl ConfidenceReport {
    pub fn from_response(r: &ResponseMap, r_max: f64) -> Self {
        Self {
            r_max,
            apce: apce(r),
            csrm: csrm(r),
            ..Self::default()
        }
    }

    pub fn quality(&self, metric: QualityMetric) -> f64 {
        match metric {
            QualityMetric::Apce => self.apce,
            QualityMetric::Csrm => self.csrm,
        }
    }
}

/// Running means of peak and quality over frames that passed the gate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConfidenceHistory {
    sum_r_max: f64,
    sum_quality: f64,
    count: usize,
}

impl ConfidenceHistory {
    pub fn push(&mut self, r_max: f64, quality: f64) {
        self.sum_r_max += r_max;
        self.sum_quality += quality;
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean_r_max(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_r_max / self.count as f64)
    }

    pub fn mean_quality(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_quality / self.count as f64)
    }
}

pub fn gate(report: &ConfidenceReport, hist: &ConfidenceHistory, cfg: &GateConfig) -> Gates {
    let update_ok = match (hist.mean_r_max(), hist.mean_quality()) {
        (Some(mr), Some(mq)) => {
            report.r_max >= cfg.response_factor * mr && report.quality(cfg.metric) >= cfg.quality_factor * mq
        }
        _ => true,
    };
    Gates {
        update_ok,
        redetect_needed: report.c_long < cfg.t_r,
        accept_candidate: report.c_long >= cfg.t_a,
    }
}

/// Target-sized filter trained on channel-compressed samples; its peak
/// response is the long-term confidence.
#[derive(Debug, Clone)]
pub struct LongTermFilter {
    label: SpectralMap,
    lambda: f64,
    eta: f64,
    model: Option<LinearFilterModel>,
    projection: Option<ProjectionMatrix>,
}

impl LongTermFilter {
    pub fn new(label: SpectralMap, lambda: f64, eta: f64) -> Self {
        Self {
            label,
            lambda,
            eta,
            model: None,
            projection: None,
        }
    }

    pub fn train(&mut self, x: &FeatureMap, projection: &ProjectionMatrix) -> Result<()> {
        self.model = Some(LinearFilterModel::train_compressed(
            x,
            &self.label,
            projection,
            self.lambda,
            self.eta,
        )?);
        self.projection = Some(projection.clone());
        Ok(())
    }

    pub fn is_trained(&self) -> bool {
        self.model.is_some()
    }

    pub fn model(&self) -> Option<&LinearFilterModel> {
        self.model.as_ref()
    }

    pub fn projection(&self) -> Option<&ProjectionMatrix> {
        self.projection.as_ref()
    }

    pub fn template(&self) -> Option<&FeatureMap> {
        self.model.as_ref().map(|m| m.template())
    }

    pub fn response(&self, z: &FeatureMap) -> Result<ResponseMap> {
        let (model, p) = match (&self.model, &self.projection) {
            (Some(m), Some(p)) => (m, p),
            _ => return Err(Error::Untrained),
        };
        Ok(crate::dcf::detect(model, p, z)?.response)
    }

    /// Blends an external template (e.g. an initial snapshot) into the
    /// stored one without touching the filter.
    pub fn blend_template(&mut self, x: &FeatureMap, weight: f64) -> Result<()> {
        match self.model.as_mut() {
            Some(m) => m.blend_template(x, weight),
            None => Err(Error::Untrained),
        }
    }

    /// Applies the running update only when `c_long >= t_a`; returns whether
    /// the filter changed.
    pub fn update_long_term(
        &mut self,
        x: &FeatureMap,
        projection: &ProjectionMatrix,
        c_long: f64,
        t_a: f64,
    ) -> Result<bool> {
        if c_long < t_a {
            return Ok(false);
        }
        let model = self.model.as_mut().ok_or(Error::Untrained)?;
        model.update_template(x)?;
        model.resolve_compressed(x, projection)?;
        self.projection = Some(projection.clone());
        Ok(true)
    }
}

/// Peak of the long-term filter's response on `z`.
pub fn long_term_confidence(f: &LongTermFilter, z: &FeatureMap) -> Result<f64> {
    Ok(f.response(z)?.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcf::compute_projection;
    use crate::spectral::{dft, gaussian_label};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(rows: usize, cols: usize, data: Vec<f64>) -> ResponseMap {
        ResponseMap::from_vec(rows, cols, data).unwrap()
    }

    fn naive_apce(r: &[Vec<f64>]) -> f64 {
        let mut max = f64::MIN;
        let mut min = f64::MAX;
        for row in r {
            for &v in row {
                max = max.max(v);
                min = min.min(v);
            }
        }
        let mut s = 0.0;
        let mut n = 0.0;
        for row in r {
            for &v in row {
                s += (v - min) * (v - min);
                n += 1.0;
            }
        }
        (max - min).abs().powi(2) / (s / n)
    }

    #[test]
    fn single_peak_scores_sixteen() {
        let mut d = vec![0.0; 16];
        d[5] = 1.0;
        let r = map(4, 4, d);
        assert_eq!(apce(&r), 16.0);
        assert_eq!(csrm(&r), 16.0);
    }

    #[test]
    fn constant_maps_score_zero() {
        let r = map(3, 3, vec![0.7; 9]);
        assert_eq!(apce(&r), 0.0);
        assert_eq!(csrm(&r), 0.0);
        let z = map(3, 3, vec![0.0; 9]);
        assert_eq!(apce(&z), 0.0);
        assert_eq!(csrm(&z), 0.0);
    }

    #[test]
    fn apce_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..8).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let r = map(8, 8, rows.concat());
        assert!((apce(&r) - naive_apce(&rows)).abs() < 1e-10 * naive_apce(&rows).max(1.0));
    }

    #[test]
    fn apce_shift_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d: Vec<f64> = (0..36).map(|_| rng.random_range(0.0..1.0)).collect();
        let base = apce(&map(6, 6, d.clone()));
        let shifted = apce(&map(6, 6, d.iter().map(|v| v + 3.0).collect()));
        let scaled = apce(&map(6, 6, d.iter().map(|v| v * 4.5).collect()));
        assert!((base - shifted).abs() < 1e-9 * base);
        assert!((base - scaled).abs() < 1e-9 * base);
        let c = csrm(&map(6, 6, d.clone()));
        let c_scaled = csrm(&map(6, 6, d.iter().map(|v| v * 4.5).collect()));
        assert!((c - c_scaled).abs() < 1e-9 * c);
    }

    #[test]
    fn csrm_equals_apce_of_squares_for_nonnegative_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..2.0)).collect();
        let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
        let a = csrm(&map(5, 5, d));
        let b = apce(&map(5, 5, sq));
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn gate_rules() {
        let cfg = GateConfig::default();
        let hist = ConfidenceHistory::default();
        let report = ConfidenceReport {
            r_max: 0.01,
            apce: 0.1,
            c_long: 0.1,
            ..Default::default()
        };
        let g = gate(&report, &hist, &cfg);
        assert!(g.update_ok);
        assert!(g.redetect_needed);
        assert!(!g.accept_candidate);

        let candidate = ConfidenceReport {
            c_long: 0.5,
            ..Default::default()
        };
        assert!(gate(&candidate, &hist, &cfg).accept_candidate);

        let mut hist = ConfidenceHistory::default();
        hist.push(1.0, 20.0);
        let ok = ConfidenceReport {
            r_max: 0.9,
            apce: 15.0,
            c_long: 0.2,
            ..Default::default()
        };
        let g = gate(&ok, &hist, &cfg);
        assert!(g.update_ok);
        assert!(!g.redetect_needed);
        let weak = ConfidenceReport {
            apce: 14.9,
            ..ok
        };
        assert!(!gate(&weak, &hist, &cfg).update_ok);
        let low_peak = ConfidenceReport {
            r_max: 0.89,
            ..ok
        };
        assert!(!gate(&low_peak, &hist, &cfg).update_ok);
    }

    fn random_map(rng: &mut ChaCha8Rng, m: usize, n: usize, d: usize) -> FeatureMap {
        let data = (0..m * n * d).map(|_| rng.random_range(0.0..1.0)).collect();
        FeatureMap::from_vec(m, n, d, data).unwrap()
    }

    fn windowed(rng: &mut ChaCha8Rng) -> FeatureMap {
        let mut x = random_map(rng, 10, 10, 6);
        let w = crate::imgproc::cosine_window(10, 10);
        for c in 0..6 {
            for (v, wv) in x.channel_mut(c).iter_mut().zip(w.channel(0)) {
                *v *= wv;
            }
        }
        x
    }

    fn trained(seed: u64) -> (LongTermFilter, ProjectionMatrix, FeatureMap) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = windowed(&mut rng);
        let p = compute_projection(&x, 3).unwrap();
        let mut f = LongTermFilter::new(dft(&gaussian_label(10, 10, 1.0)), 0.01, 0.025);
        f.train(&x, &p).unwrap();
        (f, p, x)
    }

    #[test]
    fn self_confidence_is_high() {
        let (f, _, x) = trained(4);
        let c = long_term_confidence(&f, &x).unwrap();
        assert!((0.8..=1.0 + 1e-9).contains(&c), "c_long {c}");
        let z = FeatureMap::zeros(10, 10, 6);
        assert_eq!(long_term_confidence(&f, &z).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let noise = windowed(&mut rng);
        assert!(long_term_confidence(&f, &noise).unwrap() < c);
    }

    #[test]
    fn untrained_filter_errors() {
        let f = LongTermFilter::new(dft(&gaussian_label(4, 4, 1.0)), 0.01, 0.025);
        assert!(matches!(
            long_term_confidence(&f, &FeatureMap::zeros(4, 4, 2)),
            Err(Error::Untrained)
        ));
    }

    #[test]
    fn gate_below_threshold_leaves_filter_untouched() {
        let (mut f, p, _) = trained(5);
        let before = f.model().unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = windowed(&mut rng);
        assert!(!f.update_long_term(&x, &p, 0.39, 0.4).unwrap());
        assert_eq!(f.model().unwrap(), &before);
    }

    #[test]
    fn full_rate_update_retrains() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0 = windowed(&mut rng);
        let x1 = windowed(&mut rng);
        let p = compute_projection(&x0, 3).unwrap();
        let label = dft(&gaussian_label(10, 10, 1.0));
        let mut f = LongTermFilter::new(label.clone(), 0.01, 1.0);
        f.train(&x0, &p).unwrap();
        assert!(f.update_long_term(&x1, &p, 1.0, 0.4).unwrap());
        let mut fresh = LongTermFilter::new(label, 0.01, 1.0);
        fresh.train(&x1, &p).unwrap();
        assert_eq!(f.model().unwrap(), fresh.model().unwrap());
    }

    #[test]
    fn replay_of_passed_frames_matches() {
        let (mut f, p, _) = trained(8);
        let mut replay = f.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let frames: Vec<FeatureMap> = (0..6).map(|_| windowed(&mut rng)).collect();
        let confidences = [0.9, 0.1, 0.5, 0.39, 0.41, 0.0];
        for (x, &c) in frames.iter().zip(&confidences) {
            f.update_long_term(x, &p, c, 0.4).unwrap();
        }
        for (x, &c) in frames.iter().zip(&confidences) {
            if c >= 0.4 {
                replay.update_long_term(x, &p, 1.0, 0.4).unwrap();
            }
        }
        assert_eq!(f.model().unwrap(), replay.model().unwrap());
    }
}
