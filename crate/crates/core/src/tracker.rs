//! Per-frame orchestration: enhancement gate, translation detection,
//! long-term confidence, re-detection, scale estimation, gated updates and
//! template re-matching.

use std::borrow::Cow;
use std::sync::Arc;

use crate::config::{EnhanceMode, RedetectCriterion, TrackerConfig};
use crate::dcf::{compute_projection, detect, Detection, LinearFilterModel, ProjectionMatrix};
use crate::enhance::{fast_enhance, should_enhance};
use crate::error::{Error, Result};
use crate::features::{extract_fused, ColorNameTable, FeatureMap, CELL_SIZE};
use crate::imgproc::{cosine_window, extract_patch, BoundingBox, ImageBuffer};
use crate::memory::{gate, long_term_confidence, ConfidenceHistory, ConfidenceReport, LongTermFilter};
use crate::redetect::{sample_batch, scan, SvmModel};
use crate::scale::ScaleModel;
use crate::spectral::{dft, gaussian_label, SpectralMap};

/// Smallest accepted target side in pixels.
pub const MIN_TARGET_SIDE: f64 = 4.0;

/// Sampling grid, window and label of one 2-D filter.
#[derive(Debug, Clone)]
pub struct FilterGeometry {
    padding: f64,
    grid: (usize, usize),
    window: FeatureMap,
    label: SpectralMap,
}

impl FilterGeometry {
    /// Grid for a `padding`-times enlarged target of `target = (w, h)`
    /// pixels, resampled so the cell count stays within the configured
    /// bounds.
    pub fn new(target: (f64, f64), padding: f64, cfg: &TrackerConfig) -> Self {
        let cell = CELL_SIZE as f64;
        let n0 = (padding * target.0 / cell).max(1.0);
        let m0 = (padding * target.1 / cell).max(1.0);
        let mut factor = 1.0;
        if m0 * n0 > cfg.max_template_cells as f64 {
            factor = (m0 * n0 / cfg.max_template_cells as f64).sqrt();
        }
        let min_side = cfg.min_template_side as f64;
        if m0.min(n0) / factor < min_side {
            factor = m0.min(n0) / min_side;
        }
        let m = ((m0 / factor).round() as usize).max(cfg.min_template_side);
        let n = ((n0 / factor).round() as usize).max(cfg.min_template_side);
        let sigma = cfg.sigma_factor * ((m * n) as f64).sqrt() / padding;
        Self {
            padding,
            grid: (m, n),
            window: cosine_window(m, n),
            label: dft(&gaussian_label(m, n, sigma)),
        }
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn label(&self) -> &SpectralMap {
        &self.label
    }

    /// Patch size `(w, h)` in pixels handed to the feature extractor.
    pub fn patch_size(&self) -> (usize, usize) {
        (self.grid.1 * CELL_SIZE, self.grid.0 * CELL_SIZE)
    }

    /// Frame pixels per cell `(x, y)` for a target of `size`.
    pub fn cell_extent(&self, size: (f64, f64)) -> (f64, f64) {
        (
            self.padding * size.0 / self.grid.1 as f64,
            self.padding * size.1 / self.grid.0 as f64,
        )
    }

    pub fn sample(
        &self,
        img: &ImageBuffer,
        center: (f64, f64),
        size: (f64, f64),
        table: &ColorNameTable,
    ) -> Result<FeatureMap> {
        let bb = BoundingBox::from_center(center.0, center.1, size.0, size.1);
        let patch = extract_patch(img, &bb, self.padding, self.patch_size());
        extract_fused(&patch, table, &self.window)
    }
}

/// Applies the enhancement gate for the box of the previous frame.
pub fn prepare_frame<'a>(
    frame: &'a ImageBuffer,
    bb: &BoundingBox,
    cfg: &TrackerConfig,
) -> (Cow<'a, ImageBuffer>, bool) {
    let enhance = match cfg.enhance_mode {
        EnhanceMode::Off => false,
        EnhanceMode::On => true,
        EnhanceMode::Auto => should_enhance(frame, Some(bb), &cfg.enhance),
    };
    if enhance {
        (Cow::Owned(fast_enhance(frame, Some(bb), &cfg.enhance)), true)
    } else {
        (Cow::Borrowed(frame), false)
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    table: Arc<ColorNameTable>,
    frame_index: usize,
    center: (f64, f64),
    frame_size: (usize, usize),
    translation: FilterGeometry,
    filter: LinearFilterModel,
    projection: ProjectionMatrix,
    initial_template: FeatureMap,
    long_geometry: FilterGeometry,
    long_term: LongTermFilter,
    initial_long_term: LongTermFilter,
    scale: ScaleModel,
    svm: SvmModel,
    history: ConfidenceHistory,
    last_report: ConfidenceReport,
}

impl Tracker {
    /// Trains every model on the first frame. `frame_index` becomes 1.
    pub fn init(frame: &ImageBuffer, bb: BoundingBox, cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let table = match &cfg.color_names {
            Some(path) => Arc::new(ColorNameTable::load(path)?),
            None => ColorNameTable::builtin(),
        };
        Self::init_with_table(frame, bb, cfg, table)
    }

    pub fn init_with_table(
        frame: &ImageBuffer,
        bb: BoundingBox,
        cfg: TrackerConfig,
        table: Arc<ColorNameTable>,
    ) -> Result<Self> {
        let degenerate = Error::DegenerateBox { w: bb.w, h: bb.h };
        let bb = bb.clip(frame.width(), frame.height()).ok_or(degenerate)?;
        if bb.w < MIN_TARGET_SIDE || bb.h < MIN_TARGET_SIDE {
            return Err(Error::DegenerateBox { w: bb.w, h: bb.h });
        }
        let (frame, enhanced) = prepare_frame(frame, &bb, &cfg);
        let frame = frame.as_ref();
        let center = bb.center();
        let size = (bb.w, bb.h);

        let translation = FilterGeometry::new(size, cfg.padding, &cfg);
        let x = translation.sample(frame, center, size, &table)?;
        let projection = compute_projection(&x, cfg.dims.min(x.channels()))?;
        let filter = LinearFilterModel::train_compressed(&x, translation.label(), &projection, cfg.lambda, cfg.eta)?;

        let long_geometry = FilterGeometry::new(size, 1.0, &cfg);
        let xl = long_geometry.sample(frame, center, size, &table)?;
        let mut long_term = LongTermFilter::new(long_geometry.label().clone(), cfg.lambda, cfg.eta_long);
        long_term.train(&xl, &compute_projection(&xl, cfg.dims.min(xl.channels()))?)?;

        let mut scale_cfg = cfg.scale.clone();
        scale_cfg.lambda = cfg.lambda;
        scale_cfg.eta = cfg.eta;
        let mut scale = ScaleModel::new(scale_cfg, size)?;
        scale.update_scale(&scale.build_scale_pyramid(frame, center))?;

        let mut svm = SvmModel::new(cfg.svm_tau);
        svm.train_epoch(&sample_batch(frame, &bb));

        Ok(Self {
            frame_size: (frame.width(), frame.height()),
            initial_template: x,
            initial_long_term: long_term.clone(),
            last_report: ConfidenceReport {
                enhanced,
                ..Default::default()
            },
            cfg,
            table,
            frame_index: 1,
            center,
            translation,
            filter,
            projection,
            long_geometry,
            long_term,
            scale,
            svm,
            history: ConfidenceHistory::default(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn current_scale(&self) -> f64 {
        self.scale.current_scale()
    }

    pub fn target_size(&self) -> (f64, f64) {
        self.scale.target_size()
    }

    pub fn bbox(&self) -> BoundingBox {
        let (w, h) = self.target_size();
        BoundingBox::from_center(self.center.0, self.center.1, w, h)
    }

    pub fn filter(&self) -> &LinearFilterModel {
        &self.filter
    }

    pub fn projection(&self) -> &ProjectionMatrix {
        &self.projection
    }

    pub fn long_term(&self) -> &LongTermFilter {
        &self.long_term
    }

    pub fn scale_model(&self) -> &ScaleModel {
        &self.scale
    }

    pub fn svm(&self) -> &SvmModel {
        &self.svm
    }

    pub fn translation_geometry(&self) -> &FilterGeometry {
        &self.translation
    }

    pub fn history(&self) -> &ConfidenceHistory {
        &self.history
    }

    pub fn last_report(&self) -> &ConfidenceReport {
        &self.last_report
    }

    /// Translation detection around `center` at the current scale; returns
    /// the displaced center and the detection.
    pub fn detect_at(&self, frame: &ImageBuffer, center: (f64, f64)) -> Result<((f64, f64), Detection)> {
        let size = self.target_size();
        let z = self.translation.sample(frame, center, size, &self.table)?;
        let det = detect(&self.filter, &self.projection, &z)?;
        let (ex, ey) = self.translation.cell_extent(size);
        let moved = self.clamp_center((center.0 + det.peak.1 * ex, center.1 + det.peak.0 * ey));
        Ok((moved, det))
    }

    fn long_confidence(&self, frame: &ImageBuffer, center: (f64, f64)) -> Result<f64> {
        let z = self
            .long_geometry
            .sample(frame, center, self.target_size(), &self.table)?;
        long_term_confidence(&self.long_term, &z)
    }

    fn clamp_center(&self, c: (f64, f64)) -> (f64, f64) {
        (
            c.0.clamp(0.0, self.frame_size.0 as f64),
            c.1.clamp(0.0, self.frame_size.1 as f64),
        )
    }

    fn is_update_frame(&self) -> bool {
        self.frame_index.is_multiple_of(self.cfg.update_interval)
    }

    pub fn step(&mut self, frame: &ImageBuffer) -> Result<(BoundingBox, ConfidenceReport)> {
        self.frame_index += 1;
        let previous = self.bbox();
        let (frame, enhanced) = prepare_frame(frame, &previous, &self.cfg);
        let frame = frame.as_ref();

        let (mut center, mut det) = self.detect_at(frame, self.center)?;
        let mut c_long = self.long_confidence(frame, center)?;

        let mut redetected = false;
        if c_long < self.cfg.gate.t_r {
            let (candidate, score) = scan(frame, &self.svm, self.target_size());
            let cand_center = self.clamp_center(candidate.center());
            let accept = match self.cfg.redetect {
                RedetectCriterion::LongTerm => self.long_confidence(frame, cand_center)? >= self.cfg.gate.t_a,
                RedetectCriterion::SvmMargin => score > 0.0,
            };
            if accept {
                let (refined, refined_det) = self.detect_at(frame, cand_center)?;
                center = refined;
                det = refined_det;
                c_long = self.long_confidence(frame, center)?;
                redetected = true;
                log::debug!("frame {}: re-detected at {:?}", self.frame_index, center);
            }
        }
        self.center = center;

        let pyramid = self.scale.build_scale_pyramid(frame, center);
        self.scale.estimate_scale(&pyramid)?;

        let mut report = ConfidenceReport::from_response(&det.response, det.r_max);
        report.c_long = c_long;
        report.enhanced = enhanced;
        report.redetected = redetected;
        report.gates = gate(&report, &self.history, &self.cfg.gate);
        if report.gates.update_ok {
            self.history.push(report.r_max, report.quality(self.cfg.gate.metric));
        }

        let size = self.target_size();
        let x = self.translation.sample(frame, center, size, &self.table)?;
        self.filter.update_template(&x)?;
        if self.is_update_frame() && report.gates.update_ok {
            self.projection = compute_projection(self.filter.template(), self.cfg.dims.min(x.channels()))?;
            self.filter.resolve_compressed(&x, &self.projection)?;
            self.scale.update_scale(&self.scale.build_scale_pyramid(frame, center))?;
            self.svm.train_epoch(&sample_batch(frame, &self.bbox()));
            if let Some(template) = self.long_term.template() {
                let xl = self.long_geometry.sample(frame, center, size, &self.table)?;
                let p = compute_projection(template, self.cfg.dims.min(xl.channels()))?;
                self.long_term.update_long_term(&xl, &p, c_long, self.cfg.gate.t_a)?;
            }
        }

        if self.frame_index.is_multiple_of(self.cfg.rematch_interval) {
            self.rematch()?;
        }

        self.last_report = report;
        Ok((self.bbox(), report))
    }

    /// Compares the current long-term template with the first frame's and
    /// pulls both templates back towards the first frame when they drifted.
    fn rematch(&mut self) -> Result<()> {
        let Some(current) = self.long_term.template() else {
            return Ok(());
        };
        let similarity = long_term_confidence(&self.initial_long_term, current)?;
        if similarity < self.cfg.gate.t_a {
            log::debug!("frame {}: re-matching templates ({similarity:.3})", self.frame_index);
            self.filter.blend_template(&self.initial_template, self.cfg.eta)?;
            if let Some(initial) = self.initial_long_term.template() {
                let initial = initial.clone();
                self.long_term.blend_template(&initial, self.cfg.eta)?;
            }
        }
        Ok(())
    }
}
