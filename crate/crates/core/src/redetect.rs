//! Online passive-aggressive SVM over quantized color histograms, used to
//! search the whole frame when the long-term filter reports the target lost.

use crate::features::{color_bin, quantized_color_histogram, HistogramVector, HISTOGRAM_BINS};
use crate::imgproc::{extract_patch, BoundingBox, ImageBuffer};

/// Weight count: one per histogram bin plus the bias.
pub const SVM_DIMS: usize = HISTOGRAM_BINS + 1;

/// Translation factors of the two rings of negative samples.
pub const NEGATIVE_OFFSETS: [f64; 2] = [0.75, 1.0];
/// Negatives overlapping the target more than this are skipped.
pub const MAX_NEGATIVE_IOU: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: HistogramVector,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingBatch {
    pub samples: Vec<Sample>,
}

impl TrainingBatch {
    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.label == Label::Positive).count()
    }

    pub fn negatives(&self) -> usize {
        self.samples.len() - self.positives()
    }
}

/// Linear classifier `h` over `[histogram, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    weights: Vec<f64>,
    tau: f64,
}

impl Default for SvmModel {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl SvmModel {
    pub fn new(tau: f64) -> Self {
        Self {
            weights: vec![0.0; SVM_DIMS],
            tau,
        }
    }

    pub fn from_weights(weights: Vec<f64>, tau: f64) -> crate::Result<Self> {
        if weights.len() != SVM_DIMS {
            return Err(crate::Error::DimensionMismatch {
                expected: SVM_DIMS,
                actual: weights.len(),
            });
        }
        Ok(Self { weights, tau })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn bias(&self) -> f64 {
        self.weights[HISTOGRAM_BINS]
    }

    /// `<h, v>` for an already augmented vector.
    pub fn score_raw(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), SVM_DIMS);
        self.weights.iter().zip(v).map(|(w, x)| w * x).sum()
    }

    /// `<h, v>` with the bias folded in as a constant-1 feature.
    pub fn score(&self, v: &HistogramVector) -> f64 {
        let dot: f64 = self.weights[..HISTOGRAM_BINS]
            .iter()
            .zip(&v.bins)
            .map(|(w, x)| w * x)
            .sum();
        dot + self.bias()
    }

    pub fn hinge_loss(&self, v: &HistogramVector, label: Label) -> f64 {
        hinge_loss(self.score(v), label)
    }

    /// Passive-aggressive step on an augmented vector; returns the loss
    /// before the step.
    pub fn pa_update_raw(&mut self, v: &[f64], label: Label) -> f64 {
        let loss = hinge_loss(self.score_raw(v), label);
        if loss <= 0.0 {
            return 0.0;
        }
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let step = loss / (norm2 + 1.0 / (2.0 * self.tau));
        let c = label.sign();
        for (w, x) in self.weights.iter_mut().zip(v) {
            *w += step * c * x;
        }
        loss
    }

    pub fn pa_update(&mut self, v: &HistogramVector, label: Label) -> f64 {
        self.pa_update_raw(&augment(v), label)
    }

    /// One pass over the batch in order; returns the summed loss seen.
    pub fn train_epoch(&mut self, batch: &TrainingBatch) -> f64 {
        batch
            .samples
            .iter()
            .map(|s| self.pa_update(&s.features, s.label))
            .sum()
    }

    pub fn training_loss(&self, batch: &TrainingBatch) -> f64 {
        batch
            .samples
            .iter()
            .map(|s| self.hinge_loss(&s.features, s.label))
            .sum()
    }
}

/// `[histogram, 1]`.
pub fn augment(v: &HistogramVector) -> Vec<f64> {
    let mut out = Vec::with_capacity(SVM_DIMS);
    out.extend_from_slice(&v.bins);
    out.push(1.0);
    out
}

pub fn hinge_loss(score: f64, label: Label) -> f64 {
    (1.0 - label.sign() * score).max(0.0)
}

/// Histogram of the box's in-frame pixels at native resolution.
pub fn box_histogram(img: &ImageBuffer, bb: &BoundingBox) -> Option<HistogramVector> {
    let (x0, y0, x1, y1) = crate::imgproc::pixel_span(bb, img.width(), img.height())?;
    let mut counts = vec![0u32; HISTOGRAM_BINS];
    for y in y0..y1 {
        for x in x0..x1 {
            counts[color_bin(img.rgb(y, x))] += 1;
        }
    }
    Some(HistogramVector::from_counts(&counts))
}

/// One positive at `bb` and up to 16 translated negatives.
pub fn sample_batch(img: &ImageBuffer, bb: &BoundingBox) -> TrainingBatch {
    let mut samples = Vec::with_capacity(17);
    let positive = box_histogram(img, bb).unwrap_or_else(|| {
        let (w, h) = (bb.w.round().max(1.0) as usize, bb.h.round().max(1.0) as usize);
        quantized_color_histogram(&extract_patch(img, bb, 1.0, (w, h)))
    });
    samples.push(Sample {
        features: positive,
        label: Label::Positive,
    });
    const DIRECTIONS: [(f64, f64); 8] = [
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
        (-1.0, -1.0),
        (0.0, -1.0),
        (1.0, -1.0),
    ];
    for &f in &NEGATIVE_OFFSETS {
        for &(dx, dy) in &DIRECTIONS {
            let moved = BoundingBox::new(bb.x + dx * f * bb.w, bb.y + dy * f * bb.h, bb.w, bb.h);
            let Some(clipped) = moved.clip(img.width(), img.height()) else {
                continue;
            };
            if clipped.iou(bb) > MAX_NEGATIVE_IOU {
                continue;
            }
            if let Some(features) = box_histogram(img, &clipped) {
                samples.push(Sample {
                    features,
                    label: Label::Negative,
                });
            }
        }
    }
    TrainingBatch { samples }
}

/// Dense sliding-window search at a fixed size; returns the best window and
/// its raw score. Ties keep the first window in row-major order.
pub fn scan(img: &ImageBuffer, model: &SvmModel, size: (f64, f64)) -> (BoundingBox, f64) {
    let (w, h) = size;
    let (fw, fh) = (img.width() as f64, img.height() as f64);
    if w > fw || h > fh {
        let bb = BoundingBox::from_center(fw / 2.0, fh / 2.0, w, h);
        let score = box_histogram(img, &bb).map_or(model.bias(), |v| model.score(&v));
        return (bb, score);
    }
    // The score is linear in the histogram, so it equals the window mean of
    // the per-pixel bin weights plus the bias.
    let weights = &model.weights()[..HISTOGRAM_BINS];
    let iw = img.width() + 1;
    let mut integral = vec![0.0; iw * (img.height() + 1)];
    for y in 0..img.height() {
        let mut row = 0.0;
        for x in 0..img.width() {
            row += weights[color_bin(img.rgb(y, x))];
            integral[(y + 1) * iw + x + 1] = integral[y * iw + x + 1] + row;
        }
    }
    let step_x = (w / 10.0).max(1.0);
    let step_y = (h / 10.0).max(1.0);
    let mut best = (BoundingBox::new(0.0, 0.0, w, h), f64::NEG_INFINITY);
    let mut y = 0.0;
    while y + h <= fh + 1e-9 {
        let mut x = 0.0;
        while x + w <= fw + 1e-9 {
            let bb = BoundingBox::new(x, y, w, h);
            let score = match crate::imgproc::pixel_span(&bb, img.width(), img.height()) {
                Some((x0, y0, x1, y1)) => {
                    let sum = integral[y1 * iw + x1] - integral[y0 * iw + x1] - integral[y1 * iw + x0]
                        + integral[y0 * iw + x0];
                    sum / ((x1 - x0) * (y1 - y0)) as f64 + model.bias()
                }
                None => model.bias(),
            };
            if score > best.1 {
                best = (bb, score);
            }
            x += step_x;
        }
        y += step_y;
    }
    best
}
