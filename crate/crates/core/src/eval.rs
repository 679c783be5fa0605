//! Benchmark metrics and the OPE/TRE protocols.

use std::borrow::Cow;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::imgproc::{load_sequence, BoundingBox, ImageBuffer, SequenceHandle};
use crate::synth::SynthSequence;
use crate::tracker::Tracker;

pub const TRE_SEGMENTS: usize = 20;
pub const DP_THRESHOLD: f64 = 20.0;

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}

pub fn center_error(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

fn usable_truth(b: &BoundingBox) -> bool {
    b.is_valid()
}

/// Predictions of one run aligned with ground truth. Frames whose ground
/// truth is missing or non-positive are kept but excluded from the curves.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    pub name: String,
    pub start: usize,
    pub predictions: Vec<BoundingBox>,
    pub ground_truth: Vec<BoundingBox>,
    pub timings: Vec<Duration>,
    pub center_errors: Vec<f64>,
    pub ious: Vec<f64>,
}

impl SequenceResult {
    pub fn new(
        name: impl Into<String>,
        start: usize,
        predictions: Vec<BoundingBox>,
        ground_truth: Vec<BoundingBox>,
        timings: Vec<Duration>,
    ) -> Result<Self> {
        let n = predictions.len();
        for len in [ground_truth.len(), timings.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len });
            }
        }
        let (center_errors, ious) = predictions
            .iter()
            .zip(&ground_truth)
            .map(|(p, g)| {
                if usable_truth(g) {
                    (center_error(p, g), iou(p, g))
                } else {
                    (f64::NAN, f64::NAN)
                }
            })
            .unzip();
        Ok(Self {
            name: name.into(),
            start,
            predictions,
            ground_truth,
            timings,
            center_errors,
            ious,
        })
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

/// Rates sampled at increasing thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveData {
    pub thresholds: Vec<f64>,
    pub rates: Vec<f64>,
}

impl CurveData {
    /// Mean of the sampled rates.
    pub fn auc(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len() as f64
    }

    pub fn rate_at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| (t - threshold).abs() < 1e-12)
            .map(|i| self.rates[i])
    }

    /// Precision at 20 px; `None` for curves without that threshold.
    pub fn dp20(&self) -> Option<f64> {
        self.rate_at(DP_THRESHOLD)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("threshold,rate\n");
        for (t, r) in self.thresholds.iter().zip(&self.rates) {
            out.push_str(&format!("{t},{r:.6}\n"));
        }
        out
    }
}

fn pooled(results: &[SequenceResult], values: fn(&SequenceResult) -> &[f64]) -> Result<Vec<f64>> {
    let v: Vec<f64> = results
        .iter()
        .flat_map(|r| values(r).iter().copied())
        .filter(|x| !x.is_nan())
        .collect();
    if v.is_empty() {
        return Err(Error::InvalidArgument("no frames with usable ground truth".into()));
    }
    Ok(v)
}

fn curve(samples: &[f64], thresholds: Vec<f64>, hit: impl Fn(f64, f64) -> bool) -> CurveData {
    let n = samples.len() as f64;
    let rates = thresholds
        .iter()
        .map(|&t| samples.iter().filter(|&&s| hit(s, t)).count() as f64 / n)
        .collect();
    CurveData { thresholds, rates }
}

/// Fraction of frames with center error `<= t` for `t = 0..=50` px, pooled
/// over every frame of `results`.
pub fn precision_curve(results: &[SequenceResult]) -> Result<CurveData> {
    let errors = pooled(results, |r| &r.center_errors)?;
    Ok(curve(&errors, (0..=50).map(f64::from).collect(), |e, t| e <= t))
}

/// Fraction of frames with IoU strictly above each of the 21 thresholds
/// `0, 0.05, ..., 1`.
pub fn success_curve(results: &[SequenceResult]) -> Result<CurveData> {
    success_curve_at(results, &(0..=20).map(|i| i as f64 / 20.0).collect::<Vec<_>>())
}

pub fn success_curve_at(results: &[SequenceResult], thresholds: &[f64]) -> Result<CurveData> {
    let overlaps = pooled(results, |r| &r.ious)?;
    Ok(curve(&overlaps, thresholds.to_vec(), |o, t| o > t))
}

/// Frames per second of tracker time.
pub fn measure_fps(results: &[SequenceResult]) -> Result<f64> {
    let frames: usize = results.iter().map(SequenceResult::len).sum();
    let total: Duration = results.iter().flat_map(|r| r.timings.iter()).sum();
    if frames == 0 {
        return Err(Error::InvalidArgument("no timed frames".into()));
    }
    Ok(frames as f64 / total.as_secs_f64().max(f64::MIN_POSITIVE))
}

/// Frames plus ground truth, wherever they come from.
pub trait FrameSource: Sync {
    fn name(&self) -> &str;
    fn len(&self) -> usize;
    fn frame(&self, index: usize) -> Result<Cow<'_, ImageBuffer>>;
    fn ground_truth(&self) -> Option<&[BoundingBox]>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FrameSource for SequenceHandle {
    fn name(&self) -> &str {
        &self.name
    }

    fn len(&self) -> usize {
        SequenceHandle::len(self)
    }

    fn frame(&self, index: usize) -> Result<Cow<'_, ImageBuffer>> {
        SequenceHandle::frame(self, index).map(Cow::Owned)
    }

    fn ground_truth(&self) -> Option<&[BoundingBox]> {
        self.ground_truth.as_deref()
    }
}

impl FrameSource for SynthSequence {
    fn name(&self) -> &str {
        match self.kind {
            crate::synth::SynthKind::Translate => "translate",
            crate::synth::SynthKind::Scale => "scale",
            crate::synth::SynthKind::Darken => "darken",
        }
    }

    fn len(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<Cow<'_, ImageBuffer>> {
        Ok(Cow::Borrowed(&self.frames[index]))
    }

    fn ground_truth(&self) -> Option<&[BoundingBox]> {
        Some(&self.ground_truth)
    }
}

/// Anything that emits one box per frame after initialization.
pub trait Track {
    fn track(&mut self, frame: &ImageBuffer) -> Result<BoundingBox>;
}

impl Track for Tracker {
    fn track(&mut self, frame: &ImageBuffer) -> Result<BoundingBox> {
        self.step(frame).map(|(bb, _)| bb)
    }
}

/// Runs from `start` to the end of `src`. `make` builds a tracker from the
/// start frame and its ground truth; its time counts towards frame `start`.
pub fn run_segment_with<T: Track>(
    src: &dyn FrameSource,
    start: usize,
    mut make: impl FnMut(&ImageBuffer, BoundingBox) -> Result<T>,
) -> Result<SequenceResult> {
    let gt = src
        .ground_truth()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no ground truth", src.name())))?;
    if start >= src.len() {
        return Err(Error::InvalidArgument(format!("start frame {start} beyond {}", src.len())));
    }
    let init_box = gt[start];
    let first = src.frame(start)?;
    let clock = Instant::now();
    let mut tracker = make(&first, init_box)?;
    let mut timings = vec![clock.elapsed()];
    let mut predictions = vec![init_box];
    for k in start + 1..src.len() {
        let frame = src.frame(k)?;
        let clock = Instant::now();
        let bb = tracker.track(&frame)?;
        timings.push(clock.elapsed());
        predictions.push(bb);
    }
    SequenceResult::new(src.name(), start, predictions, gt[start..].to_vec(), timings)
}

pub fn run_segment(src: &dyn FrameSource, start: usize, cfg: &TrackerConfig) -> Result<SequenceResult> {
    run_segment_with(src, start, |frame, bb| Tracker::init(frame, bb, cfg.clone()))
}

/// One pass from the first frame.
pub fn run_ope(src: &dyn FrameSource, cfg: &TrackerConfig) -> Result<SequenceResult> {
    run_segment(src, first_usable(src, 0)?, cfg)
}

fn first_usable(src: &dyn FrameSource, from: usize) -> Result<usize> {
    let gt = src
        .ground_truth()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no ground truth", src.name())))?;
    (from..gt.len())
        .find(|&k| usable_truth(&gt[k]))
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no usable ground truth", src.name())))
}

/// Evenly spaced start frames: `segments` of them, or one per frame for
/// shorter sequences.
pub fn tre_starts(len: usize, segments: usize) -> Vec<usize> {
    let count = segments.min(len);
    (0..count).map(|i| i * len / count).collect()
}

/// Temporal robustness: one run per start frame, each to the end.
pub fn run_tre(src: &dyn FrameSource, cfg: &TrackerConfig, segments: usize) -> Result<Vec<SequenceResult>> {
    let mut starts: Vec<usize> = tre_starts(src.len(), segments)
        .into_iter()
        .filter_map(|s| first_usable(src, s).ok())
        .collect();
    starts.dedup();
    starts.into_iter().map(|s| run_segment(src, s, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Ope,
    Tre,
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ope" => Ok(EvalMode::Ope),
            "tre" => Ok(EvalMode::Tre),
            other => Err(Error::Parse(format!("unknown evaluation mode {other:?}"))),
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Ope => "ope",
            EvalMode::Tre => "tre",
        })
    }
}

pub fn run_mode(src: &dyn FrameSource, cfg: &TrackerConfig, mode: EvalMode) -> Result<Vec<SequenceResult>> {
    match mode {
        EvalMode::Ope => run_ope(src, cfg).map(|r| vec![r]),
        EvalMode::Tre => run_tre(src, cfg, TRE_SEGMENTS),
    }
}

/// Scalar summary of a set of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub name: String,
    pub frames: usize,
    pub dp20: f64,
    pub auc: f64,
    pub fps: f64,
}

impl Summary {
    pub fn of(name: impl Into<String>, results: &[SequenceResult]) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            frames: results.iter().map(SequenceResult::len).sum(),
            dp20: precision_curve(results)?.dp20().unwrap_or(f64::NAN),
            auc: success_curve(results)?.auc(),
            fps: measure_fps(results)?,
        })
    }
}

/// Results of a whole dataset in one mode.
#[derive(Debug, Clone)]
pub struct DatasetReport {
    pub mode: EvalMode,
    pub sequences: Vec<(String, Vec<SequenceResult>)>,
}

impl DatasetReport {
    pub fn all_results(&self) -> Vec<SequenceResult> {
        self.sequences.iter().flat_map(|(_, r)| r.iter().cloned()).collect()
    }

    pub fn summaries(&self) -> Result<Vec<Summary>> {
        let mut rows = self
            .sequences
            .iter()
            .map(|(name, r)| Summary::of(name.clone(), r))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Summary::of("ALL", &self.all_results())?);
        Ok(rows)
    }

    /// Summary table (AUC in [0, 1] and as a percentage).
    pub fn summary_table(&self) -> Result<String> {
        let mut out = String::from("sequence,frames,dp20,auc,auc_pct,fps\n");
        for s in self.summaries()? {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:.1},{:.2}\n",
                s.name,
                s.frames,
                s.dp20,
                s.auc,
                100.0 * s.auc,
                s.fps
            ));
        }
        Ok(out)
    }

    /// Writes `<mode>_summary.csv`, `<mode>_precision.txt` and
    /// `<mode>_success.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let all = self.all_results();
        let files = [
            (format!("{}_summary.csv", self.mode), self.summary_table()?),
            (format!("{}_precision.txt", self.mode), precision_curve(&all)?.to_text()),
            (format!("{}_success.txt", self.mode), success_curve(&all)?.to_text()),
        ];
        let mut written = Vec::new();
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Sequence directories (those containing `img/`) under `dir`, sorted.
pub fn discover_sequences(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_path_buf()));
    }
    let mut seqs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("img").is_dir())
        .collect();
    seqs.sort();
    if seqs.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    Ok(seqs)
}

/// Evaluates every sequence under `dir` in parallel. Sequences without
/// ground truth are skipped with a warning.
pub fn evaluate_dataset(dir: &Path, cfg: &TrackerConfig, mode: EvalMode) -> Result<DatasetReport> {
    let seqs = discover_sequences(dir)?
        .iter()
        .map(|p| load_sequence(p, cfg.one_based))
        .collect::<Result<Vec<_>>>()?;
    let with_truth: Vec<SequenceHandle> = seqs
        .into_iter()
        .filter(|s| {
            let ok = s.ground_truth.is_some();
            if !ok {
                log::warn!("{}: no ground truth, skipped", s.name);
            }
            ok
        })
        .collect();
    let sequences = with_truth
        .par_iter()
        .map(|s| run_mode(s, cfg, mode).map(|r| (s.name.clone(), r)))
        .collect::<Result<Vec<_>>>()?;
    if sequences.is_empty() {
        return Err(Error::InvalidArgument(format!("no sequence under {} has ground truth", dir.display())));
    }
    Ok(DatasetReport { mode, sequences })
}
