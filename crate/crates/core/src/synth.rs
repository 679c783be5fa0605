//! Deterministic synthetic sequences with known ground truth.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imgproc::{save_image, BoundingBox, ImageBuffer};

pub const FRAME_WIDTH: usize = 320;
pub const FRAME_HEIGHT: usize = 240;
pub const TARGET_SIDE: f64 = 40.0;
pub const GROWTH: f64 = 1.02;
pub const DARKEN_FACTOR: f64 = 0.1;
pub const DARKEN_AFTER: usize = 50;
pub const NOISE_SIGMA: f64 = 0.01;
const NOISE_SEED: u64 = 0x5eed;
const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Square moving 2 px per frame, 100 frames.
    Translate,
    /// Square growing by 1.02 per frame, 50 frames.
    Scale,
    /// Square drifting 1 px per frame; frames after 50 are dimmed to 10%
    /// and noise is added. 100 frames.
    Darken,
}

impl SynthKind {
    pub const ALL: [SynthKind; 3] = [SynthKind::Translate, SynthKind::Scale, SynthKind::Darken];

    pub fn frame_count(self) -> usize {
        match self {
            SynthKind::Translate | SynthKind::Darken => 100,
            SynthKind::Scale => 50,
        }
    }

    /// Ground-truth box of frame `k` (0-based).
    pub fn truth(self, k: usize) -> BoundingBox {
        let k = k as f64;
        match self {
            SynthKind::Translate => BoundingBox::from_center(60.0 + 2.0 * k, 120.0, TARGET_SIDE, TARGET_SIDE),
            SynthKind::Scale => {
                let side = TARGET_SIDE * GROWTH.powf(k);
                BoundingBox::from_center(160.0, 120.0, side, side)
            }
            SynthKind::Darken => BoundingBox::from_center(110.0 + k, 120.0, TARGET_SIDE, TARGET_SIDE),
        }
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translate" => Ok(SynthKind::Translate),
            "scale" => Ok(SynthKind::Scale),
            "darken" => Ok(SynthKind::Darken),
            other => Err(Error::Parse(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Translate => "translate",
            SynthKind::Scale => "scale",
            SynthKind::Darken => "darken",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub kind: SynthKind,
    pub frames: Vec<ImageBuffer>,
    pub ground_truth: Vec<BoundingBox>,
}

fn background(x: f64, y: f64) -> [f64; 3] {
    let (u, v) = (x / FRAME_WIDTH as f64, y / FRAME_HEIGHT as f64);
    let wave = 0.06 * (std::f64::consts::TAU * (1.5 * u + 0.7 * v)).sin();
    [0.35 + 0.15 * u + wave, 0.4 + 0.1 * v - wave, 0.5 - 0.1 * u]
}

/// Object appearance at normalized coordinates `(u, v)` in `[0, 1)^2`.
fn target(u: f64, v: f64) -> [f64; 3] {
    use std::f64::consts::TAU;
    [
        0.55 + 0.35 * (TAU * u).sin(),
        0.5 + 0.35 * (TAU * v).cos(),
        0.45 + 0.3 * (TAU * (u + v)).sin(),
    ]
}

/// Renders `bb` over the static background with supersampled edges.
pub fn render(bb: &BoundingBox) -> ImageBuffer {
    let mut img = ImageBuffer::new(FRAME_HEIGHT, FRAME_WIDTH, 3);
    let s = SUPERSAMPLE as f64;
    for y in 0..FRAME_HEIGHT {
        for x in 0..FRAME_WIDTH {
            let mut acc = [0.0; 3];
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let px = x as f64 + (sx as f64 + 0.5) / s;
                    let py = y as f64 + (sy as f64 + 0.5) / s;
                    let u = (px - bb.x) / bb.w;
                    let v = (py - bb.y) / bb.h;
                    let rgb = if (0.0..1.0).contains(&u) && (0.0..1.0).contains(&v) {
                        target(u, v)
                    } else {
                        background(px, py)
                    };
                    for c in 0..3 {
                        acc[c] += rgb[c];
                    }
                }
            }
            for c in 0..3 {
                img.set(y, x, c, acc[c] / (s * s));
            }
        }
    }
    img
}

pub fn generate(kind: SynthKind) -> SynthSequence {
    let ground_truth: Vec<BoundingBox> = (0..kind.frame_count()).map(|k| kind.truth(k)).collect();
    let mut frames: Vec<ImageBuffer> = ground_truth.iter().map(render).collect();
    if kind == SynthKind::Darken {
        let mut rng = ChaCha8Rng::seed_from_u64(NOISE_SEED);
        let noise = Normal::new(0.0, NOISE_SIGMA).expect("positive sigma");
        for (k, frame) in frames.iter_mut().enumerate() {
            let gain = if k >= DARKEN_AFTER { DARKEN_FACTOR } else { 1.0 };
            for v in frame.data_mut() {
                *v = (*v * gain + noise.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
    }
    SynthSequence {
        kind,
        frames,
        ground_truth,
    }
}

/// Writes `img/0001.png, ...` and a 1-based `groundtruth_rect.txt`.
pub fn write_sequence(seq: &SynthSequence, dir: &Path) -> Result<()> {
    let img_dir = dir.join("img");
    fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    for (k, frame) in seq.frames.iter().enumerate() {
        save_image(frame, &img_dir.join(format!("{:04}.png", k + 1)))?;
    }
    let gt: String = seq
        .ground_truth
        .iter()
        .map(|b| format!("{},{},{},{}\n", b.x + 1.0, b.y + 1.0, b.w, b.h))
        .collect();
    let path = dir.join("groundtruth_rect.txt");
    fs::write(&path, gt).map_err(|e| Error::io(&path, e))
}
