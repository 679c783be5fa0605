use crate::imgproc::ImageBuffer;

pub const HISTOGRAM_BINS: usize = 512;

/// L1-normalized joint RGB histogram with 8 levels per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramVector {
    pub bins: Vec<f64>,
}

impl HistogramVector {
    pub fn from_counts(counts: &[u32]) -> Self {
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        let bins = if total == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&c| f64::from(c) / total as f64).collect()
        };
        Self { bins }
    }
}

/// Joint bin of an RGB triple: top three bits of each 8-bit channel.
#[inline]
pub fn color_bin(rgb: [f64; 3]) -> usize {
    let q = |v: f64| ((v.clamp(0.0, 1.0) * 255.0).round() as usize) >> 5;
    q(rgb[0]) * 64 + q(rgb[1]) * 8 + q(rgb[2])
}

pub fn quantized_color_histogram(patch: &ImageBuffer) -> HistogramVector {
    let mut counts = vec![0u32; HISTOGRAM_BINS];
    for y in 0..patch.height() {
        for x in 0..patch.width() {
            counts[color_bin(patch.rgb(y, x))] += 1;
        }
    }
    HistogramVector::from_counts(&counts)
}
