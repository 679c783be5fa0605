//! Raster images, bounding boxes, OTB-style sequence loading and the
//! pixel-level helpers (patch extraction, luminance, windows) that the
//! feature and enhancement stages build on.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::FeatureMap;

/// Row-major `height x width x channels` raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Self {
            height,
            width,
            channels,
            data: vec![value.clamp(0.0, 1.0); height * width * channels],
        }
    }

    /// Wraps interleaved data; values are clamped into `[0, 1]`.
    pub fn from_vec(height: usize, width: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!("unsupported channel count {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch {
                expected: height * width * channels,
                actual: data.len(),
            });
        }
        for v in &mut data {
            *v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_u8(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::from_vec(height, width, channels, data)
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_byte(v)).collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let idx = (y * self.width + x) * self.channels + c;
        self.data[idx] = v.clamp(0.0, 1.0);
    }

    /// RGB triple at a pixel; grayscale pixels are replicated.
    #[inline]
    pub fn rgb(&self, y: usize, x: usize) -> [f64; 3] {
        let base = (y * self.width + x) * self.channels;
        if self.channels == 3 {
            [self.data[base], self.data[base + 1], self.data[base + 2]]
        } else {
            let v = self.data[base];
            [v, v, v]
        }
    }

    pub fn to_gray(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect();
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }
}

#[inline]
fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// BT.601 luma of an RGB triple, on the `[0, 1]` scale.
#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Axis-aligned box in 0-based pixel coordinates (`x`, `y` = top-left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w > 0.0 && self.h > 0.0
    }

    /// Intersection with the image rectangle, `None` when empty.
    pub fn clip(&self, width: usize, height: usize) -> Option<BoundingBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(width as f64);
        let y1 = (self.y + self.h).min(height as f64);
        (x1 > x0 && y1 > y0).then(|| BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// Intersection over union; 0 for disjoint or empty boxes.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let ix = ((self.x + self.w).min(other.x + other.w) - self.x.max(other.x)).max(0.0);
        let iy = ((self.y + self.h).min(other.y + other.h) - self.y.max(other.y)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Parses `x,y,w,h` with comma, tab or whitespace separators.
    pub fn parse(line: &str) -> Result<BoundingBox> {
        let parts: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!("expected 4 box values, got {:?}", line.trim())));
        }
        let mut v = [0.0; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad box value {p:?}: {e}")))?;
        }
        Ok(BoundingBox::new(v[0], v[1], v[2], v[3]))
    }
}

/// An on-disk image sequence in OTB layout.
#[derive(Debug, Clone)]
pub struct SequenceHandle {
    pub name: String,
    pub frame_paths: Vec<PathBuf>,
    pub ground_truth: Option<Vec<BoundingBox>>,
}

impl SequenceHandle {
    pub fn len(&self) -> usize {
        self.frame_paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_paths.is_empty()
    }

    pub fn frame(&self, index: usize) -> Result<ImageBuffer> {
        load_image(&self.frame_paths[index])
    }
}

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp"];

/// Loads `<dir>/img/*` (numerically ordered) and the optional
/// `groundtruth_rect.txt`. With `one_based`, ground-truth `x`/`y` are shifted
/// down by one pixel.
pub fn load_sequence(dir: &Path, one_based: bool) -> Result<SequenceHandle> {
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_path_buf()));
    }
    let img_dir = dir.join("img");
    if !img_dir.is_dir() {
        return Err(Error::MissingDirectory(img_dir));
    }
    let mut frames: Vec<(u64, PathBuf)> = fs::read_dir(&img_dir)
        .map_err(|e| Error::io(&img_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                .unwrap_or(false)
        })
        .filter_map(|p| {
            let n = p.file_stem()?.to_str()?.parse::<u64>().ok()?;
            Some((n, p))
        })
        .collect();
    if frames.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    frames.sort_by_key(|(n, _)| *n);
    let mut frame_paths: Vec<PathBuf> = frames.into_iter().map(|(_, p)| p).collect();

    let gt_path = dir.join("groundtruth_rect.txt");
    let ground_truth = if gt_path.is_file() {
        let text = fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
        let offset = if one_based { 1.0 } else { 0.0 };
        let mut boxes = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut bb = BoundingBox::parse(line)?;
            bb.x -= offset;
            bb.y -= offset;
            boxes.push(bb);
        }
        if boxes.len() != frame_paths.len() {
            log::warn!(
                "{}: {} frames but {} ground-truth boxes; truncating to the shorter",
                dir.display(),
                frame_paths.len(),
                boxes.len()
            );
            let n = boxes.len().min(frame_paths.len());
            if n == 0 {
                return Err(Error::NoFrames(dir.to_path_buf()));
            }
            boxes.truncate(n);
            frame_paths.truncate(n);
        }
        Some(boxes)
    } else {
        None
    };

    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(SequenceHandle {
        name,
        frame_paths,
        ground_truth,
    })
}

pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        ImageBuffer::from_u8(h, w, 3, rgb.as_raw())
    } else {
        let gray = img.to_luma8();
        ImageBuffer::from_u8(h, w, 1, gray.as_raw())
    }
}

pub fn save_image(img: &ImageBuffer, path: &Path) -> Result<()> {
    let bytes = img.to_u8();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let color = if img.channels() == 3 {
        image::ExtendedColorType::Rgb8
    } else {
        image::ExtendedColorType::L8
    };
    image::save_buffer(path, &bytes, w, h, color).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Crops `padding * (w, h)` around the box center with edge replication and
/// resamples it to `out_size = (width, height)`: bilinear when enlarging,
/// area averaging along an axis that shrinks.
pub fn extract_patch(img: &ImageBuffer, bb: &BoundingBox, padding: f64, out_size: (usize, usize)) -> ImageBuffer {
    let (out_w, out_h) = out_size;
    let (cx, cy) = bb.center();
    let region_w = padding * bb.w;
    let region_h = padding * bb.h;
    let xs = axis_taps(cx - region_w / 2.0, region_w / out_w as f64, out_w, img.width);
    let ys = axis_taps(cy - region_h / 2.0, region_h / out_h as f64, out_h, img.height);
    let channels = img.channels;
    let mut out = ImageBuffer::new(out_h, out_w, channels);
    let mut row = vec![0.0; channels];
    for (i, ytaps) in ys.iter().enumerate() {
        for (j, xtaps) in xs.iter().enumerate() {
            row.iter_mut().for_each(|v| *v = 0.0);
            for &(y, wy) in ytaps {
                for &(x, wx) in xtaps {
                    let w = wy * wx;
                    let base = (y * img.width + x) * channels;
                    for (c, acc) in row.iter_mut().enumerate() {
                        *acc += w * img.data[base + c];
                    }
                }
            }
            out.data[(i * out_w + j) * channels..][..channels].copy_from_slice(&row);
        }
    }
    out
}

/// Source taps for each output sample along one axis. `start` is the left
/// edge of the region and `step` the source length per output sample.
fn axis_taps(start: f64, step: f64, count: usize, len: usize) -> Vec<Vec<(usize, f64)>> {
    let clamp = |p: i64| p.clamp(0, len as i64 - 1) as usize;
    (0..count)
        .map(|j| {
            if step <= 1.0 {
                let (lo, hi, f) = sample_coord(start + (j as f64 + 0.5) * step - 0.5, len);
                return vec![(lo, 1.0 - f), (hi, f)];
            }
            let a = start + j as f64 * step;
            let b = a + step;
            let mut taps = Vec::with_capacity(step.ceil() as usize + 1);
            let mut p = a.floor();
            while p < b {
                let overlap = (p + 1.0).min(b) - p.max(a);
                if overlap > 0.0 {
                    let idx = clamp(p as i64);
                    match taps.last_mut() {
                        Some((last, w)) if *last == idx => *w += overlap / step,
                        _ => taps.push((idx, overlap / step)),
                    }
                }
                p += 1.0;
            }
            if taps.len() == 1 {
                taps[0].1 = 1.0;
            }
            taps
        })
        .collect()
}

/// Bilinear taps for a continuous coordinate with replicate-edge clamping.
#[inline]
fn sample_coord(pos: f64, len: usize) -> (usize, usize, f64) {
    let max = (len - 1) as f64;
    let p = pos.clamp(0.0, max);
    let lo = p.floor();
    let frac = p - lo;
    let lo = lo as usize;
    let hi = (lo + 1).min(len - 1);
    (lo, hi, frac)
}

/// Resizes a whole image.
pub fn resize(img: &ImageBuffer, out_size: (usize, usize)) -> ImageBuffer {
    let bb = BoundingBox::new(0.0, 0.0, img.width as f64, img.height as f64);
    extract_patch(img, &bb, 1.0, out_size)
}

/// Mean BT.601 luminance on the 0-255 scale over the box (clipped to the
/// image), or over the whole image when the box is absent or misses it.
pub fn mean_luminance(img: &ImageBuffer, bb: Option<&BoundingBox>) -> f64 {
    let full = (0, 0, img.width, img.height);
    let (x0, y0, x1, y1) = bb
        .and_then(|b| pixel_span(b, img.width, img.height))
        .unwrap_or(full);
    let mut sum = 0.0;
    for y in y0..y1 {
        for x in x0..x1 {
            let [r, g, b] = img.rgb(y, x);
            sum += luma(r, g, b);
        }
    }
    let count = ((x1 - x0) * (y1 - y0)) as f64;
    if count == 0.0 {
        return 0.0;
    }
    255.0 * sum / count
}

/// Integer pixel span `[x0, x1) x [y0, y1)` of a box clipped to the image.
pub(crate) fn pixel_span(bb: &BoundingBox, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
    let clipped = bb.clip(width, height)?;
    let x0 = clipped.x.round() as usize;
    let y0 = clipped.y.round() as usize;
    let x1 = ((clipped.x + clipped.w).round() as usize).min(width);
    let y1 = ((clipped.y + clipped.h).round() as usize).min(height);
    (x1 > x0 && y1 > y0).then_some((x0, y0, x1, y1))
}

/// Symmetric Hann window with zero endpoints; a length-1 window is `[1]`.
pub fn hann(len: usize) -> Vec<f64> {
    if len < 2 {
        return vec![1.0; len];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect()
}

/// Outer product of two Hann windows as an `m x n x 1` map.
pub fn cosine_window(m: usize, n: usize) -> FeatureMap {
    let wy = hann(m);
    let wx = hann(n);
    let mut out = FeatureMap::zeros(m, n, 1);
    for (i, &a) in wy.iter().enumerate() {
        for (j, &b) in wx.iter().enumerate() {
            out.set(i, j, 0, a * b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(h: usize, w: usize) -> ImageBuffer {
        let mut img = ImageBuffer::new(h, w, 3);
        for y in 0..h {
            for x in 0..w {
                img.set(y, x, 0, x as f64 / w as f64);
                img.set(y, x, 1, y as f64 / h as f64);
                img.set(y, x, 2, ((x + y) % 7) as f64 / 7.0);
            }
        }
        img
    }

    #[test]
    fn parses_groundtruth_line() {
        let bb = BoundingBox::parse("198,214,34,81").unwrap();
        assert_eq!(bb, BoundingBox::new(198.0, 214.0, 34.0, 81.0));
        let bb = BoundingBox::parse("1\t2\t3\t4").unwrap();
        assert_eq!(bb, BoundingBox::new(1.0, 2.0, 3.0, 4.0));
        assert!(BoundingBox::parse("1,2,3").is_err());
    }

    #[test]
    fn padding_two_crops_double_region() {
        // Region 100x80 centered at (100,100): top-left at (50,60).
        let img = gradient_image(200, 200);
        let bb = BoundingBox::new(75.0, 80.0, 50.0, 40.0);
        let patch = extract_patch(&img, &bb, 2.0, (100, 80));
        assert_eq!((patch.width(), patch.height()), (100, 80));
        for (py, px) in [(0, 0), (10, 33), (79, 99)] {
            for c in 0..3 {
                assert_eq!(patch.get(py, px, c), img.get(60 + py, 50 + px, c));
            }
        }
    }

    #[test]
    fn padding_one_is_identity_crop() {
        let img = gradient_image(60, 70);
        let bb = BoundingBox::new(10.0, 12.0, 20.0, 16.0);
        let patch = extract_patch(&img, &bb, 1.0, (20, 16));
        for y in 0..16 {
            for x in 0..20 {
                for c in 0..3 {
                    assert_eq!(patch.get(y, x, c), img.get(12 + y, 10 + x, c));
                }
            }
        }
    }

    #[test]
    fn halving_averages_blocks() {
        let data: Vec<f64> = (0..16).map(|v| v as f64 / 16.0).collect();
        let img = ImageBuffer::from_vec(4, 4, 1, data.clone()).unwrap();
        let p = resize(&img, (2, 2));
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let mean = (0..2)
                .flat_map(|dy| (0..2).map(move |dx| (2 * i + dy) * 4 + 2 * j + dx))
                .map(|k| data[k])
                .sum::<f64>()
                / 4.0;
            assert!((p.get(i, j, 0) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn box_outside_image_replicates_corner() {
        let img = gradient_image(30, 40);
        let bb = BoundingBox::new(500.0, 600.0, 10.0, 10.0);
        let patch = extract_patch(&img, &bb, 2.0, (8, 8));
        let corner = img.rgb(29, 39);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(patch.rgb(y, x), corner);
            }
        }
    }

    #[test]
    fn luminance_examples() {
        let black = ImageBuffer::new(10, 10, 3);
        assert_eq!(mean_luminance(&black, None), 0.0);
        let white = ImageBuffer::filled(10, 10, 3, 1.0);
        assert!((mean_luminance(&white, None) - 255.0).abs() < 1e-9);
        let mut half = ImageBuffer::new(10, 10, 3);
        for y in 0..10 {
            for x in 5..10 {
                for c in 0..3 {
                    half.set(y, x, c, 1.0);
                }
            }
        }
        assert!((mean_luminance(&half, None) - 127.5).abs() < 1e-9);
        // Box restricted to the white half.
        let bb = BoundingBox::new(5.0, 0.0, 5.0, 10.0);
        assert!((mean_luminance(&half, Some(&bb)) - 255.0).abs() < 1e-9);
        // Box off-image falls back to global.
        let off = BoundingBox::new(-50.0, -50.0, 5.0, 5.0);
        assert!((mean_luminance(&half, Some(&off)) - 127.5).abs() < 1e-9);
    }

    #[test]
    fn window_shape() {
        let w = cosine_window(5, 7);
        assert_eq!(w.get(0, 0, 0), 0.0);
        assert_eq!(w.get(4, 6, 0), 0.0);
        assert!((w.get(2, 3, 0) - 1.0).abs() < 1e-15);
        let w4 = cosine_window(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                let v = w4.get(i, j, 0);
                assert!((v - w4.get(3 - i, j, 0)).abs() < 1e-15);
                assert!((v - w4.get(i, 3 - j, 0)).abs() < 1e-15);
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn byte_round_trip_is_identity() {
        let bytes: Vec<u8> = (0..=255).collect();
        let img = ImageBuffer::from_u8(1, 256, 1, &bytes).unwrap();
        assert_eq!(img.to_u8(), bytes);
    }

    #[test]
    fn loads_sequence_in_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        let img_dir = dir.path().join("img");
        fs::create_dir(&img_dir).unwrap();
        let frame = ImageBuffer::filled(4, 4, 3, 0.5);
        for n in [10, 2, 1] {
            save_image(&frame, &img_dir.join(format!("{n:04}.png"))).unwrap();
        }
        fs::write(dir.path().join("groundtruth_rect.txt"), "2,3,4,5\n2,3,4,5\n2,3,4,5\n").unwrap();
        let seq = load_sequence(dir.path(), true).unwrap();
        assert_eq!(seq.len(), 3);
        assert!(seq.frame_paths[0].ends_with("0001.png"));
        assert!(seq.frame_paths[2].ends_with("0010.png"));
        assert_eq!(seq.ground_truth.as_ref().unwrap()[0], BoundingBox::new(1.0, 2.0, 4.0, 5.0));
        assert_eq!(seq.frame(1).unwrap().rgb(0, 0)[0], 128.0 / 255.0);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("img")).unwrap();
        let err = load_sequence(dir.path(), true).unwrap_err();
        assert!(err.to_string().contains("zero frames"));
        assert!(matches!(
            load_sequence(&dir.path().join("nope"), true),
            Err(Error::MissingDirectory(_))
        ));
    }

    #[test]
    fn groundtruth_mismatch_truncates() {
        let dir = tempfile::tempdir().unwrap();
        let img_dir = dir.path().join("img");
        fs::create_dir(&img_dir).unwrap();
        let frame = ImageBuffer::new(4, 4, 1);
        for n in 1..=3 {
            save_image(&frame, &img_dir.join(format!("{n:04}.png"))).unwrap();
        }
        fs::write(dir.path().join("groundtruth_rect.txt"), "0,0,2,2\n0,0,2,2\n").unwrap();
        let seq = load_sequence(dir.path(), false).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.ground_truth.unwrap().len(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn patch_size_is_always_out_size(
                x in -300.0f64..300.0, y in -300.0f64..300.0,
                w in 1.0f64..120.0, h in 1.0f64..120.0,
                pad in 1.0f64..3.0, ow in 1usize..40, oh in 1usize..40,
            ) {
                let img = gradient_image(50, 60);
                let p = extract_patch(&img, &BoundingBox::new(x, y, w, h), pad, (ow, oh));
                prop_assert_eq!((p.width(), p.height(), p.channels()), (ow, oh, 3));
            }

            #[test]
            fn luminance_ignores_pixel_order(values in proptest::collection::vec(0.0f64..1.0, 48), seed in 0u64..1000) {
                let img = ImageBuffer::from_vec(4, 4, 3, values.clone()).unwrap();
                let mut pixels: Vec<[f64; 3]> = values.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
                let k = (seed as usize) % pixels.len();
                pixels.rotate_left(k);
                let last = pixels.len() - 1;
                pixels.swap(0, last);
                let shuffled = ImageBuffer::from_vec(4, 4, 3, pixels.concat()).unwrap();
                prop_assert!((mean_luminance(&img, None) - mean_luminance(&shuffled, None)).abs() < 1e-9);
            }
        }
    }
}
