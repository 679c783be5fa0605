//! Felzenszwalb-style 31-channel HOG on a full cell grid.
//!
//! Channels 0..18 are contrast-sensitive orientations, 18..27 contrast
//! insensitive, 27..31 texture energy of the four normalization blocks.
//! Unlike the original detector code, border cells are kept (block norms
//! replicate at the grid edge) so the output grid is exactly `h/cell x w/cell`.

use super::FeatureMap;
use crate::imgproc::ImageBuffer;

pub const HOG_CHANNELS: usize = 31;

const SIGNED_BINS: usize = 18;
const UNSIGNED_BINS: usize = 9;
const TRUNCATION: f64 = 0.2;
const NORM_EPS: f64 = 1e-4;
const TEXTURE_WEIGHT: f64 = 0.2357;

struct Orientations {
    uu: [f64; UNSIGNED_BINS],
    vv: [f64; UNSIGNED_BINS],
}

impl Orientations {
    fn new() -> Self {
        let mut uu = [0.0; UNSIGNED_BINS];
        let mut vv = [0.0; UNSIGNED_BINS];
        for o in 0..UNSIGNED_BINS {
            let theta = o as f64 * std::f64::consts::PI / UNSIGNED_BINS as f64;
            uu[o] = theta.cos();
            vv[o] = theta.sin();
        }
        Self { uu, vv }
    }

    /// Snaps a gradient to the closest of 18 signed directions.
    #[inline]
    fn bin(&self, dx: f64, dy: f64) -> usize {
        let mut best = 0.0;
        let mut best_o = 0;
        for o in 0..UNSIGNED_BINS {
            let dot = self.uu[o] * dx + self.vv[o] * dy;
            if dot > best {
                best = dot;
                best_o = o;
            } else if -dot > best {
                best = -dot;
                best_o = o + UNSIGNED_BINS;
            }
        }
        best_o
    }
}

/// Per-cell 18-bin orientation histograms with bilinear spatial voting.
fn orientation_histograms(patch: &ImageBuffer, cell: usize, cells_y: usize, cells_x: usize) -> Vec<f64> {
    let (h, w, ch) = (patch.height(), patch.width(), patch.channels());
    let orient = Orientations::new();
    let mut hist = vec![0.0; cells_y * cells_x * SIGNED_BINS];
    let cellf = cell as f64;
    for y in 0..h {
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        let yp = (y as f64 + 0.5) / cellf - 0.5;
        let iyp = yp.floor();
        let vy0 = yp - iyp;
        let vy1 = 1.0 - vy0;
        let iyp = iyp as isize;
        for x in 0..w {
            let xl = x.saturating_sub(1);
            let xr = (x + 1).min(w - 1);
            let mut best_mag = 0.0;
            let mut gx = 0.0;
            let mut gy = 0.0;
            for c in 0..ch {
                let dx = patch.get(y, xr, c) - patch.get(y, xl, c);
                let dy = patch.get(yd, x, c) - patch.get(yu, x, c);
                let mag = dx * dx + dy * dy;
                if mag > best_mag {
                    best_mag = mag;
                    gx = dx;
                    gy = dy;
                }
            }
            if best_mag == 0.0 {
                continue;
            }
            let v = best_mag.sqrt();
            let o = orient.bin(gx, gy);

            let xp = (x as f64 + 0.5) / cellf - 0.5;
            let ixp = xp.floor();
            let vx0 = xp - ixp;
            let vx1 = 1.0 - vx0;
            let ixp = ixp as isize;

            let mut vote = |cy: isize, cx: isize, weight: f64| {
                if cy >= 0 && cx >= 0 && (cy as usize) < cells_y && (cx as usize) < cells_x {
                    hist[(cy as usize * cells_x + cx as usize) * SIGNED_BINS + o] += weight;
                }
            };
            vote(iyp, ixp, v * vy1 * vx1);
            vote(iyp, ixp + 1, v * vy1 * vx0);
            vote(iyp + 1, ixp, v * vy0 * vx1);
            vote(iyp + 1, ixp + 1, v * vy0 * vx0);
        }
    }
    hist
}

/// 31-channel fHOG of a patch on a `cell`-pixel grid. Trailing pixels that do
/// not fill a whole cell are ignored.
pub fn hog(patch: &ImageBuffer, cell: usize) -> FeatureMap {
    let cells_y = patch.height() / cell;
    let cells_x = patch.width() / cell;
    let mut out = FeatureMap::zeros(cells_y, cells_x, HOG_CHANNELS);
    if cells_y == 0 || cells_x == 0 {
        return out;
    }
    let hist = orientation_histograms(patch, cell, cells_y, cells_x);

    let norm: Vec<f64> = hist
        .chunks_exact(SIGNED_BINS)
        .map(|h| {
            (0..UNSIGNED_BINS)
                .map(|o| {
                    let s = h[o] + h[o + UNSIGNED_BINS];
                    s * s
                })
                .sum()
        })
        .collect();
    let norm_at = |cy: isize, cx: isize| -> f64 {
        let cy = cy.clamp(0, cells_y as isize - 1) as usize;
        let cx = cx.clamp(0, cells_x as isize - 1) as usize;
        norm[cy * cells_x + cx]
    };
    let block = |cy: isize, cx: isize| -> f64 {
        let e = norm_at(cy, cx) + norm_at(cy, cx + 1) + norm_at(cy + 1, cx) + norm_at(cy + 1, cx + 1);
        1.0 / (e + NORM_EPS).sqrt()
    };

    for cy in 0..cells_y {
        for cx in 0..cells_x {
            let (iy, ix) = (cy as isize, cx as isize);
            let n = [block(iy, ix), block(iy - 1, ix), block(iy, ix - 1), block(iy - 1, ix - 1)];
            let src = &hist[(cy * cells_x + cx) * SIGNED_BINS..(cy * cells_x + cx + 1) * SIGNED_BINS];
            let mut texture = [0.0; 4];

            for o in 0..SIGNED_BINS {
                let mut acc = 0.0;
                for (k, nk) in n.iter().enumerate() {
                    let hk = (src[o] * nk).min(TRUNCATION);
                    acc += hk;
                    texture[k] += hk;
                }
                out.set(cy, cx, o, 0.5 * acc);
            }
            for o in 0..UNSIGNED_BINS {
                let sum = src[o] + src[o + UNSIGNED_BINS];
                let acc: f64 = n.iter().map(|nk| (sum * nk).min(TRUNCATION)).sum();
                out.set(cy, cx, SIGNED_BINS + o, 0.5 * acc);
            }
            for (k, t) in texture.iter().enumerate() {
                out.set(cy, cx, SIGNED_BINS + UNSIGNED_BINS + k, TEXTURE_WEIGHT * t);
            }
        }
    }
    out
}
