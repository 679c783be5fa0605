//! Regenerates `assets/color_names.bin`, the built-in RGB -> color-name table.
//!
//! Each 8-bit RGB cell center is converted to CIELAB (D65) and assigned a
//! softmax over negative squared distances to ten prototype colors. The
//! output is 32768 rows of 10 little-endian `f32` probabilities.
//!
//!     cargo run -p dimtrack-core --example gen_color_names [OUT]

use std::io::Write;

const PROTOTYPES: [(&str, [f64; 3]); 10] = [
    ("black", [0.0, 0.0, 0.0]),
    ("blue", [0.10, 0.20, 0.80]),
    ("brown", [0.45, 0.27, 0.10]),
    ("gray", [0.50, 0.50, 0.50]),
    ("green", [0.10, 0.60, 0.15]),
    ("orange", [1.00, 0.55, 0.00]),
    ("purple", [0.50, 0.10, 0.60]),
    ("red", [0.85, 0.05, 0.05]),
    ("white", [1.0, 1.0, 1.0]),
    ("yellow", [1.00, 0.95, 0.10]),
];

/// Softmax temperature in Lab units.
const SPREAD: f64 = 15.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = (0.4124 * r + 0.3576 * g + 0.1805 * b) / 0.95047;
    let y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    let z = (0.0193 * r + 0.1192 * g + 0.9505 * b) / 1.08883;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/assets/color_names.bin").to_string());
    let protos: Vec<[f64; 3]> = PROTOTYPES.iter().map(|(_, c)| lab(*c)).collect();
    let mut bytes = Vec::with_capacity(32768 * 10 * 4);
    for bq in 0..32 {
        for gq in 0..32 {
            for rq in 0..32 {
                let center = |q: usize| ((q * 8) as f64 + 3.5) / 255.0;
                let p = lab([center(rq), center(gq), center(bq)]);
                let logits: Vec<f64> = protos
                    .iter()
                    .map(|c| {
                        let d2: f64 = (0..3).map(|k| (p[k] - c[k]).powi(2)).sum();
                        -d2 / (2.0 * SPREAD * SPREAD)
                    })
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                for e in exps {
                    bytes.extend_from_slice(&((e / total) as f32).to_le_bytes());
                }
            }
        }
    }
    std::fs::File::create(&out)?.write_all(&bytes)?;
    eprintln!("wrote {out}");
    Ok(())
}
