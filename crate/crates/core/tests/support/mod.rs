//! Slow, direct reference implementations used as test oracles.

#![allow(dead_code)]

use dimtrack_core::features::FeatureMap;
use dimtrack_core::spectral::SpectralMap;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_map(rng: &mut ChaCha8Rng, m: usize, n: usize, d: usize) -> FeatureMap {
    let data = (0..m * n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureMap::from_vec(m, n, d, data).unwrap()
}

/// Inverse DFT by the defining double sum; returns the real part per channel.
pub fn naive_idft(x: &SpectralMap) -> Vec<Vec<f64>> {
    let (m, n) = x.grid();
    (0..x.channels())
        .map(|c| {
            let plane = x.channel(c);
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    let mut s = Complex64::new(0.0, 0.0);
                    for k in 0..m {
                        for l in 0..n {
                            let ang = 2.0 * std::f64::consts::PI * ((k * i) as f64 / m as f64 + (l * j) as f64 / n as f64);
                            s += plane[k * n + l] * Complex64::from_polar(1.0, ang);
                        }
                    }
                    out[i * n + j] = s.re / (m * n) as f64;
                }
            }
            out
        })
        .collect()
}

/// `r(s) = sum_l sum_p f_l(p) z_l(p + s)` with circular indexing.
pub fn circular_correlation(f: &[Vec<f64>], z: &FeatureMap) -> Vec<f64> {
    let (m, n) = z.grid();
    let mut out = vec![0.0; m * n];
    for si in 0..m {
        for sj in 0..n {
            let mut acc = 0.0;
            for (l, fl) in f.iter().enumerate() {
                for pi in 0..m {
                    for pj in 0..n {
                        acc += fl[pi * n + pj] * z.get((pi + si) % m, (pj + sj) % n, l);
                    }
                }
            }
            out[si * n + sj] = acc;
        }
    }
    out
}

/// Spatial ridge objective `||sum_l corr(f_l, x_l) - g||^2 + lambda sum_l ||f_l||^2`.
pub fn spatial_objective(f: &[Vec<f64>], x: &FeatureMap, g: &FeatureMap, lambda: f64) -> f64 {
    let r = circular_correlation(f, x);
    let fit: f64 = r.iter().zip(g.channel(0)).map(|(a, b)| (a - b).powi(2)).sum();
    let reg: f64 = f.iter().flatten().map(|v| v * v).sum();
    fit + lambda * reg
}

/// Eigenvalues of the uncentered channel scatter, descending.
pub fn scatter_eigenvalues(mu: &FeatureMap) -> Vec<f64> {
    let d = mu.channels();
    let cells = mu.plane_len();
    let mat = DMatrix::from_fn(cells, d, |q, l| mu.channel(l)[q]);
    let scatter = mat.transpose() * mat;
    let mut ev: Vec<f64> = SymmetricEigen::new(scatter).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn naive_apce(r: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &v in r {
        max = max.max(v);
        min = min.min(v);
    }
    let mut energy = 0.0;
    for &v in r {
        energy += (v - min) * (v - min);
    }
    energy /= r.len() as f64;
    if energy == 0.0 {
        0.0
    } else {
        (max - min).powi(2) / energy
    }
}

pub fn naive_csrm(r: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &v in r {
        max = max.max(v);
        min = min.min(v);
    }
    let (max2, min2) = (max * max, min * min);
    let mut energy = 0.0;
    for &v in r {
        energy += (v * v - min2) * (v * v - min2);
    }
    energy /= r.len() as f64;
    if energy == 0.0 {
        0.0
    } else {
        (max2 - min2).powi(2) / energy
    }
}

/// Dense solve of `(I + beta (Dh' Ah Dh + Dv' Av Dv)) t = t_hat` with
/// forward differences that vanish on the last column/row.
pub fn dense_refinement(t_hat: &[f64], m: usize, n: usize, ah: &[f64], av: &[f64], beta: f64) -> Vec<f64> {
    let len = m * n;
    let mut dh = DMatrix::<f64>::zeros(len, len);
    let mut dv = DMatrix::<f64>::zeros(len, len);
    for i in 0..m {
        for j in 0..n {
            let p = i * n + j;
            if j + 1 < n {
                dh[(p, p)] = -1.0;
                dh[(p, p + 1)] = 1.0;
            }
            if i + 1 < m {
                dv[(p, p)] = -1.0;
                dv[(p, p + n)] = 1.0;
            }
        }
    }
    let ah = DMatrix::from_diagonal(&DVector::from_column_slice(ah));
    let av = DMatrix::from_diagonal(&DVector::from_column_slice(av));
    let lhs = DMatrix::<f64>::identity(len, len) + beta * (dh.transpose() * ah * &dh + dv.transpose() * av * &dv);
    lhs.lu()
        .solve(&DVector::from_column_slice(t_hat))
        .expect("system is positive definite")
        .iter()
        .copied()
        .collect()
}

/// Forward differences of a row-major map, zero on the last column/row.
pub fn forward_differences(t: &[f64], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gh = vec![0.0; m * n];
    let mut gv = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let p = i * n + j;
            if j + 1 < n {
                gh[p] = t[p + 1] - t[p];
            }
            if i + 1 < m {
                gv[p] = t[p + n] - t[p];
            }
        }
    }
    (gh, gv)
}
