//! Reference implementations and data generators shared by the integration
//! tests. Everything here is written from the defining formulas, without
//! calling into the library's numerics.

#![allow(dead_code)]

use std::path::PathBuf;

use eem::dataset::{self, DataFormat, LoadOptions};
use eem::{Dataset, Matrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn bundled(name: &str) -> Dataset {
    dataset::load(data_path(&format!("{name}.libsvm")), DataFormat::Libsvm, &LoadOptions::default())
        .unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

pub fn normal_matrix(n: usize, d: usize, shift: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(n, d, |_, _| shift + rng.sample::<f64, _>(StandardNormal))
}

/// Two Gaussian classes with `n_pos` positives centred at `shift` in every
/// coordinate and `n_neg` negatives at the origin.
pub fn gaussian_classes(n_pos: usize, n_neg: usize, d: usize, shift: f64, rng: &mut ChaCha8Rng) -> Dataset {
    let mut rows = Vec::with_capacity(n_pos + n_neg);
    let mut labels = Vec::with_capacity(n_pos + n_neg);
    for i in 0..n_pos + n_neg {
        let positive = i < n_pos;
        let centre = if positive { shift } else { 0.0 };
        rows.push((0..d).map(|_| centre + rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>());
        labels.push(if positive { 1 } else { -1 });
    }
    Dataset::new("synthetic", Matrix::from_rows(&rows).unwrap(), labels).unwrap()
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.rows().map(<[f64]>::to_vec).collect()
}

pub fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; rows[0].len()];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    mean
}

/// Ledoit-Wolf (2004) shrinkage towards `(tr S / p) I`, spelled out with the
/// per-sample outer products of the original estimator. Returns the shrunk
/// matrix (divisor `n`) and the intensity.
pub fn ledoit_wolf_reference(rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = rows.len();
    let p = rows[0].len();
    let mean = mean_rows(rows);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(a, b)| a - b).collect()).collect();
    let mut s = vec![vec![0.0; p]; p];
    for xk in &x {
        for i in 0..p {
            for j in 0..p {
                s[i][j] += xk[i] * xk[j] / n as f64;
            }
        }
    }
    let mu = (0..p).map(|i| s[i][i]).sum::<f64>() / p as f64;
    // squared norm scaled by 1/p, as in the reference
    let norm2 = |a: &dyn Fn(usize, usize) -> f64| -> f64 {
        let mut acc = 0.0;
        for i in 0..p {
            for j in 0..p {
                acc += a(i, j) * a(i, j);
            }
        }
        acc / p as f64
    };
    let d2 = norm2(&|i, j| s[i][j] - if i == j { mu } else { 0.0 });
    let mut b_bar2 = 0.0;
    for xk in &x {
        b_bar2 += norm2(&|i, j| xk[i] * xk[j] - s[i][j]);
    }
    b_bar2 /= (n * n) as f64;
    let b2 = b_bar2.min(d2);
    let eps = if d2 > 0.0 { b2 / d2 } else { 0.0 };
    let shrunk = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| (1.0 - eps) * s[i][j] + if i == j { eps * mu } else { 0.0 })
                .collect()
        })
        .collect();
    (shrunk, eps)
}

pub fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn quad(a: &[Vec<f64>], v: &[f64]) -> f64 {
    dotp(v, &mat_vec(a, v))
}

/// Minimises `βᵀΣβ` subject to `βᵀm = 2` by conjugate gradients on the
/// null space of `mᵀ`, parametrised from the feasible point `2m/|m|²`.
pub fn constrained_minimiser(sigma: &[Vec<f64>], m: &[f64]) -> Vec<f64> {
    let p = m.len();
    let mm = dotp(m, m);
    let beta0: Vec<f64> = m.iter().map(|v| 2.0 * v / mm).collect();

    // orthonormal basis of m⊥ by Gram-Schmidt over m, e_1, ..., e_p
    let mut basis: Vec<Vec<f64>> = vec![m.iter().map(|v| v / mm.sqrt()).collect()];
    for k in 0..p {
        let mut e = vec![0.0; p];
        e[k] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = dotp(&e, b);
                e.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dotp(&e, &e).sqrt();
        if norm > 1e-8 {
            basis.push(e.iter().map(|v| v / norm).collect());
        }
    }
    let z = &basis[1..];
    let q = z.len();
    // reduced system (ZᵀΣZ) y = -ZᵀΣβ₀
    let sz: Vec<Vec<f64>> = z.iter().map(|zi| mat_vec(sigma, zi)).collect();
    let a: Vec<Vec<f64>> = (0..q).map(|i| (0..q).map(|j| dotp(&z[i], &sz[j])).collect()).collect();
    let sb = mat_vec(sigma, &beta0);
    let rhs: Vec<f64> = z.iter().map(|zi| -dotp(zi, &sb)).collect();

    let mut y = vec![0.0; q];
    let mut r = rhs.clone();
    let mut d = r.clone();
    let mut rr = dotp(&r, &r);
    let tol = 1e-30 * dotp(&rhs, &rhs).max(1e-300);
    for _ in 0..10 * q.max(1) {
        if rr <= tol {
            break;
        }
        let ad = mat_vec(&a, &d);
        let alpha = rr / dotp(&d, &ad);
        y.iter_mut().zip(&d).for_each(|(yi, di)| *yi += alpha * di);
        r.iter_mut().zip(&ad).for_each(|(ri, ai)| *ri -= alpha * ai);
        let rr_new = dotp(&r, &r);
        let b = rr_new / rr;
        d = r.iter().zip(&d).map(|(ri, di)| ri + b * di).collect();
        rr = rr_new;
    }
    let mut beta = beta0;
    for (zi, yi) in z.iter().zip(&y) {
        beta.iter_mut().zip(zi).for_each(|(b, v)| *b += yi * v);
    }
    beta
}

pub fn gauss_pdf(mean: f64, var: f64, x: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Composite Simpson rule with `n` (made even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `-2 ln( ∫fg / √(∫f² ∫g²) )` by quadrature on `[lo, hi]`.
pub fn dcs_by_quadrature(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let ff = simpson(|x| f(x) * f(x), lo, hi, n);
    let gg = simpson(|x| g(x) * g(x), lo, hi, n);
    let fg = simpson(|x| f(x) * g(x), lo, hi, n);
    -2.0 * (fg / (ff * gg).sqrt()).ln()
}

/// Bandwidth `(4 / 3n)^{1/5}` times the `1/n` standard deviation.
pub fn silverman_reference(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (4.0 / (3.0 * n)).powf(0.2) * var.sqrt()
}

pub fn kde_pdf(centers: &[f64], width: f64, x: f64) -> f64 {
    centers.iter().map(|&c| gauss_pdf(c, width * width, x)).sum::<f64>() / centers.len() as f64
}

/// Hidden-layer matrices for a two-class problem in which the negatives are
/// the exact mirror image of the positives: the pooled column means are
/// zero, both classes share one covariance and the classes are balanced.
/// Per-column noise scales are spread over `[0.5, 2]`.
pub fn mirrored_hidden_layer(n: usize, h: usize, rng: &mut ChaCha8Rng) -> (Matrix, Matrix) {
    let centre: Vec<f64> = (0..h).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scale = 6.0 / dotp(&centre, &centre).sqrt();
    let spread: Vec<f64> = (0..h).map(|j| 0.5 * 4f64.powf(j as f64 / (h - 1).max(1) as f64)).collect();
    let pos = Matrix::from_fn(n, h, |_, j| scale * centre[j] + spread[j] * rng.sample::<f64, _>(StandardNormal));
    let neg = Matrix::from_fn(n, h, |i, j| -pos[(i, j)]);
    (pos, neg)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dotp(a, b) / (dotp(a, a).sqrt() * dotp(b, b).sqrt())
}
