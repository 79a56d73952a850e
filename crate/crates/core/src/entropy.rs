//! Renyi quadratic entropy and Cauchy-Schwarz divergence of one dimensional
//! Gaussians and Gaussian kernel density estimates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{EemError, Result};

/// `N(mean, variance)` with `variance > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    mean: f64,
    variance: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(EemError::NonPositiveVariance(variance));
        }
        if !mean.is_finite() {
            return Err(EemError::invalid(format!("mean must be finite, got {mean}")));
        }
        Ok(Gaussian1D { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * (2.0 * PI * self.variance).ln() - d * d / (2.0 * self.variance)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }
}

/// `H₂(f) = -ln ∫f² = ln(2√(πS))`.
pub fn renyi_h2_gaussian(g: &Gaussian1D) -> f64 {
    (2.0 * (PI * g.variance).sqrt()).ln()
}

/// `H₂ˣ(f,g) = -ln ∫fg = -ln N(m_f - m_g; 0, S_f + S_g)`.
pub fn renyi_h2_cross_gaussian(f: &Gaussian1D, g: &Gaussian1D) -> f64 {
    let s = f.variance + g.variance;
    let d = f.mean - g.mean;
    0.5 * (2.0 * PI * s).ln() + d * d / (2.0 * s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DcsFormula {
    /// `ln(AM/GM) + Δ²/(S₊+S₋)`, equal to `2H₂ˣ - H₂(f) - H₂(g)`.
    #[default]
    Corrected,
    /// `-½ln(π/2) - ln(AM/GM) + Δ²/(S₊+S₋)`. Kept only to reproduce model
    /// selection runs that used this expression; it is not a divergence.
    AsPrinted,
}

fn log_am_over_gm(f: &Gaussian1D, g: &Gaussian1D) -> f64 {
    (0.5 * (f.variance + g.variance) / (f.variance * g.variance).sqrt()).ln()
}

/// Cauchy-Schwarz divergence of two Gaussians.
pub fn dcs_gaussian_1d(f: &Gaussian1D, g: &Gaussian1D) -> f64 {
    log_am_over_gm(f, g) + dcs_last_term(f, g)
}

pub fn dcs_gaussian_1d_with(f: &Gaussian1D, g: &Gaussian1D, formula: DcsFormula) -> f64 {
    match formula {
        DcsFormula::Corrected => dcs_gaussian_1d(f, g),
        DcsFormula::AsPrinted => -0.5 * (PI / 2.0).ln() - log_am_over_gm(f, g) + dcs_last_term(f, g),
    }
}

/// Mean separation term `(m₊ - m₋)² / (S₊ + S₋)`.
pub fn dcs_last_term(f: &Gaussian1D, g: &Gaussian1D) -> f64 {
    let d = f.mean - g.mean;
    d * d / (f.variance + g.variance)
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Silverman's rule `(4 / (3n))^{1/5} · std`, with the `1/n` standard
/// deviation.
pub fn silverman_width(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(EemError::invalid("Silverman's rule needs at least 2 values"));
    }
    let (_, std) = mean_and_std(values);
    Ok((4.0 / (3.0 * values.len() as f64)).powf(0.2) * std)
}

/// Equal-weight Gaussian mixture with a shared bandwidth.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeMixture1D {
    pub centers: Vec<f64>,
    /// Kernel standard deviation.
    pub bandwidth: f64,
}

impl KdeMixture1D {
    /// Bandwidth from [`silverman_width`], floored at `1e-6 (1 + |mean|)` when
    /// the values have no spread.
    pub fn silverman(values: &[f64]) -> Result<Self> {
        let mut bandwidth = silverman_width(values)?;
        if bandwidth <= 0.0 {
            let (mean, _) = mean_and_std(values);
            bandwidth = 1e-6 * (1.0 + mean.abs());
        }
        Ok(KdeMixture1D {
            centers: values.to_vec(),
            bandwidth,
        })
    }

    pub fn density(&self, x: f64) -> f64 {
        let v = self.bandwidth * self.bandwidth;
        let norm = 1.0 / (2.0 * PI * v).sqrt();
        self.centers
            .iter()
            .map(|c| norm * (-(x - c) * (x - c) / (2.0 * v)).exp())
            .sum::<f64>()
            / self.centers.len() as f64
    }
}

/// `ln ∫ f g` for two mixtures, via `∫N(a,s²)N(b,t²) = N(0, s²+t²)[a-b]`
/// and a log-sum-exp over all pairs.
fn log_inner_product(f: &KdeMixture1D, g: &KdeMixture1D) -> f64 {
    let v = f.bandwidth * f.bandwidth + g.bandwidth * g.bandwidth;
    let log_norm = -0.5 * (2.0 * PI * v).ln();
    let mut max_e = f64::NEG_INFINITY;
    for a in &f.centers {
        for b in &g.centers {
            max_e = max_e.max(-(a - b) * (a - b) / (2.0 * v));
        }
    }
    let mut sum = 0.0;
    for a in &f.centers {
        for b in &g.centers {
            sum += (-(a - b) * (a - b) / (2.0 * v) - max_e).exp();
        }
    }
    let count = (f.centers.len() * g.centers.len()) as f64;
    log_norm + max_e + sum.ln() - count.ln()
}

/// Cauchy-Schwarz divergence `ln∫f² + ln∫g² - 2ln∫fg`.
pub fn dcs_mixtures(f: &KdeMixture1D, g: &KdeMixture1D) -> f64 {
    log_inner_product(f, f) + log_inner_product(g, g) - 2.0 * log_inner_product(f, g)
}

/// Cauchy-Schwarz divergence between the Silverman KDEs of `a` and `b`.
pub fn dcs_kde_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    let f = KdeMixture1D::silverman(a)?;
    let g = KdeMixture1D::silverman(b)?;
    Ok(dcs_mixtures(&f, &g))
}
