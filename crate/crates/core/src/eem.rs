//! The Extreme Entropy Machine: Gaussian class models in feature space, the
//! closed-form projection, the density-crossing decision rule, probabilities
//! and cost-sensitive labels.

use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, NEGATIVE, POSITIVE};
use crate::entropy::Gaussian1D;
use crate::error::{EemError, Result};
use crate::feature_map::{FeatureMap, KernelMap};
use crate::linalg::{self, CovDivisor, Matrix, ShrunkCovariance, SymMatrix};

/// Mean and Ledoit-Wolf covariance of one class in feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassGaussian {
    pub mean: Vec<f64>,
    pub covariance: ShrunkCovariance,
    pub count: usize,
}

impl ClassGaussian {
    pub fn fit(h: &Matrix, divisor: CovDivisor) -> Result<ClassGaussian> {
        if h.nrows() == 0 {
            return Err(EemError::MissingClass);
        }
        let (covariance, mean) = linalg::ledoit_wolf_with(h, divisor)?;
        Ok(ClassGaussian {
            mean,
            covariance,
            count: h.nrows(),
        })
    }
}

pub fn fit_class_gaussians(hp: &Matrix, hn: &Matrix, divisor: CovDivisor) -> Result<(ClassGaussian, ClassGaussian)> {
    if hp.nrows() == 0 || hn.nrows() == 0 {
        return Err(EemError::MissingClass);
    }
    if hp.ncols() != hn.ncols() {
        return Err(EemError::DimensionMismatch {
            expected: hp.ncols(),
            got: hn.ncols(),
        });
    }
    Ok((ClassGaussian::fit(hp, divisor)?, ClassGaussian::fit(hn, divisor)?))
}

/// Largest coordinate gap below which the class means count as equal.
pub const MEAN_EPS: f64 = 1e-12;

/// `β = 2 Σ⁻¹ m / (mᵀ Σ⁻¹ m)` with `Σ = Σ⁺ + Σ⁻ + 2λI` and `m = m⁺ - m⁻`.
/// Returns `None` when the class means coincide, which calls for the trivial
/// classifier.
pub fn solve_beta(pos: &ClassGaussian, neg: &ClassGaussian, jitter: f64) -> Result<Option<Vec<f64>>> {
    let m: Vec<f64> = pos.mean.iter().zip(&neg.mean).map(|(a, b)| a - b).collect();
    if m.iter().all(|v| v.abs() <= MEAN_EPS) {
        return Ok(None);
    }
    let sigma = combined_covariance(pos, neg, jitter)?;
    let x = linalg::sym_solve(&sigma, &m)?;
    let norm = linalg::dot(&m, &x);
    if !(norm > 0.0) {
        return Err(EemError::SingularCovariance);
    }
    Ok(Some(x.iter().map(|v| 2.0 * v / norm).collect()))
}

fn class_covariance(g: &ClassGaussian, jitter: f64) -> SymMatrix {
    if jitter > 0.0 {
        g.covariance.matrix.add_ridge(jitter)
    } else {
        g.covariance.matrix.clone()
    }
}

fn combined_covariance(pos: &ClassGaussian, neg: &ClassGaussian, jitter: f64) -> Result<SymMatrix> {
    class_covariance(pos, jitter).add(&class_covariance(neg, jitter))
}

/// One dimensional class statistics after projection onto `β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedStats {
    pub mean_pos: f64,
    pub var_pos: f64,
    pub mean_neg: f64,
    pub var_neg: f64,
}

impl ProjectedStats {
    pub fn positive(&self) -> Result<Gaussian1D> {
        Gaussian1D::new(self.mean_pos, self.var_pos)
    }

    pub fn negative(&self) -> Result<Gaussian1D> {
        Gaussian1D::new(self.mean_neg, self.var_neg)
    }
}

/// Label assigned to a projected value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionRule {
    /// `+1` when `x ≥ t0`, else `-1`.
    OneThreshold { t0: f64 },
    /// `inside_label` on the closed interval `[t_lo, t_hi]`, the other label
    /// outside it.
    TwoThreshold { t_lo: f64, t_hi: f64, inside_label: i8 },
    Constant { label: i8 },
}

impl DecisionRule {
    pub fn apply(&self, x: f64) -> i8 {
        match *self {
            DecisionRule::OneThreshold { t0 } => {
                if x >= t0 {
                    POSITIVE
                } else {
                    NEGATIVE
                }
            }
            DecisionRule::TwoThreshold { t_lo, t_hi, inside_label } => {
                if t_lo <= x && x <= t_hi {
                    inside_label
                } else {
                    -inside_label
                }
            }
            DecisionRule::Constant { label } => label,
        }
    }
}

/// Relative variance gap under which the projected classes are treated as
/// having equal variance.
pub const EQUAL_VARIANCE_RTOL: f64 = 1e-9;

/// Points where `N(m₊,S₊)[t] = N(m₋,S₋)[t]`, turned into a decision rule.
pub fn compute_thresholds(m_pos: f64, s_pos: f64, m_neg: f64, s_neg: f64) -> Result<DecisionRule> {
    thresholds_with_offset(m_pos, s_pos, m_neg, s_neg, 0.0)
}

/// Decision rule for `ln N₊[t] + κ ≥ ln N₋[t]`, i.e. densities weighted by
/// `e^κ` against 1. `κ = 0` gives [`compute_thresholds`].
///
/// With `u = t - m₋` and `Δ = m₊ - m₋` the boundary solves
/// `(S₊-S₋)u² + 2ΔS₋u - Δ²S₋ + S₊S₋(ln(S₋/S₊) + 2κ) = 0`.
pub fn thresholds_with_offset(m_pos: f64, s_pos: f64, m_neg: f64, s_neg: f64, kappa: f64) -> Result<DecisionRule> {
    for s in [s_pos, s_neg] {
        if !(s > 0.0) || !s.is_finite() {
            return Err(EemError::NonPositiveVariance(s));
        }
    }
    let delta = m_pos - m_neg;
    if !(delta > 0.0) || !delta.is_finite() || !kappa.is_finite() {
        return Err(EemError::invalid(format!(
            "projected positive mean must exceed the negative one (gap {delta})"
        )));
    }

    if (s_pos - s_neg).abs() <= EQUAL_VARIANCE_RTOL * (s_pos + s_neg) {
        let t0 = if kappa == 0.0 && (delta - 2.0).abs() <= 1e-6 {
            m_neg + 1.0
        } else {
            let s = 0.5 * (s_pos + s_neg);
            m_neg + 0.5 * delta - kappa * s / delta
        };
        return Ok(DecisionRule::OneThreshold { t0 });
    }

    let a = s_pos - s_neg;
    let b_half = delta * s_neg;
    let log_ratio = (s_neg / s_pos).ln();
    let c = -delta * delta * s_neg + s_pos * s_neg * (log_ratio + 2.0 * kappa);
    let disc = s_pos * s_neg * (delta * delta + (s_neg - s_pos) * (log_ratio + 2.0 * kappa));
    // positive class wins where the quadratic is ≥ 0
    let smaller_var_label = if a < 0.0 { POSITIVE } else { NEGATIVE };
    if !(disc > 0.0) {
        return Ok(DecisionRule::Constant {
            label: -smaller_var_label,
        });
    }
    let q = -(b_half + disc.sqrt());
    let (r1, r2) = (q / a, c / q);
    let (u_lo, u_hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    let (t_lo, t_hi) = (m_neg + u_lo, m_neg + u_hi);
    if !(t_lo < t_hi) {
        return Ok(DecisionRule::Constant {
            label: -smaller_var_label,
        });
    }
    Ok(DecisionRule::TwoThreshold {
        t_lo,
        t_hi,
        inside_label: smaller_var_label,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// `λ ≥ 0` added to the diagonal of each class covariance.
    pub jitter: f64,
    pub divisor: CovDivisor,
    /// Class priors `(P₊, P₋)` used by [`EemModel::predict_proba`].
    pub priors: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            jitter: 0.0,
            divisor: CovDivisor::Samples,
            priors: (0.5, 0.5),
        }
    }
}

/// The trained linear part of the model: `β`, projected class statistics
/// and the decision rule. `projected` is `None` for the trivial classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminant {
    pub beta: Vec<f64>,
    pub projected: Option<ProjectedStats>,
    pub rule: DecisionRule,
}

impl Discriminant {
    /// Fits on feature-space samples of each class.
    pub fn fit(hp: &Matrix, hn: &Matrix, opts: &FitOptions) -> Result<Discriminant> {
        if !(opts.jitter >= 0.0) {
            return Err(EemError::invalid("jitter must be non-negative"));
        }
        let (pos, neg) = fit_class_gaussians(hp, hn, opts.divisor)?;
        Discriminant::from_gaussians(&pos, &neg, opts.jitter)
    }

    pub fn from_gaussians(pos: &ClassGaussian, neg: &ClassGaussian, jitter: f64) -> Result<Discriminant> {
        let h = pos.mean.len();
        let Some(beta) = solve_beta(pos, neg, jitter)? else {
            let label = if pos.count >= neg.count { POSITIVE } else { NEGATIVE };
            return Ok(Discriminant {
                beta: vec![0.0; h],
                projected: None,
                rule: DecisionRule::Constant { label },
            });
        };
        let stats = ProjectedStats {
            mean_pos: linalg::dot(&beta, &pos.mean),
            var_pos: class_covariance(pos, jitter).quad_form(&beta),
            mean_neg: linalg::dot(&beta, &neg.mean),
            var_neg: class_covariance(neg, jitter).quad_form(&beta),
        };
        let rule = compute_thresholds(stats.mean_pos, stats.var_pos, stats.mean_neg, stats.var_neg)?;
        Ok(Discriminant {
            beta,
            projected: Some(stats),
            rule,
        })
    }

    pub fn is_trivial(&self) -> bool {
        self.projected.is_none()
    }

    /// `βᵀh` for every row of `h`.
    pub fn project(&self, h: &Matrix) -> Result<Vec<f64>> {
        h.matvec(&self.beta)
    }

    pub fn predict_projected(&self, z: &[f64]) -> Vec<i8> {
        z.iter().map(|&v| self.rule.apply(v)).collect()
    }

    /// `P(+ | z)` from the projected class densities and priors.
    pub fn proba_projected(&self, z: &[f64], priors: (f64, f64)) -> Result<Vec<f64>> {
        let (pp, pn) = priors;
        let Some(stats) = self.projected else {
            return Ok(vec![pp / (pp + pn); z.len()]);
        };
        let (gp, gn) = (stats.positive()?, stats.negative()?);
        let (lp, ln) = (pp.ln(), pn.ln());
        Ok(z
            .iter()
            .map(|&v| {
                let a = gp.log_density(v) + lp;
                let b = gn.log_density(v) + ln;
                let p = 1.0 / (1.0 + (b - a).exp());
                if p.is_finite() {
                    p
                } else if self.rule.apply(v) == POSITIVE {
                    1.0
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// Labels by `argmax_y C_y P(z | y)`.
    pub fn predict_cost_sensitive_projected(&self, z: &[f64], c_pos: f64, c_neg: f64) -> Result<Vec<i8>> {
        if !(c_pos > 0.0 && c_neg > 0.0) || !c_pos.is_finite() || !c_neg.is_finite() {
            return Err(EemError::invalid(format!("costs must be positive, got {c_pos},{c_neg}")));
        }
        let rule = match self.projected {
            None => self.rule,
            Some(s) => thresholds_with_offset(s.mean_pos, s.var_pos, s.mean_neg, s.var_neg, (c_pos / c_neg).ln())?,
        };
        Ok(z.iter().map(|&v| rule.apply(v)).collect())
    }
}

/// Feature map plus discriminant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EemModel {
    pub map: FeatureMap,
    pub discriminant: Discriminant,
    pub priors: (f64, f64),
}

impl EemModel {
    pub fn fit(map: FeatureMap, xp: &Matrix, xn: &Matrix, opts: &FitOptions) -> Result<EemModel> {
        if xp.nrows() == 0 || xn.nrows() == 0 {
            return Err(EemError::MissingClass);
        }
        let hp = map.apply(xp)?;
        let hn = map.apply(xn)?;
        let discriminant = Discriminant::fit(&hp, &hn, opts)?;
        Ok(EemModel {
            map,
            discriminant,
            priors: opts.priors,
        })
    }

    pub fn fit_dataset(map: FeatureMap, ds: &Dataset, opts: &FitOptions) -> Result<EemModel> {
        let (xp, xn) = dataset::split_by_class(ds.features(), ds.labels());
        EemModel::fit(map, &xp, &xn, opts)
    }

    pub fn input_dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn is_trivial(&self) -> bool {
        self.discriminant.is_trivial()
    }

    /// `βᵀφ(x)` for every row.
    pub fn project(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.discriminant.project(&self.map.apply(x)?)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<i8>> {
        Ok(self.discriminant.predict_projected(&self.project(x)?))
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.discriminant.proba_projected(&self.project(x)?, self.priors)
    }

    pub fn predict_cost_sensitive(&self, x: &Matrix, c_pos: f64, c_neg: f64) -> Result<Vec<i8>> {
        let z = self.project(x)?;
        self.discriminant.predict_cost_sensitive_projected(&z, c_pos, c_neg)
    }

    /// Folds `K(X̃,X̃)^{-1/2}` into `β` so the hidden layer becomes the raw
    /// kernel against the landmarks.
    pub fn collapse_eekm(&self) -> Result<EemModel> {
        let nm = match &self.map {
            FeatureMap::Nystrom(nm) => nm,
            FeatureMap::Kernel(_) => return Err(EemError::AlreadyCollapsed),
            FeatureMap::Random(_) => return Err(EemError::NotNystrom),
        };
        let beta = nm.kroot.as_matrix().matvec(&self.discriminant.beta)?;
        Ok(EemModel {
            map: FeatureMap::Kernel(KernelMap {
                landmarks: nm.landmarks.clone(),
                gamma: nm.gamma,
            }),
            discriminant: Discriminant {
                beta,
                ..self.discriminant.clone()
            },
            priors: self.priors,
        })
    }
}
