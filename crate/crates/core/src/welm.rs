//! Weighted extreme learning machine baseline: least squares on the hidden
//! layer with per-class row weights.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, NEGATIVE, POSITIVE};
use crate::error::{EemError, Result};
use crate::feature_map::FeatureMap;
use crate::linalg::{self, Matrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Plain least squares, `β = H†Y`.
    None,
    /// Row weight `√(1/|class|)`.
    #[default]
    Balanced,
    /// Row weight `√(|bigger class| / |class|)`.
    BalancedRatio,
}

impl Weighting {
    fn row_weights(self, labels: &[i8]) -> Vec<f64> {
        let pos = labels.iter().filter(|&&l| l == POSITIVE).count() as f64;
        let neg = labels.len() as f64 - pos;
        let big = pos.max(neg);
        labels
            .iter()
            .map(|&l| {
                let size = if l == POSITIVE { pos } else { neg };
                match self {
                    Weighting::None => 1.0,
                    Weighting::Balanced => (1.0 / size).sqrt(),
                    Weighting::BalancedRatio => (big / size).sqrt(),
                }
            })
            .collect()
    }
}

/// `β = (BH)† (BY)` for hidden activations `h` and ±1 labels.
pub fn solve_weighted(h: &Matrix, labels: &[i8], weighting: Weighting) -> Result<Vec<f64>> {
    if h.nrows() != labels.len() {
        return Err(EemError::invalid(format!(
            "{} hidden rows but {} labels",
            h.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(EemError::invalid("cannot fit on an empty sample"));
    }
    let w = weighting.row_weights(labels);
    let mut bh = h.clone();
    for (i, wi) in w.iter().enumerate() {
        bh.row_mut(i).iter_mut().for_each(|v| *v *= wi);
    }
    let by: Vec<f64> = labels.iter().zip(&w).map(|(&l, wi)| f64::from(l) * wi).collect();
    let pinv = linalg::pseudoinverse(&bh, linalg::default_pinv_tol(bh.nrows(), bh.ncols()))?;
    pinv.matvec(&by)
}

/// Label by sign of the projection, with `sign(0) = +1`.
pub fn sign_labels(z: &[f64]) -> Vec<i8> {
    z.iter().map(|&v| if v >= 0.0 { POSITIVE } else { NEGATIVE }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelmModel {
    pub map: FeatureMap,
    pub beta: Vec<f64>,
    pub weighting: Weighting,
}

impl WelmModel {
    pub fn fit(map: FeatureMap, x: &Matrix, labels: &[i8], weighting: Weighting) -> Result<WelmModel> {
        let h = map.apply(x)?;
        let beta = solve_weighted(&h, labels, weighting)?;
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(EemError::invalid("least squares solution is not finite"));
        }
        Ok(WelmModel { map, beta, weighting })
    }

    pub fn fit_dataset(map: FeatureMap, ds: &Dataset, weighting: Weighting) -> Result<WelmModel> {
        WelmModel::fit(map, ds.features(), ds.labels(), weighting)
    }

    pub fn input_dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn project(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.map.apply(x)?.matvec(&self.beta)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<i8>> {
        Ok(sign_labels(&self.project(x)?))
    }
}
