//! Confusion counts, GMean and Spearman rank correlation.

use serde::{Deserialize, Serialize};

use crate::error::{EemError, Result};

/// Confusion counts with +1 as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Recall on positives; 1 when there are none.
    pub fn positive_recall(&self) -> f64 {
        recall(self.tp, self.fn_)
    }

    /// Recall on negatives; 1 when there are none.
    pub fn negative_recall(&self) -> f64 {
        recall(self.tn, self.fp)
    }
}

fn recall(hit: usize, miss: usize) -> f64 {
    if hit + miss == 0 {
        1.0
    } else {
        hit as f64 / (hit + miss) as f64
    }
}

pub fn confusion(y_true: &[i8], y_pred: &[i8]) -> Result<Confusion> {
    if y_true.len() != y_pred.len() {
        return Err(EemError::invalid(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut c = Confusion::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t > 0, p > 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `√(TP/(TP+FN) · TN/(TN+FP))`. A class absent from the evaluated set
/// contributes a factor of 1.
pub fn gmean(c: &Confusion) -> f64 {
    (c.positive_recall() * c.negative_recall()).sqrt()
}

/// Fractional ranks starting at 1; ties share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's rank correlation. Returns 0 when either argument has no rank
/// variance.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(EemError::invalid(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(EemError::invalid("spearman needs at least 2 pairs"));
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}
