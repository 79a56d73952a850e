//! Feature maps into the hidden space: random activations (EEM), the
//! Nystrom approximation of the Gaussian kernel (EEKM), and the raw kernel
//! map left behind when an EEKM model is collapsed.
//!
//! Every map is applied one row at a time with a fixed accumulation order,
//! so mapping a batch gives bit-identical rows to mapping each row alone.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{EemError, Result};
use crate::linalg::{self, Matrix, SymMatrix};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `1 / (1 + exp(-<w,x> + b))`
    Sig,
    /// `1 / (1 + exp(-<w,x>/d + b))`
    Nsig,
    /// `exp(-b ||w - x||²)`
    Rbf,
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Sig => "sig",
            Activation::Nsig => "nsig",
            Activation::Rbf => "rbf",
        })
    }
}

/// Hidden layer with weights and biases drawn from U[0,1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomMap {
    pub activation: Activation,
    /// `h × d`, one row per hidden unit.
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub seed: u64,
}

impl RandomMap {
    pub fn sample(d: usize, h: usize, activation: Activation, seed: u64) -> Result<RandomMap> {
        if h == 0 {
            return Err(EemError::invalid("h must be ≥ 1"));
        }
        if d == 0 {
            return Err(EemError::invalid("input dimension must be ≥ 1"));
        }
        let mut rng = rng::stream(seed, "random-map", 0);
        let weights = Matrix::from_fn(h, d, |_, _| rng.random::<f64>());
        let biases = (0..h).map(|_| rng.random::<f64>()).collect();
        Ok(RandomMap {
            activation,
            weights,
            biases,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let (h, d) = (self.hidden_dim(), self.input_dim());
        let wt = self.weights.transpose();
        let mut out = Matrix::zeros(x.nrows(), h);
        let mut acc = vec![0.0; h];
        for i in 0..x.nrows() {
            let row = x.row(i);
            acc.fill(0.0);
            match self.activation {
                Activation::Sig | Activation::Nsig => {
                    for (k, &xk) in row.iter().enumerate() {
                        for (a, w) in acc.iter_mut().zip(wt.row(k)) {
                            *a += w * xk;
                        }
                    }
                    let scale = if self.activation == Activation::Nsig { d as f64 } else { 1.0 };
                    for ((o, a), b) in out.row_mut(i).iter_mut().zip(&acc).zip(&self.biases) {
                        *o = 1.0 / (1.0 + (-(a / scale) + b).exp());
                    }
                }
                Activation::Rbf => {
                    for (k, &xk) in row.iter().enumerate() {
                        for (a, w) in acc.iter_mut().zip(wt.row(k)) {
                            let diff = w - xk;
                            *a += diff * diff;
                        }
                    }
                    for ((o, a), b) in out.row_mut(i).iter_mut().zip(&acc).zip(&self.biases) {
                        *o = (-b * a).exp();
                    }
                }
            }
        }
        out
    }
}

/// Squared distances from `x` to every column of `bt` (a `d × m` matrix),
/// accumulated coordinate by coordinate.
fn sq_dists_into(x: &[f64], bt: &Matrix, acc: &mut [f64]) {
    acc.fill(0.0);
    for (k, &xk) in x.iter().enumerate() {
        for (a, b) in acc.iter_mut().zip(bt.row(k)) {
            let diff = b - xk;
            *a += diff * diff;
        }
    }
}

/// `K[i][j] = exp(-γ ||a_i - b_j||²)`.
pub fn gaussian_gram(gamma: f64, a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !(gamma > 0.0) {
        return Err(EemError::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if a.ncols() != b.ncols() {
        return Err(EemError::DimensionMismatch {
            expected: b.ncols(),
            got: a.ncols(),
        });
    }
    let bt = b.transpose();
    let mut out = Matrix::zeros(a.nrows(), b.nrows());
    for i in 0..a.nrows() {
        let row = out.row_mut(i);
        sq_dists_into(a.row(i), &bt, row);
        row.iter_mut().for_each(|v| *v = (-gamma * *v).exp());
    }
    Ok(out)
}

/// Nystrom map `φ(x) = K(X̃,X̃)^{-1/2} K(X̃, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NystromMap {
    pub landmarks: Matrix,
    pub gamma: f64,
    pub kroot: SymMatrix,
    pub seed: u64,
}

impl NystromMap {
    /// Picks `h` distinct training rows as landmarks and factors their Gram
    /// matrix. Eigenvalues below `1e-10 λ_max` are dropped, which absorbs
    /// duplicate landmarks.
    pub fn fit(x: &Matrix, h: usize, gamma: f64, seed: u64) -> Result<NystromMap> {
        if h == 0 {
            return Err(EemError::invalid("h must be ≥ 1"));
        }
        if h > x.nrows() {
            return Err(EemError::invalid(format!(
                "h = {h} landmarks requested from {} rows",
                x.nrows()
            )));
        }
        let mut rng = rng::stream(seed, "nystrom-landmarks", 0);
        let order = rng::shuffled(x.nrows(), &mut rng);
        let landmarks = x.select_rows(&order[..h]);
        let gram = gaussian_gram(gamma, &landmarks, &landmarks)?;
        let kroot = linalg::sym_inv_sqrt(&SymMatrix::symmetrize(gram), linalg::DEFAULT_EIG_TOL)?;
        Ok(NystromMap {
            landmarks,
            gamma,
            kroot,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.landmarks.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.landmarks.nrows()
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let h = self.hidden_dim();
        let lt = self.landmarks.transpose();
        let kroot = self.kroot.as_matrix();
        let mut k = vec![0.0; h];
        let mut out = Matrix::zeros(x.nrows(), h);
        for i in 0..x.nrows() {
            sq_dists_into(x.row(i), &lt, &mut k);
            k.iter_mut().for_each(|v| *v = (-self.gamma * *v).exp());
            // Kroot is symmetric: row i of the output is Σ_j k_j Kroot[j, :]
            let o = out.row_mut(i);
            for (j, &kj) in k.iter().enumerate() {
                for (ol, r) in o.iter_mut().zip(kroot.row(j)) {
                    *ol += kj * r;
                }
            }
        }
        out
    }
}

/// Raw Gaussian kernel evaluations against a fixed set of landmarks. This is
/// the hidden layer of a collapsed EEKM model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMap {
    pub landmarks: Matrix,
    pub gamma: f64,
}

impl KernelMap {
    fn apply(&self, x: &Matrix) -> Matrix {
        let lt = self.landmarks.transpose();
        let mut out = Matrix::zeros(x.nrows(), self.landmarks.nrows());
        for i in 0..x.nrows() {
            let row = out.row_mut(i);
            sq_dists_into(x.row(i), &lt, row);
            row.iter_mut().for_each(|v| *v = (-self.gamma * *v).exp());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureMap {
    Random(RandomMap),
    Nystrom(NystromMap),
    Kernel(KernelMap),
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Random(m) => m.input_dim(),
            FeatureMap::Nystrom(m) => m.input_dim(),
            FeatureMap::Kernel(m) => m.landmarks.ncols(),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        match self {
            FeatureMap::Random(m) => m.hidden_dim(),
            FeatureMap::Nystrom(m) => m.hidden_dim(),
            FeatureMap::Kernel(m) => m.landmarks.nrows(),
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.ncols() != self.input_dim() {
            return Err(EemError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(match self {
            FeatureMap::Random(m) => m.apply(x),
            FeatureMap::Nystrom(m) => m.apply(x),
            FeatureMap::Kernel(m) => m.apply(x),
        })
    }
}

impl From<RandomMap> for FeatureMap {
    fn from(m: RandomMap) -> Self {
        FeatureMap::Random(m)
    }
}

impl From<NystromMap> for FeatureMap {
    fn from(m: NystromMap) -> Self {
        FeatureMap::Nystrom(m)
    }
}
