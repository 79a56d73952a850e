//! Extreme Entropy Machines.
//!
//! Binary classifiers that map inputs into a high dimensional feature space
//! (random activations for EEM, a Nystrom kernel approximation for EEKM),
//! model each class there as a Gaussian with a Ledoit-Wolf shrunk covariance
//! and pick the linear projection that maximises the Cauchy-Schwarz
//! divergence between the projected classes. Training is closed form.
//!
//! The crate also carries a weighted ELM baseline, the information
//! theoretic quantities used for model selection, and the evaluation
//! harness (stratified cross-validation, grid search, entropy based tuning).

pub mod cli;
pub mod dataset;
pub mod eem;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod feature_map;
pub mod linalg;
pub mod metrics;
pub mod model_file;
pub mod rng;
pub mod welm;

pub use dataset::Dataset;
pub use eem::{DecisionRule, Discriminant, EemModel, FitOptions};
pub use error::{EemError, Result};
pub use feature_map::{Activation, FeatureMap, NystromMap, RandomMap};
pub use linalg::{Matrix, SymMatrix};
pub use welm::{Weighting, WelmModel};
