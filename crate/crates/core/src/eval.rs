//! Evaluation protocol: repeated stratified cross-validation, grid search,
//! divergence based model selection on the training set, the surrogate rank
//! experiment, the hidden size sweep and training benchmarks.

use std::time::Instant;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, POSITIVE};
use crate::eem::{EemModel, FitOptions};
use crate::entropy::{self, DcsFormula, Gaussian1D};
use crate::error::{EemError, Result};
use crate::feature_map::{Activation, FeatureMap, NystromMap, RandomMap};
use crate::linalg;
use crate::metrics;
use crate::rng;
use crate::welm::{Weighting, WelmModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Eem,
    Eekm,
    Welm,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Eem => "eem",
            Algorithm::Eekm => "eekm",
            Algorithm::Welm => "welm",
        })
    }
}

/// One point of a hyperparameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub algorithm: Algorithm,
    pub activation: Option<Activation>,
    pub h: usize,
    pub gamma: Option<f64>,
    pub seed: u64,
}

impl ModelConfig {
    pub fn eem(activation: Activation, h: usize, seed: u64) -> Self {
        ModelConfig {
            algorithm: Algorithm::Eem,
            activation: Some(activation),
            h,
            gamma: None,
            seed,
        }
    }

    pub fn eekm(h: usize, gamma: f64, seed: u64) -> Self {
        ModelConfig {
            algorithm: Algorithm::Eekm,
            activation: None,
            h,
            gamma: Some(gamma),
            seed,
        }
    }

    pub fn welm(activation: Activation, h: usize, seed: u64) -> Self {
        ModelConfig {
            algorithm: Algorithm::Welm,
            activation: Some(activation),
            h,
            gamma: None,
            seed,
        }
    }

    pub fn with_h(self, h: usize) -> Self {
        ModelConfig { h, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(EemError::invalid("h must be ≥ 1"));
        }
        match self.algorithm {
            Algorithm::Eekm => match self.gamma {
                Some(g) if g > 0.0 && g.is_finite() => Ok(()),
                _ => Err(EemError::invalid("eekm requires a positive gamma")),
            },
            Algorithm::Eem | Algorithm::Welm if self.activation.is_none() => {
                Err(EemError::invalid(format!("{} requires an activation", self.algorithm)))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::Eekm => format!("eekm h={} gamma={:e}", self.h, self.gamma.unwrap_or(f64::NAN)),
            _ => format!(
                "{}/{} h={}",
                self.algorithm,
                self.activation.map(|a| a.to_string()).unwrap_or_default(),
                self.h
            ),
        }
    }

    /// Grid order used for tie-breaking: smaller `h`, then smaller `γ`.
    fn tie_key(&self) -> (usize, f64) {
        (self.h, self.gamma.unwrap_or(0.0))
    }
}

/// Every `h` for one activation.
pub fn h_grid(template: ModelConfig, hs: &[usize]) -> Vec<ModelConfig> {
    hs.iter().map(|&h| template.with_h(h)).collect()
}

/// Every `(h, γ)` pair for EEKM.
pub fn eekm_grid(hs: &[usize], gammas: &[f64], seed: u64) -> Vec<ModelConfig> {
    hs.iter()
        .flat_map(|&h| gammas.iter().map(move |&g| ModelConfig::eekm(h, g, seed)))
        .collect()
}

pub const DEFAULT_H_GRID: [usize; 5] = [50, 100, 250, 500, 1000];

/// `γ = 10⁻¹⁰, …, 10⁰`.
pub fn default_gamma_grid() -> Vec<f64> {
    (-10..=0).map(|e| 10f64.powi(e)).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub fit: FitOptions,
    pub weighting: Weighting,
}

/// A fitted EEM/EEKM or WELM model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum TrainedModel {
    Eem(EemModel),
    Welm(WelmModel),
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        match self {
            TrainedModel::Eem(m) => m.input_dim(),
            TrainedModel::Welm(m) => m.input_dim(),
        }
    }

    pub fn project(&self, x: &linalg::Matrix) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Eem(m) => m.project(x),
            TrainedModel::Welm(m) => m.project(x),
        }
    }

    pub fn predict(&self, x: &linalg::Matrix) -> Result<Vec<i8>> {
        match self {
            TrainedModel::Eem(m) => m.predict(x),
            TrainedModel::Welm(m) => m.predict(x),
        }
    }

    pub fn map(&self) -> &FeatureMap {
        match self {
            TrainedModel::Eem(m) => &m.map,
            TrainedModel::Welm(m) => &m.map,
        }
    }
}

/// Builds the feature map for `cfg` and fits the model on `ds` as given
/// (no scaling is applied here).
pub fn train(cfg: &ModelConfig, ds: &Dataset, map_seed: u64, opts: &TrainOptions) -> Result<TrainedModel> {
    cfg.validate()?;
    if ds.count(POSITIVE) == 0 || ds.count(POSITIVE) == ds.len() {
        return Err(EemError::MissingClass);
    }
    match cfg.algorithm {
        Algorithm::Eem => {
            let map = RandomMap::sample(ds.dim(), cfg.h, cfg.activation.expect("validated"), map_seed)?;
            Ok(TrainedModel::Eem(EemModel::fit_dataset(map.into(), ds, &opts.fit)?))
        }
        Algorithm::Eekm => {
            let map = NystromMap::fit(ds.features(), cfg.h, cfg.gamma.expect("validated"), map_seed)?;
            Ok(TrainedModel::Eem(EemModel::fit_dataset(map.into(), ds, &opts.fit)?))
        }
        Algorithm::Welm => {
            let map = RandomMap::sample(ds.dim(), cfg.h, cfg.activation.expect("validated"), map_seed)?;
            Ok(TrainedModel::Welm(WelmModel::fit_dataset(map.into(), ds, opts.weighting)?))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Fit the [0,1] scaler once on the whole dataset instead of per
    /// training fold.
    pub scale_globally: bool,
    pub train: TrainOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 10,
            repeats: 10,
            seed: 0,
            scale_globally: false,
            train: TrainOptions::default(),
        }
    }
}

/// Cross-validation outcome for one configuration. GMean values are
/// fractions in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ModelConfig,
    pub fold_gmeans: Vec<f64>,
    pub train_seconds: Vec<f64>,
    /// Fold positions (in plan order) skipped because the training part
    /// lacked a class.
    pub skipped_folds: Vec<usize>,
    pub mean: f64,
    /// Standard deviation over folds, `1/n` convention.
    pub std: f64,
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl EvalReport {
    /// Equality of everything except wall-clock timings.
    pub fn same_scores(&self, other: &EvalReport) -> bool {
        self.config == other.config
            && self.fold_gmeans == other.fold_gmeans
            && self.skipped_folds == other.skipped_folds
            && self.mean == other.mean
            && self.std == other.std
    }
}

/// Mean and `1/n` standard deviation, summed in sorted order so the result
/// does not depend on the order folds finished in.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / n).sqrt())
}

enum FoldOutcome {
    Scored { gmean: f64, seconds: f64 },
    Skipped,
}

/// Repeated stratified k-fold cross-validation of `cfg`. The feature map of
/// fold `f` is drawn from a seed derived from `(cfg.seed, f)`.
pub fn cross_validate(ds: &Dataset, cfg: &ModelConfig, opts: &CvOptions) -> Result<EvalReport> {
    cfg.validate()?;
    let plan = dataset::stratified_kfold(ds.labels(), opts.k, opts.repeats, opts.seed)?;
    let global = if opts.scale_globally {
        Some(dataset::apply_scaler(&dataset::fit_scaler(ds), ds)?)
    } else {
        None
    };

    let outcomes: Vec<Result<FoldOutcome>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(pos, fold)| {
            let source = global.as_ref().unwrap_or(ds);
            let mut train_ds = source.subset(&fold.train);
            let mut test_ds = source.subset(&fold.test);
            if train_ds.count(POSITIVE) == 0 || train_ds.count(POSITIVE) == train_ds.len() {
                return Ok(FoldOutcome::Skipped);
            }
            if global.is_none() {
                let scaler = dataset::fit_scaler(&train_ds);
                train_ds = dataset::apply_scaler(&scaler, &train_ds)?;
                test_ds = dataset::apply_scaler(&scaler, &test_ds)?;
            }
            let map_seed = rng::derive_seed(cfg.seed, "fold-map", pos as u64);
            let start = Instant::now();
            let model = train(cfg, &train_ds, map_seed, &opts.train)?;
            let seconds = start.elapsed().as_secs_f64();
            let predicted = model.predict(test_ds.features())?;
            let c = metrics::confusion(test_ds.labels(), &predicted)?;
            Ok(FoldOutcome::Scored {
                gmean: metrics::gmean(&c),
                seconds,
            })
        })
        .collect();

    let mut fold_gmeans = Vec::new();
    let mut train_seconds = Vec::new();
    let mut skipped_folds = Vec::new();
    for (pos, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            FoldOutcome::Scored { gmean, seconds } => {
                fold_gmeans.push(gmean);
                train_seconds.push(seconds);
            }
            FoldOutcome::Skipped => {
                log::warn!("fold {pos} skipped: training part has a single class");
                skipped_folds.push(pos);
            }
        }
    }
    if fold_gmeans.is_empty() {
        return Err(EemError::MissingClass);
    }
    let (mean, std) = mean_std(&fold_gmeans);
    Ok(EvalReport {
        config: *cfg,
        fold_gmeans,
        train_seconds,
        skipped_folds,
        mean,
        std,
        k: opts.k,
        repeats: opts.repeats,
        seed: opts.seed,
    })
}

/// Index of the best score; ties go to smaller `h`, then smaller `γ`.
fn argmax_with_ties(items: &[(ModelConfig, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (cfg, score)) in items.iter().enumerate() {
        if !score.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let (bcfg, bscore) = &items[b];
                let better = *score > *bscore
                    || (*score == *bscore && cfg.tie_key().partial_cmp(&bcfg.tie_key()) == Some(std::cmp::Ordering::Less));
                Some(if better { i } else { b })
            }
        };
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ModelConfig,
    pub reports: Vec<EvalReport>,
    /// Configurations that could not be evaluated, with the reason.
    pub failed: Vec<(ModelConfig, String)>,
}

impl GridResult {
    pub fn best_report(&self) -> &EvalReport {
        self.reports
            .iter()
            .find(|r| r.config == self.best)
            .expect("best config has a report")
    }
}

/// Cross-validates every configuration and picks the highest mean GMean.
/// Configurations that fail to fit are recorded and skipped.
pub fn grid_search_cv(ds: &Dataset, grid: &[ModelConfig], opts: &CvOptions) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(EemError::invalid("empty grid"));
    }
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for cfg in grid {
        match cross_validate(ds, cfg, opts) {
            Ok(r) => {
                log::info!("{}: {:.2} ± {:.2}", cfg.label(), 100.0 * r.mean, 100.0 * r.std);
                reports.push(r)
            }
            Err(e) => {
                log::warn!("{} skipped: {e}", cfg.label());
                failed.push((*cfg, e.to_string()));
            }
        }
    }
    let scored: Vec<(ModelConfig, f64)> = reports.iter().map(|r| (r.config, r.mean)).collect();
    let best = argmax_with_ties(&scored).ok_or(EemError::NoViableConfig)?;
    Ok(GridResult {
        best: scored[best].0,
        reports,
        failed,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectedVariance {
    /// Empirical variance of `βᵀh` over the training rows of each class.
    #[default]
    Empirical,
    /// `βᵀΣ±β` from the fitted class covariances (EEM/EEKM only).
    Model,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TuneMethod {
    DcsGauss,
    DcsKde,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub method: TuneMethod,
    pub variance: ProjectedVariance,
    pub formula: DcsFormula,
    pub train: TrainOptions,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            method: TuneMethod::DcsGauss,
            variance: ProjectedVariance::Empirical,
            formula: DcsFormula::Corrected,
            train: TrainOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub best: ModelConfig,
    pub best_score: f64,
    /// Score per configuration; `None` when the fit or the score failed.
    pub scores: Vec<(ModelConfig, Option<f64>)>,
    /// Number of model fits performed (one per configuration).
    pub fits: usize,
}

fn class_projections(z: &[f64], labels: &[i8]) -> (Vec<f64>, Vec<f64>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&v, &l) in z.iter().zip(labels) {
        if l == POSITIVE {
            pos.push(v);
        } else {
            neg.push(v);
        }
    }
    (pos, neg)
}

fn empirical_gaussian(values: &[f64]) -> Result<Gaussian1D> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Gaussian1D::new(mean, var)
}

fn divergence_score(model: &TrainedModel, ds: &Dataset, opts: &TuneOptions) -> Result<f64> {
    let z = model.project(ds.features())?;
    let (zp, zn) = class_projections(&z, ds.labels());
    match opts.method {
        TuneMethod::DcsKde => entropy::dcs_kde_1d(&zp, &zn),
        TuneMethod::DcsGauss => {
            let (gp, gn) = match (opts.variance, model) {
                (ProjectedVariance::Model, TrainedModel::Eem(m)) => {
                    let stats = m
                        .discriminant
                        .projected
                        .ok_or_else(|| EemError::invalid("trivial model has no projected statistics"))?;
                    (stats.positive()?, stats.negative()?)
                }
                (ProjectedVariance::Model, TrainedModel::Welm(_)) => {
                    return Err(EemError::invalid("model variance is only defined for EEM models"))
                }
                (ProjectedVariance::Empirical, _) => (empirical_gaussian(&zp)?, empirical_gaussian(&zn)?),
            };
            Ok(entropy::dcs_gaussian_1d_with(&gp, &gn, opts.formula))
        }
    }
}

/// Fits every configuration once on `ds` (scaled to [0,1] as a whole) and
/// selects the one whose projected classes are most divergent. No folds are
/// retrained.
pub fn tune(ds: &Dataset, grid: &[ModelConfig], opts: &TuneOptions) -> Result<TuneReport> {
    if grid.is_empty() {
        return Err(EemError::invalid("empty grid"));
    }
    let scaled = dataset::apply_scaler(&dataset::fit_scaler(ds), ds)?;
    let scored: Vec<(ModelConfig, Option<f64>)> = grid
        .par_iter()
        .map(|cfg| {
            let score = train(cfg, &scaled, cfg.seed, &opts.train).and_then(|m| divergence_score(&m, &scaled, opts));
            match score {
                Ok(s) if s.is_finite() => (*cfg, Some(s)),
                Ok(s) => {
                    log::warn!("{}: non-finite score {s}", cfg.label());
                    (*cfg, None)
                }
                Err(e) => {
                    log::warn!("{} skipped: {e}", cfg.label());
                    (*cfg, None)
                }
            }
        })
        .collect();
    let flat: Vec<(ModelConfig, f64)> = scored.iter().map(|(c, s)| (*c, s.unwrap_or(f64::NAN))).collect();
    let best = argmax_with_ties(&flat).ok_or(EemError::NoViableConfig)?;
    Ok(TuneReport {
        best: flat[best].0,
        best_score: flat[best].1,
        scores: scored,
        fits: grid.len(),
    })
}

pub fn tune_by_gaussian_dcs(ds: &Dataset, grid: &[ModelConfig], opts: &TuneOptions) -> Result<TuneReport> {
    tune(ds, grid, &TuneOptions { method: TuneMethod::DcsGauss, ..*opts })
}

pub fn tune_by_kde_dcs(ds: &Dataset, grid: &[ModelConfig], opts: &TuneOptions) -> Result<TuneReport> {
    tune(ds, grid, &TuneOptions { method: TuneMethod::DcsKde, ..*opts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpearmanRow {
    pub dim: usize,
    pub correlation: f64,
    /// Number of (projection, operator) pairs that entered the correlation.
    pub pairs: usize,
}

/// For each hidden size, draws `n_projections` random maps and, per map,
/// `n_operators` standard normal `β`, then correlates the mean separation
/// term with the full Gaussian divergence of the projected classes.
pub fn spearman_experiment(
    ds: &Dataset,
    dims: &[usize],
    n_projections: usize,
    n_operators: usize,
    activation: Activation,
    seed: u64,
) -> Result<Vec<SpearmanRow>> {
    let (xp, xn) = ds.split_by_class();
    if xp.nrows() == 0 || xn.nrows() == 0 {
        return Err(EemError::MissingClass);
    }
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        let per_map: Vec<Result<Vec<(f64, f64)>>> = (0..n_projections)
            .into_par_iter()
            .map(|p| {
                let map_seed = rng::derive_seed(seed, &format!("spearman-map-{dim}"), p as u64);
                let map = FeatureMap::from(RandomMap::sample(ds.dim(), dim, activation, map_seed)?);
                let (gp, gn) = crate::eem::fit_class_gaussians(&map.apply(&xp)?, &map.apply(&xn)?, Default::default())?;
                let mut rng = rng::stream(seed, &format!("spearman-beta-{dim}"), p as u64);
                let mut pairs = Vec::with_capacity(n_operators);
                for _ in 0..n_operators {
                    let beta: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let f = Gaussian1D::new(linalg::dot(&beta, &gp.mean), gp.covariance.matrix.quad_form(&beta));
                    let g = Gaussian1D::new(linalg::dot(&beta, &gn.mean), gn.covariance.matrix.quad_form(&beta));
                    if let (Ok(f), Ok(g)) = (f, g) {
                        pairs.push((entropy::dcs_last_term(&f, &g), entropy::dcs_gaussian_1d(&f, &g)));
                    }
                }
                Ok(pairs)
            })
            .collect();
        let mut surrogate = Vec::new();
        let mut full = Vec::new();
        for pairs in per_map {
            for (a, b) in pairs? {
                surrogate.push(a);
                full.push(b);
            }
        }
        let correlation = if surrogate.len() >= 2 {
            metrics::spearman(&surrogate, &full)?
        } else {
            f64::NAN
        };
        rows.push(SpearmanRow {
            dim,
            correlation,
            pairs: surrogate.len(),
        });
    }
    Ok(rows)
}

/// Cross-validates `template` at every hidden size in `hs`.
pub fn stability_sweep(ds: &Dataset, hs: &[usize], template: &ModelConfig, opts: &CvOptions) -> Result<Vec<EvalReport>> {
    if hs.is_empty() {
        return Err(EemError::invalid("no hidden sizes given"));
    }
    hs.iter().map(|&h| cross_validate(ds, &template.with_h(h), opts)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ModelConfig,
    pub n: usize,
    pub runs: Vec<f64>,
    /// Median of `runs`.
    pub seconds: f64,
}

/// Median wall-clock time of `runs` trainings of `cfg` on the whole scaled
/// dataset.
pub fn bench(ds: &Dataset, cfg: &ModelConfig, opts: &TrainOptions, runs: usize) -> Result<BenchReport> {
    let runs = runs.max(1);
    let scaled = dataset::apply_scaler(&dataset::fit_scaler(ds), ds)?;
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        let model = train(cfg, &scaled, cfg.seed, opts)?;
        times.push(start.elapsed().as_secs_f64());
        drop(model);
    }
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let seconds = sorted[sorted.len() / 2];
    Ok(BenchReport {
        config: *cfg,
        n: ds.len(),
        runs: times,
        seconds,
    })
}
