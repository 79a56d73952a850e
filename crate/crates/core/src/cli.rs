//! Command line interface.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{self, DataFormat, Dataset, LoadOptions};
use crate::eem::FitOptions;
use crate::entropy::DcsFormula;
use crate::error::{EemError, Result};
use crate::eval::{self, Algorithm, CvOptions, EvalReport, ModelConfig, ProjectedVariance, TrainOptions, TrainedModel, TuneMethod, TuneOptions};
use crate::feature_map::Activation;
use crate::linalg::CovDivisor;
use crate::metrics;
use crate::model_file::{Metadata, ModelFile};
use crate::welm::Weighting;

#[derive(Debug, Parser)]
#[command(name = "eem", version, about = "Extreme Entropy Machines for binary classification")]
pub struct Cli {
    /// Worker threads for cross-validation and grids (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a dataset and write it to a model file.
    Train(TrainArgs),
    /// Label the rows of a dataset with a saved model.
    Predict(PredictArgs),
    /// Repeated stratified cross-validation over a grid of configurations.
    Evaluate(EvaluateArgs),
    /// Select a configuration by the divergence of the training projections.
    Tune(TuneArgs),
    /// Experiments: surrogate rank correlation, hidden size sweep, timing.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Libsvm)]
    pub format: DataFormat,
    /// CSV: the first line is a header.
    #[arg(long)]
    pub header: bool,
    /// CSV: zero-based index of the label column.
    #[arg(long, default_value_t = 0)]
    pub label_column: usize,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        dataset::load(
            &self.data,
            self.format,
            &LoadOptions {
                label_column: Some(self.label_column),
                has_header: self.header,
                n_features: None,
            },
        )
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Ridge added to each class covariance (only when given).
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Use the 1/(N-1) covariance convention instead of 1/N.
    #[arg(long)]
    pub unbiased_covariance: bool,
    /// Row weighting for WELM.
    #[arg(long, value_enum, default_value_t = Weighting::Balanced)]
    pub weighting: Weighting,
}

impl FitArgs {
    fn options(&self) -> TrainOptions {
        TrainOptions {
            fit: FitOptions {
                jitter: self.jitter,
                divisor: if self.unbiased_covariance {
                    CovDivisor::SamplesMinusOne
                } else {
                    CovDivisor::Samples
                },
                ..FitOptions::default()
            },
            weighting: self.weighting,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = Algorithm::Eem)]
    pub algo: Algorithm,
    #[arg(long, value_enum, default_value_t = Activation::Rbf)]
    pub activation: Activation,
    #[arg(long, default_value_t = 100)]
    pub h: usize,
    /// Kernel width for eekm.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub model: PathBuf,
    /// Record the creation time in the model file.
    #[arg(long)]
    pub timestamp: bool,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Add a column with P(+|x).
    #[arg(long)]
    pub proba: bool,
    /// Misclassification costs `C+,C-` for cost-sensitive labels.
    #[arg(long, value_name = "C+,C-", value_parser = parse_costs)]
    pub costs: Option<(f64, f64)>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, value_enum, default_value_t = Algorithm::Eem)]
    pub algo: Algorithm,
    #[arg(long, value_enum, default_value_t = Activation::Rbf)]
    pub activation: Activation,
    /// Hidden sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = eval::DEFAULT_H_GRID.to_vec())]
    pub h: Vec<usize>,
    /// Kernel widths for eekm, comma separated (default 1e-10,...,1).
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl GridArgs {
    fn grid(&self) -> Vec<ModelConfig> {
        match self.algo {
            Algorithm::Eekm => {
                let gammas = if self.gamma.is_empty() {
                    eval::default_gamma_grid()
                } else {
                    self.gamma.clone()
                };
                eval::eekm_grid(&self.h, &gammas, self.seed)
            }
            Algorithm::Eem => eval::h_grid(ModelConfig::eem(self.activation, 0, self.seed), &self.h),
            Algorithm::Welm => eval::h_grid(ModelConfig::welm(self.activation, 0, self.seed), &self.h),
        }
    }
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Fit the [0,1] scaler on the whole dataset instead of each training fold.
    #[arg(long)]
    pub scale_globally: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Write the full report as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = TuneMethod::DcsGauss)]
    pub method: TuneMethod,
    #[arg(long, value_enum, default_value_t = DcsFormula::Corrected)]
    pub dcs_formula: DcsFormula,
    /// Projected variance used by dcs-gauss.
    #[arg(long, value_enum, default_value_t = ProjectedVariance::Empirical)]
    pub variance: ProjectedVariance,
    /// Also cross-validate the selected configuration.
    #[arg(long)]
    pub evaluate: bool,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Rank correlation between the mean separation term and the full divergence.
    Spearman(SpearmanArgs),
    /// Cross-validated GMean as a function of the hidden size.
    Stability(StabilityArgs),
    /// Median training time of one configuration.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SpearmanArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 10, 100])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub projections: usize,
    #[arg(long, default_value_t = 100)]
    pub operators: usize,
    #[arg(long, value_enum, default_value_t = Activation::Rbf)]
    pub activation: Activation,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = Algorithm::Eem)]
    pub algo: Algorithm,
    #[arg(long, value_enum, default_value_t = Activation::Rbf)]
    pub activation: Activation,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Hidden sizes, comma separated (default 5,10,...,500).
    #[arg(long, value_delimiter = ',')]
    pub h: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = Algorithm::Eem)]
    pub algo: Algorithm,
    #[arg(long, value_enum, default_value_t = Activation::Rbf)]
    pub activation: Activation,
    #[arg(long, default_value_t = 100)]
    pub h: usize,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    #[command(flatten)]
    pub fit: FitArgs,
}

fn single_config(algo: Algorithm, activation: Activation, h: usize, gamma: Option<f64>, seed: u64) -> Result<ModelConfig> {
    let cfg = match algo {
        Algorithm::Eem => ModelConfig::eem(activation, h, seed),
        Algorithm::Welm => ModelConfig::welm(activation, h, seed),
        Algorithm::Eekm => {
            let gamma = gamma.ok_or_else(|| EemError::invalid("--gamma is required for eekm"))?;
            ModelConfig::eekm(h, gamma, seed)
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cv_options(cv: &CvArgs, seed: u64, fit: &FitArgs) -> CvOptions {
    CvOptions {
        k: cv.k,
        repeats: cv.repeats,
        seed,
        scale_globally: cv.scale_globally,
        train: fit.options(),
    }
}

/// Writes to `path`, or to standard output when it is `None`.
fn parse_costs(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma separated costs, e.g. 10,1")?;
    let parse = |v: &str| -> std::result::Result<f64, String> {
        match v.trim().parse::<f64>() {
            Ok(c) if c > 0.0 && c.is_finite() => Ok(c),
            _ => Err(format!("cost {v:?} is not a positive number")),
        }
    };
    Ok((parse(a)?, parse(b)?))
}

/// Shortest round-trip form, switching to exponent notation for tiny values.
fn format_probability(p: f64) -> String {
    if p != 0.0 && p.abs() < 1e-4 {
        format!("{p:e}")
    } else {
        format!("{p}")
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn percent(r: &EvalReport) -> String {
    format!("{:.1} ± {:.1}", 100.0 * r.mean, 100.0 * r.std)
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| EemError::invalid(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Tune(a) => cmd_tune(&a),
        Command::Experiment(Experiment::Spearman(a)) => cmd_spearman(&a),
        Command::Experiment(Experiment::Stability(a)) => cmd_stability(&a),
        Command::Experiment(Experiment::Bench(a)) => cmd_bench(&a),
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let ds = a.data.load()?;
    let cfg = single_config(a.algo, a.activation, a.h, a.gamma, a.seed)?;
    let scaler = dataset::fit_scaler(&ds);
    let scaled = dataset::apply_scaler(&scaler, &ds)?;
    let model = eval::train(&cfg, &scaled, a.seed, &a.fit.options())?;
    let predicted = model.predict(scaled.features())?;
    let gm = metrics::gmean(&metrics::confusion(scaled.labels(), &predicted)?);

    let created_unix = a
        .timestamp
        .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    let file = ModelFile::new(
        model,
        Some(scaler),
        Metadata {
            dataset: ds.name.clone(),
            n_train: ds.len(),
            config: cfg,
            seed: a.seed,
            created_unix,
        },
    );
    file.save(&a.model)?;

    let mut out = format!("model: {}\nh: {}\n", cfg.label(), file.model.map().hidden_dim());
    if let TrainedModel::Eem(m) = &file.model {
        out.push_str(&format!("rule: {}\n", serde_json::to_string(&m.discriminant.rule)?));
    }
    out.push_str(&format!("training gmean: {gm}\nwritten: {}\n", a.model.display()));
    emit(None, &out)
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let file = ModelFile::load(&a.model)?;
    let mut ds = a.data.load()?;
    let d = file.model.input_dim();
    // libsvm rows may omit trailing zero features
    if a.data.format == DataFormat::Libsvm && ds.dim() < d {
        ds = ds.widened(d)?;
    }
    if ds.dim() != d {
        return Err(EemError::DimensionMismatch {
            expected: d,
            got: ds.dim(),
        });
    }
    let x = file.prepare(ds.features())?;

    let labels = match (&a.costs, &file.model) {
        (Some((c_pos, c_neg)), TrainedModel::Eem(m)) => m.predict_cost_sensitive(&x, *c_pos, *c_neg)?,
        (Some(_), TrainedModel::Welm(_)) => {
            return Err(EemError::invalid("--costs needs an eem or eekm model"));
        }
        (None, model) => model.predict(&x)?,
    };
    let proba = if a.proba {
        match &file.model {
            TrainedModel::Eem(m) => Some(m.predict_proba(&x)?),
            TrainedModel::Welm(_) => return Err(EemError::invalid("--proba needs an eem or eekm model")),
        }
    } else {
        None
    };

    let mut out = String::new();
    for (i, l) in labels.iter().enumerate() {
        match &proba {
            Some(p) => out.push_str(&format!("{l:+}\t{}\n", format_probability(p[i]))),
            None => out.push_str(&format!("{l:+}\n")),
        }
    }
    emit(a.output.as_deref(), &out)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let ds = a.data.load()?;
    let opts = cv_options(&a.cv, a.grid.seed, &a.fit);
    let result = eval::grid_search_cv(&ds, &a.grid.grid(), &opts)?;

    let mut out = format!(
        "dataset: {} (N={}, d={}, +{} / -{})\nprotocol: {} x {}-fold stratified CV, seed {}\n",
        ds.name,
        ds.len(),
        ds.dim(),
        ds.count(1),
        ds.count(-1),
        opts.repeats,
        opts.k,
        opts.seed
    );
    out.push_str(&format!("{:<36} {:>14} {:>12}\n", "config", "gmean", "train s/fold"));
    for r in &result.reports {
        let secs = r.train_seconds.iter().sum::<f64>() / r.train_seconds.len().max(1) as f64;
        out.push_str(&format!("{:<36} {:>14} {:>12.4}\n", r.config.label(), percent(r), secs));
    }
    for (cfg, why) in &result.failed {
        out.push_str(&format!("{:<36} skipped: {why}\n", cfg.label()));
    }
    out.push_str(&format!("best: {} {}\n", result.best.label(), percent(result.best_report())));
    emit(None, &out)?;
    if let Some(p) = &a.output {
        fs::write(p, serde_json::to_string_pretty(&result)?)?;
    }
    Ok(())
}

pub fn cmd_tune(a: &TuneArgs) -> Result<()> {
    let ds = a.data.load()?;
    let opts = TuneOptions {
        method: a.method,
        variance: a.variance,
        formula: a.dcs_formula,
        train: a.fit.options(),
    };
    let report = eval::tune(&ds, &a.grid.grid(), &opts)?;
    let mut out = String::new();
    for (cfg, score) in &report.scores {
        match score {
            Some(s) => out.push_str(&format!("{:<36} {s:.6}\n", cfg.label())),
            None => out.push_str(&format!("{:<36} failed\n", cfg.label())),
        }
    }
    out.push_str(&format!(
        "chosen: {} score {:.6} ({} fits)\n",
        report.best.label(),
        report.best_score,
        report.fits
    ));
    let cv = if a.evaluate {
        let r = eval::cross_validate(&ds, &report.best, &cv_options(&a.cv, a.grid.seed, &a.fit))?;
        out.push_str(&format!("cross-validated gmean: {}\n", percent(&r)));
        Some(r)
    } else {
        None
    };
    emit(None, &out)?;
    if let Some(p) = &a.output {
        let json = serde_json::json!({ "tune": report, "cross_validation": cv });
        fs::write(p, serde_json::to_string_pretty(&json)?)?;
    }
    Ok(())
}

pub fn cmd_spearman(a: &SpearmanArgs) -> Result<()> {
    let ds = a.data.load()?;
    let rows = eval::spearman_experiment(&ds, &a.dims, a.projections, a.operators, a.activation, a.seed)?;
    let mut out = String::from("dim\tspearman\tpairs\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}\n", r.dim, r.correlation, r.pairs));
    }
    emit(a.output.as_deref(), &out)
}

pub fn cmd_stability(a: &StabilityArgs) -> Result<()> {
    let ds = a.data.load()?;
    let template = single_config(a.algo, a.activation, 1, a.gamma, a.seed)?;
    let hs: Vec<usize> = if a.h.is_empty() { (1..=100).map(|i| 5 * i).collect() } else { a.h.clone() };
    let reports = eval::stability_sweep(&ds, &hs, &template, &cv_options(&a.cv, a.seed, &a.fit))?;
    let mut out = String::from("h\tmean_gmean\tstd_gmean\n");
    for r in &reports {
        out.push_str(&format!("{}\t{}\t{}\n", r.config.h, r.mean, r.std));
    }
    emit(a.output.as_deref(), &out)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let ds = a.data.load()?;
    let cfg = single_config(a.algo, a.activation, a.h, a.gamma, a.seed)?;
    let r = eval::bench(&ds, &cfg, &a.fit.options(), a.runs)?;
    emit(
        None,
        &format!("{}\tN={}\tmedian_seconds={:.6}\truns={}\n", cfg.label(), r.n, r.seconds, r.runs.len()),
    )
}

/// Process exit code for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &EemError) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}
