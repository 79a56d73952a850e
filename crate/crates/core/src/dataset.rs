//! Labelled datasets: loading, min-max scaling, stratified folds.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EemError, Result};
use crate::linalg::Matrix;
use crate::rng;

pub const POSITIVE: i8 = 1;
pub const NEGATIVE: i8 = -1;

/// Dense feature matrix with ±1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: Matrix,
    labels: Vec<i8>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Matrix, labels: Vec<i8>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(EemError::invalid(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(EemError::invalid("dataset needs at least one row and one column"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l != POSITIVE && l != NEGATIVE) {
            return Err(EemError::invalid(format!("label {bad} is not -1 or +1")));
        }
        if !features.is_finite() {
            return Err(EemError::invalid("features contain NaN or infinite values"));
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn count(&self, label: i8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Subset of rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn split_by_class(&self) -> (Matrix, Matrix) {
        split_by_class(&self.features, &self.labels)
    }

    /// Pads with zero columns up to `d` features.
    pub fn widened(&self, d: usize) -> Result<Dataset> {
        if d < self.dim() {
            return Err(EemError::DimensionMismatch {
                expected: d,
                got: self.dim(),
            });
        }
        let features = Matrix::from_fn(self.len(), d, |i, j| if j < self.dim() { self.features[(i, j)] } else { 0.0 });
        Ok(Dataset {
            features,
            ..self.clone()
        })
    }

    /// Same dataset with every label negated.
    pub fn flipped(&self) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.clone(),
            labels: self.labels.iter().map(|l| -l).collect(),
        }
    }
}

/// Rows with label +1 and rows with label -1, each in original order.
pub fn split_by_class(features: &Matrix, labels: &[i8]) -> (Matrix, Matrix) {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == POSITIVE).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != POSITIVE).collect();
    (features.select_rows(&pos), features.select_rows(&neg))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Libsvm,
    Csv,
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// CSV only: index of the label column (default 0).
    pub label_column: Option<usize>,
    /// CSV only: skip the first line.
    pub has_header: bool,
    /// libsvm only: feature count when the file may not mention the last
    /// column.
    pub n_features: Option<usize>,
}

pub fn load(path: impl AsRef<Path>, format: DataFormat, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut ds = match format {
        DataFormat::Libsvm => parse_libsvm(&text, path, opts.n_features)?,
        DataFormat::Csv => parse_csv(&text, path, opts.label_column.unwrap_or(0), opts.has_header)?,
    };
    ds.name = name;
    Ok(ds)
}

fn parse_label(tok: &str, line: usize) -> Result<i8> {
    let invalid = || EemError::InvalidLabel {
        line,
        label: tok.to_string(),
    };
    let v: f64 = tok.trim_start_matches('+').parse().map_err(|_| invalid())?;
    if v == 1.0 {
        Ok(POSITIVE)
    } else if v == -1.0 || v == 0.0 {
        Ok(NEGATIVE)
    } else {
        Err(invalid())
    }
}

fn parse_value(tok: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| EemError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {tok:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(EemError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("non-finite value {tok:?}"),
        });
    }
    Ok(v)
}

/// Parses libsvm text (`<label> <index>:<value> ...`, 1-based ascending
/// indices). Missing indices are zero.
pub fn parse_libsvm(text: &str, path: &Path, n_features: Option<usize>) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| EemError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut labels = Vec::new();
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let label = parse_label(toks.next().expect("non-empty line"), lineno)?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based".into()));
            }
            if idx <= last {
                return Err(parse_err(lineno, format!("feature index {idx} not ascending")));
            }
            last = idx;
            row.push((idx - 1, parse_value(val, path, lineno)?));
        }
        max_index = max_index.max(last);
        labels.push(label);
        sparse.push(row);
    }
    let d = match n_features {
        Some(d) if d < max_index => {
            return Err(EemError::invalid(format!(
                "file uses feature index {max_index} but {d} features were declared"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    let mut features = Matrix::zeros(labels.len(), d);
    for (i, row) in sparse.iter().enumerate() {
        for &(j, v) in row {
            features[(i, j)] = v;
        }
    }
    Dataset::new("", features, labels)
}

pub fn parse_csv(text: &str, path: &Path, label_column: usize, has_header: bool) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, raw) in text.lines().enumerate().skip(usize::from(has_header)) {
        let lineno = lineno + 1;
        let content = raw.trim();
        if content.is_empty() {
            continue;
        }
        let cells: Vec<&str> = content.split(',').map(str::trim).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(EemError::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("expected {w} columns, found {}", cells.len()),
                })
            }
            _ => {}
        }
        if label_column >= cells.len() {
            return Err(EemError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("label column {label_column} out of range"),
            });
        }
        labels.push(parse_label(cells[label_column], lineno)?);
        let row = cells
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != label_column)
            .map(|(_, c)| parse_value(c, path, lineno))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Dataset::new("", Matrix::from_rows(&rows)?, labels)
}

/// Writes `ds` in libsvm format. Values use Rust's shortest round-trip
/// formatting, so reading the file back reproduces every bit.
pub fn write_libsvm(ds: &Dataset, mut out: impl Write) -> Result<()> {
    for (row, &label) in ds.features.rows().zip(&ds.labels) {
        write!(out, "{}", if label == POSITIVE { "+1" } else { "-1" })?;
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Per-feature affine map onto `[0, 1]` fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTransform {
    pub min: Vec<f64>,
    pub range: Vec<f64>,
}

impl ScalingTransform {
    pub fn fit(features: &Matrix) -> ScalingTransform {
        let d = features.ncols();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in features.rows() {
            for j in 0..d {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        if features.nrows() == 0 {
            min.fill(0.0);
            max.fill(0.0);
        }
        let range = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
        ScalingTransform { min, range }
    }

    /// `(x - min) / range`; zero-range features map to 0. Values outside the
    /// training range extrapolate linearly.
    pub fn apply(&self, features: &Matrix) -> Result<Matrix> {
        if features.ncols() != self.min.len() {
            return Err(EemError::DimensionMismatch {
                expected: self.min.len(),
                got: features.ncols(),
            });
        }
        let mut out = features.clone();
        for i in 0..out.nrows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = if self.range[j] > 0.0 {
                    (*v - self.min[j]) / self.range[j]
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }
}

pub fn fit_scaler(ds: &Dataset) -> ScalingTransform {
    ScalingTransform::fit(&ds.features)
}

pub fn apply_scaler(t: &ScalingTransform, ds: &Dataset) -> Result<Dataset> {
    Ok(Dataset {
        name: ds.name.clone(),
        features: t.apply(&ds.features)?,
        labels: ds.labels.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub repeat: usize,
    pub index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
}

/// Repeated stratified k-fold split. Each class is shuffled with a stream
/// derived from `(seed, repeat)` and dealt round-robin into the folds; the
/// dealing position carries over between classes so fold sizes stay within
/// one of each other.
pub fn stratified_kfold(labels: &[i8], k: usize, repeats: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(EemError::invalid("k must be at least 2"));
    }
    if repeats == 0 {
        return Err(EemError::invalid("repeats must be at least 1"));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == POSITIVE).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != POSITIVE).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(EemError::MissingClass);
    }
    let minority = pos.len().min(neg.len());
    if k > minority {
        log::warn!("k = {k} exceeds the smaller class size {minority}; some folds will miss that class");
    }

    let mut folds = Vec::with_capacity(k * repeats);
    for repeat in 0..repeats {
        let mut rng = rng::stream(seed, "stratified-kfold", repeat as u64);
        let mut buckets = vec![Vec::new(); k];
        let mut slot = 0usize;
        for class in [&pos, &neg] {
            for j in rng::shuffled(class.len(), &mut rng) {
                buckets[slot].push(class[j]);
                slot = (slot + 1) % k;
            }
        }
        for (index, mut test) in buckets.into_iter().enumerate() {
            test.sort_unstable();
            let mut in_test = vec![false; labels.len()];
            test.iter().for_each(|&i| in_test[i] = true);
            let train = (0..labels.len()).filter(|&i| !in_test[i]).collect();
            folds.push(Fold {
                repeat,
                index,
                train,
                test,
            });
        }
    }
    Ok(FoldPlan {
        folds,
        k,
        repeats,
        seed,
    })
}
