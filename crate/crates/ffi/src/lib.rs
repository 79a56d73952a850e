//! C ABI over the `eem` classifiers.
//!
//! Models live behind an opaque `EemHandle`. Every fallible call returns an
//! `EemStatus`; on failure a message for the calling thread is available from
//! `eem_last_error` until the next failing call on that thread. Feature
//! matrices are dense, row-major `n × d` arrays of doubles and labels are
//! `int32_t` values in {-1, 0, +1} (0 is read as -1).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eem::dataset::{self, Dataset};
use eem::eval::{self, ModelConfig, TrainOptions, TrainedModel};
use eem::model_file::{Metadata, ModelFile};
use eem::{Activation, EemError, FitOptions, Matrix, Weighting};

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MissingClass = 3,
    DimensionMismatch = 4,
    Numerical = 5,
    Io = 6,
    ModelFile = 7,
    Unsupported = 8,
    Panic = 9,
}

pub const EEM_ALGO_EEM: i32 = 0;
pub const EEM_ALGO_EEKM: i32 = 1;
pub const EEM_ALGO_WELM: i32 = 2;

pub const EEM_ACT_SIG: i32 = 0;
pub const EEM_ACT_NSIG: i32 = 1;
pub const EEM_ACT_RBF: i32 = 2;

/// Opaque model handle. Create with `eem_fit` or `eem_load`, release with
/// `eem_free`.
pub struct EemHandle {
    file: ModelFile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &EemError) -> EemStatus {
    match e {
        EemError::MissingClass => EemStatus::MissingClass,
        EemError::DimensionMismatch { .. } => EemStatus::DimensionMismatch,
        EemError::Io(_) => EemStatus::Io,
        EemError::ModelFile(_) | EemError::Parse { .. } => EemStatus::ModelFile,
        EemError::AlreadyCollapsed | EemError::NotNystrom => EemStatus::Unsupported,
        e if e.is_numerical() => EemStatus::Numerical,
        _ => EemStatus::InvalidArgument,
    }
}

struct Failure(EemStatus, String);

impl From<EemError> for Failure {
    fn from(e: EemError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: EemStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EemStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            EemStatus::Panic
        }
    }
}

unsafe fn read_matrix(x: *const f64, n: usize, d: usize) -> Result<Matrix, Failure> {
    if x.is_null() {
        return Err(fail(EemStatus::NullPointer, "feature pointer is null"));
    }
    if n == 0 || d == 0 {
        return Err(fail(EemStatus::InvalidArgument, "n and d must be positive"));
    }
    let len = n
        .checked_mul(d)
        .ok_or_else(|| fail(EemStatus::InvalidArgument, "n * d overflows"))?;
    let data = std::slice::from_raw_parts(x, len).to_vec();
    Ok(Matrix::from_vec(n, d, data)?)
}

unsafe fn handle_ref<'a>(h: *const EemHandle) -> Result<&'a EemHandle, Failure> {
    h.as_ref().ok_or_else(|| fail(EemStatus::NullPointer, "model handle is null"))
}

unsafe fn out_slice<'a, T>(out: *mut T, n: usize) -> Result<&'a mut [T], Failure> {
    if out.is_null() {
        return Err(fail(EemStatus::NullPointer, "output pointer is null"));
    }
    Ok(std::slice::from_raw_parts_mut(out, n))
}

unsafe fn read_path(path: *const c_char) -> Result<String, Failure> {
    if path.is_null() {
        return Err(fail(EemStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(EemStatus::InvalidArgument, "path is not valid UTF-8"))
}

fn activation(code: i32) -> Result<Activation, Failure> {
    match code {
        EEM_ACT_SIG => Ok(Activation::Sig),
        EEM_ACT_NSIG => Ok(Activation::Nsig),
        EEM_ACT_RBF => Ok(Activation::Rbf),
        _ => Err(fail(EemStatus::InvalidArgument, format!("unknown activation code {code}"))),
    }
}

fn config(algorithm: i32, act: i32, h: usize, gamma: f64, seed: u64) -> Result<ModelConfig, Failure> {
    let cfg = match algorithm {
        EEM_ALGO_EEM => ModelConfig::eem(activation(act)?, h, seed),
        EEM_ALGO_EEKM => ModelConfig::eekm(h, gamma, seed),
        EEM_ALGO_WELM => ModelConfig::welm(activation(act)?, h, seed),
        _ => return Err(fail(EemStatus::InvalidArgument, format!("unknown algorithm code {algorithm}"))),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn matrix_for(file: &ModelFile, x: &Matrix) -> Result<Matrix, Failure> {
    let expected = file.model.input_dim();
    if x.ncols() != expected {
        return Err(EemError::DimensionMismatch { expected, got: x.ncols() }.into());
    }
    Ok(file.prepare(x)?)
}

fn eem_model(file: &ModelFile) -> Result<&eem::EemModel, Failure> {
    match &file.model {
        TrainedModel::Eem(m) => Ok(m),
        TrainedModel::Welm(_) => Err(fail(
            EemStatus::Unsupported,
            "probabilities and costs are only defined for EEM/EEKM models",
        )),
    }
}

/// Returns the message of the last failing call on this thread, or null if
/// none. The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn eem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Fits a model on `n` rows of `d` features and writes a new handle to `out`.
///
/// Features are min-max scaled to [0, 1] before fitting and the scaling is
/// stored in the model. `algorithm` is one of `EEM_ALGO_*`; `activation`
/// (one of `EEM_ACT_*`) is ignored for EEKM and `gamma` is only used by it.
///
/// # Safety
///
/// `x` must point to `n * d` doubles, `labels` to `n` ints and `out` to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn eem_fit(
    x: *const f64,
    labels: *const i32,
    n: usize,
    d: usize,
    algorithm: i32,
    activation: i32,
    h: usize,
    gamma: f64,
    seed: u64,
    out: *mut *mut EemHandle,
) -> EemStatus {
    guard(|| {
        if out.is_null() || labels.is_null() {
            return Err(fail(EemStatus::NullPointer, "labels or output pointer is null"));
        }
        *out = ptr::null_mut();
        let features = read_matrix(x, n, d)?;
        let labels = std::slice::from_raw_parts(labels, n)
            .iter()
            .map(|&l| match l {
                1 => Ok(1i8),
                0 | -1 => Ok(-1i8),
                _ => Err(fail(EemStatus::InvalidArgument, format!("label {l} outside {{-1, 0, +1}}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = config(algorithm, activation, h, gamma, seed)?;
        let ds = Dataset::new("ffi", features, labels)?;
        let scaler = dataset::fit_scaler(&ds);
        let scaled = dataset::apply_scaler(&scaler, &ds)?;
        let opts = TrainOptions {
            fit: FitOptions::default(),
            weighting: Weighting::default(),
        };
        let model = eval::train(&cfg, &scaled, seed, &opts)?;
        let metadata = Metadata {
            dataset: ds.name.clone(),
            n_train: ds.len(),
            config: cfg,
            seed,
            created_unix: None,
        };
        let file = ModelFile::new(model, Some(scaler), metadata);
        *out = Box::into_raw(Box::new(EemHandle { file }));
        Ok(())
    })
}

/// Loads a model file written by `eem_save` or the `eem train` command.
///
/// # Safety
///
/// `path` must be a nul-terminated string and `out` writable storage for one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn eem_load(path: *const c_char, out: *mut *mut EemHandle) -> EemStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(EemStatus::NullPointer, "output pointer is null"));
        }
        *out = ptr::null_mut();
        let file = ModelFile::load(read_path(path)?)?;
        *out = Box::into_raw(Box::new(EemHandle { file }));
        Ok(())
    })
}

/// Writes the model as JSON to `path`.
///
/// # Safety
///
/// `model` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn eem_save(model: *const EemHandle, path: *const c_char) -> EemStatus {
    guard(|| {
        let m = handle_ref(model)?;
        m.file.save(read_path(path)?)?;
        Ok(())
    })
}

/// Number of input features the model expects, or 0 for a null handle.
///
/// # Safety
///
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eem_input_dim(model: *const EemHandle) -> usize {
    model.as_ref().map_or(0, |m| m.file.model.input_dim())
}

/// Predicts ±1 labels for `n` rows of `d` features.
///
/// # Safety
///
/// `model` must be a live handle, `x` must point to `n * d` doubles and `out`
/// to room for `n` ints.
#[no_mangle]
pub unsafe extern "C" fn eem_predict(
    model: *const EemHandle,
    x: *const f64,
    n: usize,
    d: usize,
    out: *mut i32,
) -> EemStatus {
    guard(|| {
        let m = handle_ref(model)?;
        let x = matrix_for(&m.file, &read_matrix(x, n, d)?)?;
        let labels = m.file.model.predict(&x)?;
        for (o, l) in out_slice(out, n)?.iter_mut().zip(labels) {
            *o = i32::from(l);
        }
        Ok(())
    })
}

/// Posterior probability of the positive class under the fitted projected
/// Gaussians (EEM/EEKM only).
///
/// # Safety
///
/// As for `eem_predict`, with `out` pointing to room for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn eem_predict_proba(
    model: *const EemHandle,
    x: *const f64,
    n: usize,
    d: usize,
    out: *mut f64,
) -> EemStatus {
    guard(|| {
        let m = handle_ref(model)?;
        let em = eem_model(&m.file)?;
        let x = matrix_for(&m.file, &read_matrix(x, n, d)?)?;
        let p = em.predict_proba(&x)?;
        out_slice(out, n)?.copy_from_slice(&p);
        Ok(())
    })
}

/// Labels minimising expected cost, where `c_pos` is the cost of missing a
/// positive and `c_neg` of missing a negative (EEM/EEKM only).
///
/// # Safety
///
/// As for `eem_predict`.
#[no_mangle]
pub unsafe extern "C" fn eem_predict_cost_sensitive(
    model: *const EemHandle,
    x: *const f64,
    n: usize,
    d: usize,
    c_pos: f64,
    c_neg: f64,
    out: *mut i32,
) -> EemStatus {
    guard(|| {
        let m = handle_ref(model)?;
        let em = eem_model(&m.file)?;
        let x = matrix_for(&m.file, &read_matrix(x, n, d)?)?;
        let labels = em.predict_cost_sensitive(&x, c_pos, c_neg)?;
        for (o, l) in out_slice(out, n)?.iter_mut().zip(labels) {
            *o = i32::from(l);
        }
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
///
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eem_free(model: *mut EemHandle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
