//! C ABI over `fgdra-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`,
//! `*_load` or `*_generate` functions and released with the matching
//! `*_free`. Every fallible function returns an [`FgdraStatus`]; on failure
//! [`fgdra_last_error`] describes the most recent error on the calling
//! thread. Strings are NUL-terminated UTF-8. Panics never unwind into C:
//! they are reported as `FGDRA_STATUS_PANIC`.
//!
//! The header `include/fgdra.h` is generated at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fgdra_core::diagnostics::{theorem_bound, TheoryEstimates};
use fgdra_core::fed::{run_with, Algorithm};
use fgdra_core::harness::config::ExperimentConfig;
use fgdra_core::harness::data::generate;
use fgdra_core::harness::metrics::evaluate;
use fgdra_core::labeling::WorkerData;
use fgdra_core::mlp::{ModelParams, INPUT, OUTPUT, PARAM_COUNT};
use fgdra_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgdraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Format = 5,
    DimensionMismatch = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgdraAlgorithm {
    Fgdra = 0,
    Drfa = 1,
    FedAvg = 2,
}

fn algorithm_of(code: u32) -> Result<Algorithm, Fail> {
    match code {
        c if c == FgdraAlgorithm::Fgdra as u32 => Ok(Algorithm::Fgdra),
        c if c == FgdraAlgorithm::Drfa as u32 => Ok(Algorithm::Drfa),
        c if c == FgdraAlgorithm::FedAvg as u32 => Ok(Algorithm::FedAvg),
        other => Err(Fail(
            FgdraStatus::InvalidArgument,
            format!("unknown algorithm code {other}"),
        )),
    }
}

/// Test accuracies in percent.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FgdraAccuracy {
    pub avg: f64,
    pub worst: f64,
    pub sd: f64,
}

/// Experiment configuration.
pub struct FgdraConfig(ExperimentConfig);

/// Standardized train/test splits of every worker.
pub struct FgdraData(Vec<WorkerData>);

/// MLP parameters.
pub struct FgdraModel(ModelParams);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FgdraStatus {
    match e {
        Error::Config { .. } => FgdraStatus::Config,
        Error::Io { .. } => FgdraStatus::Io,
        Error::Format { .. } | Error::Csv(_) => FgdraStatus::Format,
        Error::DimensionMismatch { .. } => FgdraStatus::DimensionMismatch,
        _ => FgdraStatus::InvalidArgument,
    }
}

struct Fail(FgdraStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FgdraStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> FgdraStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            FgdraStatus::Ok
        }
        Ok(Err(Fail(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FgdraStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(FgdraStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn fgdra_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Number of MLP parameters.
#[no_mangle]
pub extern "C" fn fgdra_param_count() -> usize {
    PARAM_COUNT
}

/// Default configuration.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fgdra_config_new(out: *mut *mut FgdraConfig) -> FgdraStatus {
    guard(|| put(out, FgdraConfig(ExperimentConfig::default())))
}

/// Parses a config file.
///
/// # Safety
/// `path` must be a valid C string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fgdra_config_load(
    path: *const c_char,
    out: *mut *mut FgdraConfig,
) -> FgdraStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put(out, FgdraConfig(ExperimentConfig::load(Path::new(path))?))
    })
}

/// Sets one key and revalidates; on failure the config is unchanged.
///
/// # Safety
/// `config` must come from this library; `key` and `value` must be valid C strings.
#[no_mangle]
pub unsafe extern "C" fn fgdra_config_set(
    config: *mut FgdraConfig,
    key: *const c_char,
    value: *const c_char,
) -> FgdraStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        let (key, value) = (str_arg(key, "key")?, str_arg(value, "value")?);
        let mut next = cfg.0.clone();
        next.set(key, value)?;
        next.validate()?;
        cfg.0 = next;
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fgdra_config_free(config: *mut FgdraConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Generates every worker's dataset from the config.
///
/// # Safety
/// `config` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fgdra_data_generate(
    config: *const FgdraConfig,
    out: *mut *mut FgdraData,
) -> FgdraStatus {
    guard(|| {
        let cfg = ref_arg(config, "config")?;
        put(out, FgdraData(generate(&cfg.0)?.1))
    })
}

/// Number of workers in `data`, or 0 for null.
///
/// # Safety
/// `data` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fgdra_data_workers(data: *const FgdraData) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `data` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fgdra_data_free(data: *mut FgdraData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Trains one run of `algorithm` (an [`FgdraAlgorithm`] value) with `seed`
/// and returns the final model.
///
/// # Safety
/// `config` and `data` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fgdra_train(
    config: *const FgdraConfig,
    data: *const FgdraData,
    algorithm: u32,
    seed: u64,
    out: *mut *mut FgdraModel,
) -> FgdraStatus {
    guard(|| {
        let cfg = ref_arg(config, "config")?;
        let data = ref_arg(data, "data")?;
        let algorithm = algorithm_of(algorithm)?;
        let run = run_with(&cfg.0.train_config(algorithm, seed), &data.0, &mut ())?;
        put(out, FgdraModel(run.theta))
    })
}

/// Test accuracies of `model`. `per_worker` may be null; otherwise it must
/// hold `len` doubles, and `len` must equal the worker count.
///
/// # Safety
/// Handles must come from this library; pointers must be valid as described.
#[no_mangle]
pub unsafe extern "C" fn fgdra_evaluate(
    model: *const FgdraModel,
    data: *const FgdraData,
    out: *mut FgdraAccuracy,
    per_worker: *mut f64,
    len: usize,
) -> FgdraStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let data = ref_arg(data, "data")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let eval = evaluate(&model.0, &data.0)?;
        if !per_worker.is_null() {
            if len != eval.per_worker.len() {
                return Err(Error::DimensionMismatch {
                    expected: eval.per_worker.len(),
                    actual: len,
                }
                .into());
            }
            std::slice::from_raw_parts_mut(per_worker, len).copy_from_slice(&eval.per_worker);
        }
        *out = FgdraAccuracy {
            avg: eval.avg,
            worst: eval.worst,
            sd: eval.sd,
        };
        Ok(())
    })
}

/// Classifies one standardized feature vector of `len` (= 400) doubles.
/// `probs` may be null; otherwise it receives the 4 class probabilities.
///
/// # Safety
/// `model` must come from this library; pointers must be valid as described.
#[no_mangle]
pub unsafe extern "C" fn fgdra_model_predict(
    model: *const FgdraModel,
    features: *const f64,
    len: usize,
    class_out: *mut usize,
    probs: *mut f64,
) -> FgdraStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        if features.is_null() {
            return Err(null("features"));
        }
        if class_out.is_null() {
            return Err(null("class_out"));
        }
        if len != INPUT {
            return Err(Error::DimensionMismatch {
                expected: INPUT,
                actual: len,
            }
            .into());
        }
        let p = model.0.forward(std::slice::from_raw_parts(features, len))?;
        let mut best = 0;
        for c in 1..OUTPUT {
            if p[c] > p[best] {
                best = c;
            }
        }
        *class_out = best;
        if !probs.is_null() {
            std::slice::from_raw_parts_mut(probs, OUTPUT).copy_from_slice(&p);
        }
        Ok(())
    })
}

/// Writes the model in the binary checkpoint format.
///
/// # Safety
/// `model` must come from this library and `path` be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn fgdra_model_save(
    model: *const FgdraModel,
    path: *const c_char,
) -> FgdraStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        model.0.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a valid C string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fgdra_model_load(
    path: *const c_char,
    out: *mut *mut FgdraModel,
) -> FgdraStatus {
    guard(|| {
        let model = ModelParams::load(Path::new(str_arg(path, "path")?))?;
        put(out, FgdraModel(model))
    })
}

/// Copies all parameters, in checkpoint order, into `buf` of `len` (= param count) doubles.
///
/// # Safety
/// `model` must come from this library and `buf` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fgdra_model_params(
    model: *const FgdraModel,
    buf: *mut f64,
    len: usize,
) -> FgdraStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != PARAM_COUNT {
            return Err(Error::DimensionMismatch {
                expected: PARAM_COUNT,
                actual: len,
            }
            .into());
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&model.0.to_flat());
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fgdra_model_free(model: *mut FgdraModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Convergence bound `(2 F0 + (17/2 + 8/m) σ² + 17 ν²) / √T`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fgdra_theorem_bound(
    sigma: f64,
    nu: f64,
    f0: f64,
    m: usize,
    t: usize,
    out: *mut f64,
) -> FgdraStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let est = TheoryEstimates {
            sigma_hat: sigma,
            nu_hat: nu,
            l_hat: 0.0,
            f0,
        };
        *out = theorem_bound(&est, m, t)?;
        Ok(())
    })
}
