//! C ABI over the xgrove toolkit.
//!
//! Conventions:
//!
//! * every fallible call returns an [`XgStatus`]; `XG_STATUS_OK` is 0;
//! * on failure, [`xg_last_error`] returns a thread-local message that
//!   stays valid until the next failing call on the same thread;
//! * handles (`XgDataset`, `XgModel`) are opaque and must be released with
//!   their `_free` function exactly once; `_free` accepts null;
//! * strings returned by `_json` functions are owned by the caller and
//!   must be released with [`xg_string_free`].
//!
//! The generated header lives in `include/xgrove.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use xgrove::data::{load_csv_flexible, Dataset};
use xgrove::error::Error;
use xgrove::model_select::PipelineModel;
use xgrove::report::{apply_config_file, emit_report, run, RunConfig};

/// Status codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XgStatus {
    Ok = 0,
    /// A null handle or output pointer was passed.
    NullPointer = 1,
    /// Invalid argument (bad arity, out-of-range value, unknown name).
    Argument = 2,
    /// Malformed cell or JSON while parsing input.
    Parse = 3,
    /// Header/schema mismatch in a dataset.
    Schema = 4,
    /// Filesystem failure.
    Io = 5,
    /// Operation not supported for this model kind.
    Unsupported = 6,
    /// A panic was caught at the FFI boundary.
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> XgStatus {
    match err {
        Error::Schema(_) => XgStatus::Schema,
        Error::Parse { .. } => XgStatus::Parse,
        Error::Argument(_) => XgStatus::Argument,
        Error::UnsupportedModel(_) => XgStatus::Unsupported,
        Error::Io(_) => XgStatus::Io,
        Error::Csv(_) => XgStatus::Parse,
        Error::Json(_) => XgStatus::Parse,
    }
}

/// Run `body` behind a panic guard, translating errors into statuses.
fn guarded(body: impl FnOnce() -> Result<(), (XgStatus, String)>) -> XgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => XgStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("panic caught at the FFI boundary");
            XgStatus::Panic
        }
    }
}

fn err_of(e: Error) -> (XgStatus, String) {
    (status_of(&e), e.to_string())
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, (XgStatus, String)> {
    if ptr.is_null() {
        return Err((XgStatus::NullPointer, "null string argument".into()));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| (XgStatus::Argument, "string argument is not UTF-8".into()))
}

/// Opaque dataset handle.
pub struct XgDataset {
    inner: Dataset,
}

/// Opaque fitted-pipeline handle (preprocessing + selection + classifier).
pub struct XgModel {
    inner: PipelineModel,
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn xg_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message of the last failing call on this thread (empty when none).
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn xg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned by a `_json` function. Accepts null.
///
/// # Safety
/// `ptr` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn xg_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(unsafe { CString::from_raw(ptr) });
    }
}

/// Load a CSV dataset (canonical heart-failure schema, or inferred when
/// the header differs).
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xg_dataset_load_csv(
    path: *const c_char,
    out: *mut *mut XgDataset,
) -> XgStatus {
    guarded(|| {
        if out.is_null() {
            return Err((XgStatus::NullPointer, "null output pointer".into()));
        }
        let path = unsafe { cstr_arg(path)? };
        let ds = load_csv_flexible(Path::new(path)).map_err(err_of)?;
        unsafe { *out = Box::into_raw(Box::new(XgDataset { inner: ds })) };
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn xg_dataset_rows(ds: *const XgDataset, out: *mut usize) -> XgStatus {
    guarded(|| {
        if ds.is_null() || out.is_null() {
            return Err((XgStatus::NullPointer, "null handle or output".into()));
        }
        unsafe { *out = (*ds).inner.n_rows() };
        Ok(())
    })
}

/// Number of input features (target excluded).
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn xg_dataset_inputs(ds: *const XgDataset, out: *mut usize) -> XgStatus {
    guarded(|| {
        if ds.is_null() || out.is_null() {
            return Err((XgStatus::NullPointer, "null handle or output".into()));
        }
        unsafe { *out = (*ds).inner.input_cols().len() };
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn xg_dataset_free(ds: *mut XgDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Execute the full pipeline: `config_text` uses the documented
/// `key = value` format (may be empty), `data_path` points at the CSV and
/// `out_dir` receives the report artifacts (including `model.json`).
///
/// # Safety
/// All three strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn xg_run(
    config_text: *const c_char,
    data_path: *const c_char,
    out_dir: *const c_char,
) -> XgStatus {
    guarded(|| {
        let config_text = unsafe { cstr_arg(config_text)? };
        let data_path = unsafe { cstr_arg(data_path)? };
        let out_dir = unsafe { cstr_arg(out_dir)? };
        let mut config = RunConfig::default();
        apply_config_file(&mut config, config_text).map_err(err_of)?;
        config.data_path = PathBuf::from(data_path);
        config.out_dir = PathBuf::from(out_dir);
        config.validate().map_err(err_of)?;
        let outcome = run(&config).map_err(err_of)?;
        emit_report(&outcome, &config.out_dir).map_err(err_of)?;
        Ok(())
    })
}

/// Load a pipeline model saved by a run (`model.json`).
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn xg_model_load(path: *const c_char, out: *mut *mut XgModel) -> XgStatus {
    guarded(|| {
        if out.is_null() {
            return Err((XgStatus::NullPointer, "null output pointer".into()));
        }
        let path = unsafe { cstr_arg(path)? };
        let text = std::fs::read_to_string(path)
            .map_err(|e| (XgStatus::Io, format!("cannot read '{path}': {e}")))?;
        let model = PipelineModel::from_json(&text).map_err(err_of)?;
        unsafe { *out = Box::into_raw(Box::new(XgModel { inner: model })) };
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn xg_model_save(model: *const XgModel, path: *const c_char) -> XgStatus {
    guarded(|| {
        if model.is_null() {
            return Err((XgStatus::NullPointer, "null model handle".into()));
        }
        let path = unsafe { cstr_arg(path)? };
        let text = unsafe { &(*model).inner }.to_json().map_err(err_of)?;
        std::fs::write(path, text)
            .map_err(|e| (XgStatus::Io, format!("cannot write '{path}': {e}")))?;
        Ok(())
    })
}

/// Raw input arity of the model: the dataset's column count minus the
/// target. Inputs are passed in dataset column order with the target
/// omitted; NaN marks a missing value.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn xg_model_raw_inputs(model: *const XgModel, out: *mut usize) -> XgStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return Err((XgStatus::NullPointer, "null handle or output".into()));
        }
        unsafe { *out = (*model).inner.schema.len() - 1 };
        Ok(())
    })
}

/// Number of features the fitted classifier actually uses.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn xg_model_n_features(model: *const XgModel, out: *mut usize) -> XgStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return Err((XgStatus::NullPointer, "null handle or output".into()));
        }
        unsafe { *out = (*model).inner.selected_names.len() };
        Ok(())
    })
}

/// Selected feature names as a JSON array; release with `xg_string_free`.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn xg_model_feature_names_json(
    model: *const XgModel,
    out: *mut *mut c_char,
) -> XgStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return Err((XgStatus::NullPointer, "null handle or output".into()));
        }
        let names = unsafe { &(*model).inner.selected_names };
        let json = xgrove::report::canonical_json(names).map_err(err_of)?;
        unsafe { *out = CString::new(json.trim_end()).unwrap_or_default().into_raw() };
        Ok(())
    })
}

/// P(class 1) for one raw input row (dataset column order, target
/// omitted).
///
/// # Safety
/// `inputs` must point at `len` doubles; `out_p1` must be valid.
#[no_mangle]
pub unsafe extern "C" fn xg_model_predict(
    model: *const XgModel,
    inputs: *const f64,
    len: usize,
    out_p1: *mut f64,
) -> XgStatus {
    guarded(|| {
        if model.is_null() || inputs.is_null() || out_p1.is_null() {
            return Err((XgStatus::NullPointer, "null handle or buffer".into()));
        }
        let inputs = unsafe { std::slice::from_raw_parts(inputs, len) };
        let proba = unsafe { &(*model).inner }
            .predict_raw(inputs)
            .map_err(err_of)?;
        unsafe { *out_p1 = proba[1] };
        Ok(())
    })
}

/// Exact Shapley values of P(class 1) for one raw input row against a
/// dataset used as the background (capped at its first 100 rows).
/// `out_values` receives one value per model feature (see
/// `xg_model_n_features`); `out_base` receives the base value.
///
/// # Safety
/// Buffers must match the documented lengths.
#[no_mangle]
pub unsafe extern "C" fn xg_model_shap(
    model: *const XgModel,
    background: *const XgDataset,
    inputs: *const f64,
    len: usize,
    out_values: *mut f64,
    values_len: usize,
    out_base: *mut f64,
) -> XgStatus {
    guarded(|| {
        if model.is_null()
            || background.is_null()
            || inputs.is_null()
            || out_values.is_null()
            || out_base.is_null()
        {
            return Err((XgStatus::NullPointer, "null handle or buffer".into()));
        }
        let pipeline = unsafe { &(*model).inner };
        let ds = unsafe { &(*background).inner };
        let m = pipeline.selected_names.len();
        if values_len != m {
            return Err((
                XgStatus::Argument,
                format!("out_values must hold {m} doubles, got {values_len}"),
            ));
        }
        let inputs = unsafe { std::slice::from_raw_parts(inputs, len) };
        let x = pipeline.transform_raw_inputs(inputs).map_err(err_of)?;
        let rows: Vec<usize> = (0..ds.n_rows().min(100)).collect();
        let bg = pipeline.transform(ds, &rows).map_err(err_of)?;
        let shap = xgrove::explain::shapley_exact(&pipeline.model, &bg, &x).map_err(err_of)?;
        let out = unsafe { std::slice::from_raw_parts_mut(out_values, values_len) };
        for (slot, (_, phi)) in out.iter_mut().zip(&shap.values) {
            *slot = *phi;
        }
        unsafe { *out_base = shap.base_value };
        Ok(())
    })
}

/// # Safety
/// `model` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn xg_model_free(model: *mut XgModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}
