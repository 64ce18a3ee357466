//! C ABI for the mbthp simulator.
//!
//! The surface is handle-based: build an experiment from the flat key=value
//! config text (or a file), run it, then read result rows or write the CSV.
//! Every function returns an [`MbthpStatus`] code (or NULL for constructors);
//! a thread-local message with the detail of the last failure is available
//! through [`mbthp_last_error`].
//!
//! The matching header is generated into `include/mbthp.h` at build time.

use mbthp::channel::SystemGeometry;
use mbthp::metrics::{flops, FlopAlgorithm, FlopParams};
use mbthp::simkit::{
    self, csv_string, noise_variance, ExperimentConfig, Metric, ResultRow,
};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbthpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    RunError = 4,
    IoError = 5,
    UnsupportedAlgorithm = 6,
    IndexOutOfRange = 7,
    NotRun = 8,
}

/// One Eb/N0 point of a finished run, plain-old-data for C callers.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbthpRow {
    pub ebno_db: f64,
    pub trials: u64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_sum_rate: f64,
    pub mean_selected_branch: f64,
}

/// Opaque experiment handle.
pub struct MbthpExperiment {
    config: ExperimentConfig,
    rows: Option<Vec<ResultRow>>,
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, MbthpStatus> {
    if ptr.is_null() {
        set_last_error("null pointer argument");
        return Err(MbthpStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_last_error("argument is not valid UTF-8");
        MbthpStatus::InvalidUtf8
    })
}

fn experiment_from_config(
    config: Result<ExperimentConfig, simkit::ConfigError>,
) -> *mut MbthpExperiment {
    match config {
        Ok(config) => Box::into_raw(Box::new(MbthpExperiment { config, rows: None })),
        Err(e) => {
            set_last_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Builds an experiment from config text (flat `key = value` lines).
/// Returns NULL on error; see [`mbthp_last_error`].
///
/// # Safety
/// `config_text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mbthp_experiment_new(config_text: *const c_char) -> *mut MbthpExperiment {
    let text = match unsafe { cstr_arg(config_text) } {
        Ok(t) => t,
        Err(_) => return ptr::null_mut(),
    };
    experiment_from_config(ExperimentConfig::from_config_str(text))
}

/// Builds an experiment from a config file path. Returns NULL on error.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mbthp_experiment_new_from_file(path: *const c_char) -> *mut MbthpExperiment {
    let path = match unsafe { cstr_arg(path) } {
        Ok(p) => p,
        Err(_) => return ptr::null_mut(),
    };
    experiment_from_config(ExperimentConfig::from_config_file(Path::new(path)))
}

/// Frees an experiment handle. NULL is accepted.
///
/// # Safety
/// `handle` must be NULL or a pointer from an `mbthp_experiment_new*`
/// call, not freed before.
#[no_mangle]
pub unsafe extern "C" fn mbthp_experiment_free(handle: *mut MbthpExperiment) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Runs the configured metric (`ber` or `sumrate`) and stores the rows on
/// the handle.
///
/// # Safety
/// `handle` must be a live experiment pointer.
#[no_mangle]
pub unsafe extern "C" fn mbthp_experiment_run(handle: *mut MbthpExperiment) -> MbthpStatus {
    let Some(exp) = (unsafe { handle.as_mut() }) else {
        set_last_error("null experiment handle");
        return MbthpStatus::NullArgument;
    };
    if exp.config.metric == Metric::Covariance {
        set_last_error("covariance metric has no row output; use ber or sumrate");
        return MbthpStatus::RunError;
    }
    match simkit::run_metric(&exp.config) {
        Ok(report) => {
            exp.rows = Some(report.rows);
            MbthpStatus::Ok
        }
        Err(e) => {
            set_last_error(&e.to_string());
            MbthpStatus::RunError
        }
    }
}

/// Number of result rows of a finished run.
///
/// # Safety
/// `handle` must be a live experiment pointer and `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn mbthp_experiment_row_count(
    handle: *const MbthpExperiment,
    out_count: *mut usize,
) -> MbthpStatus {
    let Some(exp) = (unsafe { handle.as_ref() }) else {
        set_last_error("null experiment handle");
        return MbthpStatus::NullArgument;
    };
    if out_count.is_null() {
        set_last_error("null out_count");
        return MbthpStatus::NullArgument;
    }
    match &exp.rows {
        Some(rows) => {
            unsafe { *out_count = rows.len() };
            MbthpStatus::Ok
        }
        None => {
            set_last_error("experiment has not been run");
            MbthpStatus::NotRun
        }
    }
}

/// Copies row `index` of a finished run into `out_row`.
///
/// # Safety
/// `handle` must be a live experiment pointer and `out_row` writable.
#[no_mangle]
pub unsafe extern "C" fn mbthp_experiment_row(
    handle: *const MbthpExperiment,
    index: usize,
    out_row: *mut MbthpRow,
) -> MbthpStatus {
    let Some(exp) = (unsafe { handle.as_ref() }) else {
        set_last_error("null experiment handle");
        return MbthpStatus::NullArgument;
    };
    if out_row.is_null() {
        set_last_error("null out_row");
        return MbthpStatus::NullArgument;
    }
    let Some(rows) = &exp.rows else {
        set_last_error("experiment has not been run");
        return MbthpStatus::NotRun;
    };
    let Some(row) = rows.get(index) else {
        set_last_error("row index out of range");
        return MbthpStatus::IndexOutOfRange;
    };
    unsafe {
        *out_row = MbthpRow {
            ebno_db: row.ebno_db,
            trials: row.trials,
            bits_sent: row.bits_sent,
            bit_errors: row.bit_errors,
            ber: row.ber,
            mean_sum_rate: row.mean_sum_rate,
            mean_selected_branch: row.mean_selected_branch,
        };
    }
    MbthpStatus::Ok
}

/// Writes the CSV of a finished run to `path`.
///
/// # Safety
/// `handle` must be a live experiment pointer and `path` a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mbthp_experiment_write_csv(
    handle: *const MbthpExperiment,
    path: *const c_char,
) -> MbthpStatus {
    let Some(exp) = (unsafe { handle.as_ref() }) else {
        set_last_error("null experiment handle");
        return MbthpStatus::NullArgument;
    };
    let path = match unsafe { cstr_arg(path) } {
        Ok(p) => p,
        Err(code) => return code,
    };
    let Some(rows) = &exp.rows else {
        set_last_error("experiment has not been run");
        return MbthpStatus::NotRun;
    };
    match std::fs::write(path, csv_string(rows)) {
        Ok(()) => MbthpStatus::Ok,
        Err(e) => {
            set_last_error(&e.to_string());
            MbthpStatus::IoError
        }
    }
}

/// Closed-form FLOP count. Algorithm names match the CLI: zf, mmse, bd,
/// rbd, zf-thp, mmse-thp-inversion, mmse-thp, mb-zf-thp, mb-mmse-thp, vp.
///
/// # Safety
/// `algorithm` must be a valid NUL-terminated string and `out_flops`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mbthp_flops(
    algorithm: *const c_char,
    n: u64,
    num_users: u64,
    antennas_per_user: u64,
    branches: u64,
    constellation_size: u64,
    sphere_radius: f64,
    out_flops: *mut u64,
) -> MbthpStatus {
    let name = match unsafe { cstr_arg(algorithm) } {
        Ok(n) => n,
        Err(code) => return code,
    };
    if out_flops.is_null() {
        set_last_error("null out_flops");
        return MbthpStatus::NullArgument;
    }
    let alg = match FlopAlgorithm::from_name(name) {
        Ok(a) => a,
        Err(e) => {
            set_last_error(&e.to_string());
            return MbthpStatus::UnsupportedAlgorithm;
        }
    };
    let params = FlopParams {
        n,
        num_users,
        antennas_per_user,
        branches,
        constellation_size,
        sphere_radius,
    };
    match flops(alg, &params) {
        Ok(report) => {
            unsafe { *out_flops = report.flops };
            MbthpStatus::Ok
        }
        Err(e) => {
            set_last_error(&e.to_string());
            MbthpStatus::ConfigError
        }
    }
}

/// Noise variance from the Eb/N0 definition for a square system.
///
/// # Safety
/// `out_variance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mbthp_noise_variance(
    ebno_db: f64,
    num_tx: u64,
    bits_per_symbol: u32,
    out_variance: *mut f64,
) -> MbthpStatus {
    if out_variance.is_null() {
        set_last_error("null out_variance");
        return MbthpStatus::NullArgument;
    }
    let geometry = match SystemGeometry::new(num_tx as usize, vec![1; num_tx as usize]) {
        Ok(g) => g,
        Err(e) => {
            set_last_error(&e.to_string());
            return MbthpStatus::ConfigError;
        }
    };
    unsafe { *out_variance = noise_variance(ebno_db, &geometry, bits_per_symbol as usize) };
    MbthpStatus::Ok
}

/// Copies the last error message for this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be NULL or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mbthp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                // Force termination when truncated.
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len() - 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mbthp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
