//! C interface to bayesics.
//!
//! Every fallible function returns a `BayesicsStatus`; on failure the message
//! is available from `bayesics_last_error_message` on the same thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bayesics::cli::{execute, parse_args};
use bayesics::data::{read_csv, read_csv_from, Dataset};
use bayesics::design::build_design;
use bayesics::formula::parse_formula;
use bayesics::linear::{fit_lm, LmPrior};
use bayesics::report::{lm_report, Report};
use bayesics::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BayesicsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Command-line style arguments could not be parsed.
    Usage = 3,
    Formula = 4,
    Data = 5,
    Design = 6,
    InvalidArgument = 7,
    Numerical = 8,
    Convergence = 9,
    Io = 10,
    /// An internal panic was caught at the boundary.
    Panic = 11,
}

impl From<&Error> for BayesicsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::FormulaSyntax { .. } | Error::Formula(_) => BayesicsStatus::Formula,
            Error::Csv(c) if c.is_io_error() => BayesicsStatus::Io,
            Error::Data(_) | Error::Csv(_) => BayesicsStatus::Data,
            Error::Design(_) => BayesicsStatus::Design,
            Error::InvalidArgument(_) => BayesicsStatus::InvalidArgument,
            Error::Numerical(_) => BayesicsStatus::Numerical,
            Error::Convergence(_) => BayesicsStatus::Convergence,
            Error::Io(_) => BayesicsStatus::Io,
        }
    }
}

/// A loaded data set.
pub struct BayesicsDataset {
    inner: Dataset,
    names: Vec<CString>,
}

/// A finished analysis serialized as a JSON report.
pub struct BayesicsReport {
    json: CString,
    command: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: BayesicsStatus, msg: impl Into<String>) -> BayesicsStatus {
    set_error(msg);
    status
}

/// Runs `body` with panics and errors converted to a status.
fn guard(body: impl FnOnce() -> Result<(), BayesicsStatus>) -> BayesicsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BayesicsStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            fail(BayesicsStatus::Panic, msg)
        }
    }
}

fn check(e: Error) -> BayesicsStatus {
    fail(BayesicsStatus::from(&e), e.to_string())
}

/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, BayesicsStatus> {
    if ptr.is_null() {
        return Err(fail(BayesicsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| fail(BayesicsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn out_ptr<T>(out: *mut *mut T) -> Result<(), BayesicsStatus> {
    if out.is_null() {
        return Err(fail(BayesicsStatus::NullPointer, "output pointer is null"));
    }
    Ok(())
}

fn c_string(s: impl Into<Vec<u8>>) -> CString {
    CString::new(s).unwrap_or_default()
}

fn dataset(inner: Dataset) -> *mut BayesicsDataset {
    let names = inner.names().iter().map(|n| c_string(n.as_str())).collect();
    Box::into_raw(Box::new(BayesicsDataset { inner, names }))
}

fn report(r: &Report) -> Result<*mut BayesicsReport, BayesicsStatus> {
    let json = r.to_json_string().map_err(check)?;
    Ok(Box::into_raw(Box::new(BayesicsReport { json: c_string(json), command: c_string(r.command.as_str()) })))
}

/// Message describing the last failure on this thread, or null if the last
/// fallible call succeeded. Valid until the next fallible call on this thread.
#[no_mangle]
pub extern "C" fn bayesics_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bayesics_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a CSV file into a new dataset handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bayesics_dataset_read_csv(path: *const c_char, out: *mut *mut BayesicsDataset) -> BayesicsStatus {
    guard(|| {
        out_ptr(out)?;
        let path = text(path, "path")?;
        let d = read_csv(path, &HashMap::new()).map_err(check)?;
        *out = dataset(d);
        Ok(())
    })
}

/// Parses CSV text (header row first) into a new dataset handle.
///
/// # Safety
/// `csv` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bayesics_dataset_parse_csv(csv: *const c_char, out: *mut *mut BayesicsDataset) -> BayesicsStatus {
    guard(|| {
        out_ptr(out)?;
        let csv = text(csv, "csv")?;
        let d = read_csv_from(csv.as_bytes(), &HashMap::new()).map_err(check)?;
        *out = dataset(d);
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bayesics_dataset_nrows(dataset: *const BayesicsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.nrows())
}

/// Number of columns, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bayesics_dataset_ncols(dataset: *const BayesicsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.names.len())
}

/// Name of column `index`, owned by the handle; null when out of range.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bayesics_dataset_column_name(dataset: *const BayesicsDataset, index: usize) -> *const c_char {
    dataset.as_ref().and_then(|d| d.names.get(index)).map_or(std::ptr::null(), |n| n.as_ptr())
}

/// Releases a dataset handle. Null is ignored.
///
/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bayesics_dataset_free(dataset: *mut BayesicsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fits a linear model with the default g-prior to an in-memory dataset.
///
/// # Safety
/// `dataset` must be a live handle, `formula` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bayesics_lm(
    dataset: *const BayesicsDataset,
    formula: *const c_char,
    ci_level: f64,
    out: *mut *mut BayesicsReport,
) -> BayesicsStatus {
    guard(|| {
        out_ptr(out)?;
        let data = dataset.as_ref().ok_or_else(|| fail(BayesicsStatus::NullPointer, "dataset is null"))?;
        let formula = text(formula, "formula")?;
        if !(ci_level > 0.0 && ci_level < 1.0) {
            return Err(fail(BayesicsStatus::InvalidArgument, format!("ci_level must lie in (0, 1), got {ci_level}")));
        }
        let design = build_design(&parse_formula(formula).map_err(check)?, &data.inner).map_err(check)?;
        let fit = fit_lm(&design, &LmPrior::ZellnerG).map_err(check)?;
        let result = lm_report(&fit, ci_level, None, None).map_err(check)?;
        let config = serde_json::json!({ "formula": formula, "ci_level": ci_level, "prior": "zellner" });
        *out = report(&Report::new("lm", 0, config, result).map_err(check)?)?;
        Ok(())
    })
}

/// Runs one analysis exactly as the command-line tool would, given its
/// arguments without the program name. Formatting options are ignored: the
/// report is always JSON.
///
/// # Safety
/// `argv` must point to `argc` NUL-terminated strings and `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bayesics_run(argc: usize, argv: *const *const c_char, out: *mut *mut BayesicsReport) -> BayesicsStatus {
    guard(|| {
        out_ptr(out)?;
        if argc > 0 && argv.is_null() {
            return Err(fail(BayesicsStatus::NullPointer, "argv is null"));
        }
        let args = (0..argc).map(|i| text(*argv.add(i), "argument").map(str::to_string)).collect::<Result<Vec<_>, _>>()?;
        let argv = std::iter::once("bayesics".to_string()).chain(args);
        let cli = parse_args(argv).map_err(|msg| fail(BayesicsStatus::Usage, msg))?;
        *out = report(&execute(&cli).map_err(check)?)?;
        Ok(())
    })
}

/// JSON text of the report, owned by the handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bayesics_report_json(report: *const BayesicsReport) -> *const c_char {
    report.as_ref().map_or(std::ptr::null(), |r| r.json.as_ptr())
}

/// Name of the command that produced the report, owned by the handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bayesics_report_command(report: *const BayesicsReport) -> *const c_char {
    report.as_ref().map_or(std::ptr::null(), |r| r.command.as_ptr())
}

/// Releases a report handle. Null is ignored.
///
/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bayesics_report_free(report: *mut BayesicsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
