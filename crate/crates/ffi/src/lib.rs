//! C ABI over the `bandap` evaluator.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns a
//! [`BandapStatus`]; on failure, [`bandap_last_error`] describes the cause.
//! Strings returned to the caller are owned by the caller and released with
//! [`bandap_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bandap::data::{load_detections, load_ground_truth, Dataset, ScaleMode};
use bandap::evaluate::{evaluate_suite, EvalParams, MetricReport};
use bandap::filter::{preset, FilterBank};
use bandap::report::report_to_json;
use bandap::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    MalformedFile = 3,
    ReferentialError = 4,
    ValueError = 5,
    IoError = 6,
    UndefinedMetric = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandapScaleMode {
    Absolute = 0,
    Relative = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandapApKind {
    /// Mean over all IoU thresholds.
    Mean = 0,
    Iou50 = 1,
    Iou75 = 2,
}

/// Ground truth with optional detections.
pub struct BandapDataset(Dataset);

pub struct BandapFilterBank(FilterBank);

pub struct BandapReport(MetricReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> BandapStatus {
    match err.root() {
        Error::MalformedFile(_) => BandapStatus::MalformedFile,
        Error::Referential(_) => BandapStatus::ReferentialError,
        Error::Value(_) => BandapStatus::ValueError,
        Error::UndefinedMetric(_) => BandapStatus::UndefinedMetric,
        Error::Io { .. } => BandapStatus::IoError,
        Error::InFile { .. } => unreachable!("root() strips file context"),
    }
}

struct Failure(BandapStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BandapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            BandapStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside bandap");
            BandapStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(BandapStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(BandapStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(BandapStatus::NullPointer, format!("{what} is NULL")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(BandapStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

fn scale_mode(mode: BandapScaleMode, reference_resolution: f64) -> ScaleMode {
    match mode {
        BandapScaleMode::Absolute => ScaleMode::Absolute,
        BandapScaleMode::Relative => ScaleMode::Relative { reference_resolution },
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next bandap call on the same thread.
#[no_mangle]
pub extern "C" fn bandap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a COCO annotation file.
///
/// # Safety
/// `gt_path` must be a NUL-terminated string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn bandap_dataset_load(
    gt_path: *const c_char,
    mode: BandapScaleMode,
    reference_resolution: f64,
    out: *mut *mut BandapDataset,
) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(gt_path, "gt_path")?;
        let ds = load_ground_truth(path, scale_mode(mode, reference_resolution))?;
        *out = Box::into_raw(Box::new(BandapDataset(ds)));
        Ok(())
    })
}

/// Parses COCO annotation JSON held in memory.
///
/// # Safety
/// `gt_json` must be a NUL-terminated string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn bandap_dataset_from_json(
    gt_json: *const c_char,
    mode: BandapScaleMode,
    reference_resolution: f64,
    out: *mut *mut BandapDataset,
) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(gt_json, "gt_json")?;
        let ds = Dataset::from_ground_truth_json(text, scale_mode(mode, reference_resolution))?;
        *out = Box::into_raw(Box::new(BandapDataset(ds)));
        Ok(())
    })
}

/// New dataset sharing `gt`'s ground truth, with detections from a COCO result file.
///
/// # Safety
/// `gt` must be a live handle; `det_path` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_dataset_with_detections_file(
    gt: *const BandapDataset,
    det_path: *const c_char,
    out: *mut *mut BandapDataset,
) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        let gt = ref_arg(gt, "gt")?;
        let path = str_arg(det_path, "det_path")?;
        let ds = load_detections(path, &gt.0)?;
        *out = Box::into_raw(Box::new(BandapDataset(ds)));
        Ok(())
    })
}

/// As [`bandap_dataset_with_detections_file`], from in-memory JSON.
///
/// # Safety
/// `gt` must be a live handle; `det_json` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_dataset_with_detections_json(
    gt: *const BandapDataset,
    det_json: *const c_char,
    out: *mut *mut BandapDataset,
) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        let gt = ref_arg(gt, "gt")?;
        let text = str_arg(det_json, "det_json")?;
        let ds = gt.0.attach_detections_json(text)?;
        *out = Box::into_raw(Box::new(BandapDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle; each out pointer must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn bandap_dataset_counts(
    ds: *const BandapDataset,
    n_images: *mut usize,
    n_annotations: *mut usize,
    n_detections: *mut usize,
) -> BandapStatus {
    guard(|| {
        let ds = &ref_arg(ds, "ds")?.0;
        if !n_images.is_null() {
            *n_images = ds.images().len();
        }
        if !n_annotations.is_null() {
            *n_annotations = ds.annotations().len();
        }
        if !n_detections.is_null() {
            *n_detections = ds.detections().len();
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bandap_dataset_free(ds: *mut BandapDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// `name` is one of `coco`, `asap`, `bandasap`.
///
/// # Safety
/// `name` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_bank_preset(name: *const c_char, out: *mut *mut BandapFilterBank) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        let name = str_arg(name, "name")?;
        let bank = preset(name).ok_or_else(|| Failure(BandapStatus::ValueError, format!("unknown preset {name:?}")))?;
        *out = Box::into_raw(Box::new(BandapFilterBank(bank)));
        Ok(())
    })
}

/// Parses a bank configuration (`{"name", "log_base", "filters": [{"label","a","b","c","d"}]}`).
///
/// # Safety
/// `json` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_bank_from_json(json: *const c_char, out: *mut *mut BandapFilterBank) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let bank = FilterBank::from_json(text)?;
        *out = Box::into_raw(Box::new(BandapFilterBank(bank)));
        Ok(())
    })
}

/// # Safety
/// `bank` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_bank_len(bank: *const BandapFilterBank, out: *mut usize) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ref_arg(bank, "bank")?.0.len();
        Ok(())
    })
}

/// Membership weight of filter `index` at `scale`.
///
/// # Safety
/// `bank` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_bank_membership(
    bank: *const BandapFilterBank,
    index: usize,
    scale: f64,
    out: *mut f64,
) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        let bank = &ref_arg(bank, "bank")?.0;
        let f = bank.filters().get(index).ok_or_else(|| {
            Failure(
                BandapStatus::OutOfRange,
                format!("filter index {index} out of range (bank has {})", bank.len()),
            )
        })?;
        *out = f.membership(scale);
        Ok(())
    })
}

/// Bank configuration JSON; free with [`bandap_string_free`].
///
/// # Safety
/// `bank` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_bank_to_json(bank: *const BandapFilterBank, out: *mut *mut c_char) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = into_c_string(ref_arg(bank, "bank")?.0.to_json());
        Ok(())
    })
}

/// # Safety
/// `bank` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bandap_bank_free(bank: *mut BandapFilterBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Evaluates `ds` against every band of `bank` at IoU 0.50:0.95.
/// `jobs` = 0 uses all cores; results do not depend on it.
///
/// # Safety
/// `ds` and `bank` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_evaluate(
    ds: *const BandapDataset,
    bank: *const BandapFilterBank,
    max_dets: usize,
    jobs: usize,
    out: *mut *mut BandapReport,
) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        let ds = &ref_arg(ds, "ds")?.0;
        let bank = &ref_arg(bank, "bank")?.0;
        let params = EvalParams {
            max_dets,
            jobs,
            ..EvalParams::default()
        };
        let report = evaluate_suite(ds, bank, &params)?;
        *out = Box::into_raw(Box::new(BandapReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_report_band_count(report: *const BandapReport, out: *mut usize) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ref_arg(report, "report")?.0.bands.len();
        Ok(())
    })
}

/// AP of band `index`. `*defined` is false (and `*value` NaN) when the band
/// has no weighted ground truth or the IoU level was not evaluated.
///
/// # Safety
/// `report` must be a live handle; `value` and `defined` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_report_band_ap(
    report: *const BandapReport,
    index: usize,
    kind: BandapApKind,
    value: *mut f64,
    defined: *mut bool,
) -> BandapStatus {
    guard(|| {
        out_arg(value, "value")?;
        out_arg(defined, "defined")?;
        let r = &ref_arg(report, "report")?.0;
        let band = r.bands.get(index).ok_or_else(|| {
            Failure(
                BandapStatus::OutOfRange,
                format!("band index {index} out of range (report has {})", r.bands.len()),
            )
        })?;
        let v = match kind {
            BandapApKind::Mean => band.ap,
            BandapApKind::Iou50 => band.ap50,
            BandapApKind::Iou75 => band.ap75,
        };
        *value = v.unwrap_or(f64::NAN);
        *defined = v.is_some();
        Ok(())
    })
}

/// Band label; free with [`bandap_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_report_band_label(
    report: *const BandapReport,
    index: usize,
    out: *mut *mut c_char,
) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        let r = &ref_arg(report, "report")?.0;
        let band = r
            .bands
            .get(index)
            .ok_or_else(|| Failure(BandapStatus::OutOfRange, format!("band index {index} out of range")))?;
        *out = into_c_string(band.label.clone());
        Ok(())
    })
}

/// Report JSON in the same layout the CLI writes; free with [`bandap_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bandap_report_to_json(report: *const BandapReport, out: *mut *mut c_char) -> BandapStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = into_c_string(report_to_json(&ref_arg(report, "report")?.0));
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bandap_report_free(report: *mut BandapReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bandap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
