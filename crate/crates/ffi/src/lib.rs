//! C interface to `qso`.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`QsoStatus`]; on failure [`qso_last_error`] describes the problem for the
//! calling thread. Strings returned through `char **` belong to the caller
//! and are released with [`qso_string_free`]. Type and state indices are
//! 1-based, as in the command-line tool.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qso::abscont::{rn_series, VaParams};
use qso::classify;
use qso::markov::{CylinderSet, TransitionFamily};
use qso::operator::DEDUP_RADIUS;
use qso::report::to_json;
use qso::spec_file::OperatorSpecFile;
use qso::{QsoError, QsoOperator, SimplexPoint};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Panic = 5,
}

/// Opaque operator handle.
pub struct QsoOperatorHandle {
    op: QsoOperator,
}

/// Opaque handle to the Markov family of an operator and start point.
pub struct QsoFamilyHandle {
    family: TransitionFamily,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

struct Failure(QsoStatus, String);

impl From<QsoError> for Failure {
    fn from(e: QsoError) -> Self {
        let status = match e {
            QsoError::Parse { .. } => QsoStatus::Parse,
            QsoError::InvalidArgument(_) | QsoError::IndexOutOfRange { .. } | QsoError::DimensionMismatch { .. } => {
                QsoStatus::InvalidArgument
            }
            _ => QsoStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QsoStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QsoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QsoStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QsoStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(QsoStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(QsoStatus::Validation, "output contains nul".into()))?;
    write_out(out, c.into_raw(), "out")
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn qso_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn qso_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qso_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an operator file given as JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_operator_from_json(json: *const c_char, symmetrize: bool, out: *mut *mut QsoOperatorHandle) -> QsoStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let op = OperatorSpecFile::parse(text, "<json>")?.to_operator(symmetrize)?;
        write_out(out, Box::into_raw(Box::new(QsoOperatorHandle { op })), "out")
    })
}

/// The two-type operator `V_a`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_operator_va(a: f64, out: *mut *mut QsoOperatorHandle) -> QsoStatus {
    guard(|| {
        let op = qso::abscont::va_operator(a)?;
        write_out(out, Box::into_raw(Box::new(QsoOperatorHandle { op })), "out")
    })
}

/// # Safety
/// `op` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qso_operator_free(op: *mut QsoOperatorHandle) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Number of types `n`.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_operator_dim(op: *const QsoOperatorHandle, out: *mut usize) -> QsoStatus {
    guard(|| write_out(out, handle(op, "op")?.op.dim(), "out"))
}

/// Coefficient `P[ij,k]` with 1-based indices.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_operator_coef(op: *const QsoOperatorHandle, i: usize, j: usize, k: usize, out: *mut f64) -> QsoStatus {
    guard(|| {
        let op = &handle(op, "op")?.op;
        let n = op.dim();
        for idx in [i, j, k] {
            if idx < 1 || idx > n {
                return Err(QsoError::IndexOutOfRange { index: idx, lo: 1, hi: n }.into());
            }
        }
        write_out(out, op.coef(i - 1, j - 1, k - 1), "out")
    })
}

/// Writes `V(x)` into `out[0..n]`.
///
/// # Safety
/// `x` and `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qso_operator_evaluate(op: *const QsoOperatorHandle, x: *const f64, n: usize, out: *mut f64) -> QsoStatus {
    guard(|| {
        let op = &handle(op, "op")?.op;
        let x = SimplexPoint::new(slice_arg(x, n, "x")?.to_vec())?;
        let y = op.evaluate(&x)?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(y.coords().as_ptr(), out, n);
        Ok(())
    })
}

/// Contraction modulus `max sum_j |P[i1 k, j] - P[i2 k, j]|`.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_operator_contraction_modulus(op: *const QsoOperatorHandle, out: *mut f64) -> QsoStatus {
    guard(|| write_out(out, classify::strict_contraction_general(&handle(op, "op")?.op).modulus, "out"))
}

/// Fixed points with residual at most `tol`, as JSON.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_operator_fixed_points_json(op: *const QsoOperatorHandle, tol: f64, out: *mut *mut c_char) -> QsoStatus {
    guard(|| {
        let fps = handle(op, "op")?.op.find_fixed_points(tol, DEDUP_RADIUS, &[])?;
        write_string(out, to_json(&fps))
    })
}

/// Full classification report as JSON. `resolution = 0` selects the
/// default lattice for the dimension.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_operator_classify_json(
    op: *const QsoOperatorHandle,
    resolution: usize,
    samples: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> QsoStatus {
    guard(|| {
        let res = (resolution > 0).then_some(resolution);
        let report = classify::classify(&handle(op, "op")?.op, res, samples, seed)?;
        write_string(out, to_json(&report))
    })
}

/// Markov family of `op` started at `x`. The operator is copied.
///
/// # Safety
/// `op` must be a live handle, `x` must point to `n` doubles, and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_family_new(
    op: *const QsoOperatorHandle,
    x: *const f64,
    n: usize,
    out: *mut *mut QsoFamilyHandle,
) -> QsoStatus {
    guard(|| {
        let op = handle(op, "op")?.op.clone();
        let x = SimplexPoint::new(slice_arg(x, n, "x")?.to_vec())?;
        let family = TransitionFamily::new(op, x)?;
        write_out(out, Box::into_raw(Box::new(QsoFamilyHandle { family })), "out")
    })
}

/// # Safety
/// `fam` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qso_family_free(fam: *mut QsoFamilyHandle) {
    if !fam.is_null() {
        drop(Box::from_raw(fam));
    }
}

/// Writes `x^(k)` into `out[0..n]`.
///
/// # Safety
/// `fam` must be a live handle; `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qso_family_state(fam: *const QsoFamilyHandle, k: usize, out: *mut f64, n: usize) -> QsoStatus {
    guard(|| {
        let fam = &handle(fam, "fam")?.family;
        if n != fam.dim() {
            return Err(QsoError::DimensionMismatch { expected: fam.dim(), got: n }.into());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(fam.state(k).as_ptr(), out, n);
        Ok(())
    })
}

/// Writes `H^[k,k+1]` row-major into `out[0..n*n]`.
///
/// # Safety
/// `fam` must be a live handle; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qso_family_transition_matrix(fam: *const QsoFamilyHandle, k: usize, out: *mut f64, len: usize) -> QsoStatus {
    guard(|| {
        let fam = &handle(fam, "fam")?.family;
        let n = fam.dim();
        if len != n * n {
            return Err(QsoError::DimensionMismatch { expected: n * n, got: len }.into());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let h = fam.transition_matrix(k);
        for i in 0..n {
            for j in 0..n {
                out.add(i * n + j).write(h[(i, j)]);
            }
        }
        Ok(())
    })
}

/// Measure of the cylinder with 1-based `states[0..len]` at times `l..`.
///
/// # Safety
/// `fam` must be a live handle; `states` must point to `len` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_family_cylinder_measure(
    fam: *const QsoFamilyHandle,
    l: usize,
    states: *const usize,
    len: usize,
    out: *mut f64,
) -> QsoStatus {
    guard(|| {
        let fam = &handle(fam, "fam")?.family;
        let c = CylinderSet::from_one_based(l, slice_arg(states, len, "states")?)?;
        write_out(out, fam.cylinder_measure(&c)?, "out")
    })
}

/// Absolute-continuity series for `V_{a1}` from `(x1, 1 - x1)` against
/// `V_{a2}` from `(y1, 1 - y1)`, as JSON.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qso_abscont_json(a1: f64, x1: f64, a2: f64, y1: f64, m_max: usize, out: *mut *mut c_char) -> QsoStatus {
    guard(|| {
        let num = VaParams::from_x1(a1, x1)?;
        let den = VaParams::from_x1(a2, y1)?;
        write_string(out, to_json(&rn_series(&num, &den, m_max)?))
    })
}
