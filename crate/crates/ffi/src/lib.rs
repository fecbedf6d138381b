//! C ABI over `scnopt`.
//!
//! Problems and solve results cross the boundary as opaque handles. Every
//! fallible call returns an [`ScnStatus`]; on failure the message is kept
//! per thread and read back with [`scn_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scnopt::cli::{solve_summary, to_json9};
use scnopt::problem::{parse_problem, Problem};
use scnopt::solver::{apfa_solve, SolveResult, SolveStatus};
use scnopt::ScnError;
use thiserror::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Dimension = 5,
    Infeasible = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Solver outcome, mirroring the library's termination statuses.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScnSolveStatus {
    EpsFeasibleConverged = 0,
    RhoCapReached = 1,
    MaxOuterReached = 2,
    InnerFailure = 3,
}

impl From<SolveStatus> for ScnSolveStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::EpsFeasibleConverged => ScnSolveStatus::EpsFeasibleConverged,
            SolveStatus::RhoCapReached => ScnSolveStatus::RhoCapReached,
            SolveStatus::MaxOuterReached => ScnSolveStatus::MaxOuterReached,
            SolveStatus::InnerFailure => ScnSolveStatus::InnerFailure,
        }
    }
}

/// A parsed problem file: form, solver parameters and start point.
pub struct ScnProblem(Problem);

/// The outcome of [`scn_solve`].
pub struct ScnResult {
    summary: CString,
    point: Vec<f64>,
    status: SolveStatus,
    outer_iterations: usize,
}

#[derive(Debug, Error)]
enum FfiError {
    #[error("null pointer passed as `{0}`")]
    Null(&'static str),
    #[error("`{0}` is not valid UTF-8")]
    Utf8(&'static str),
    #[error("buffer holds {got} values, {needed} needed")]
    Buffer { needed: usize, got: usize },
    #[error(transparent)]
    Scn(#[from] ScnError),
    #[error("panic inside scnopt: {0}")]
    Panic(String),
}

impl FfiError {
    fn status(&self) -> ScnStatus {
        match self {
            FfiError::Null(_) => ScnStatus::NullPointer,
            FfiError::Utf8(_) => ScnStatus::InvalidUtf8,
            FfiError::Buffer { .. } => ScnStatus::BufferTooSmall,
            FfiError::Panic(_) => ScnStatus::Panic,
            FfiError::Scn(e) => match e {
                ScnError::ProblemFile(_) | ScnError::Expr(_) | ScnError::Component { .. } => {
                    ScnStatus::Parse
                }
                ScnError::Dimension { .. } | ScnError::Shape(_) => ScnStatus::Dimension,
                ScnError::Infeasible(_) | ScnError::WitnessInfeasible { .. } => {
                    ScnStatus::Infeasible
                }
                _ => ScnStatus::InvalidArgument,
            },
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> ScnStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_default();
        Err(FfiError::Panic(msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ScnStatus::Ok
        }
        Err(e) => {
            let status = e.status();
            set_last_error(e.to_string());
            status
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| FfiError::Utf8(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], FfiError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(FfiError::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn fill(
    src: &[f64],
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> Result<(), FfiError> {
    if !written.is_null() {
        *written = src.len();
    }
    if cap < src.len() {
        return Err(FfiError::Buffer {
            needed: src.len(),
            got: cap,
        });
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(FfiError::Null("out"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn scn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a problem file given as JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scn_problem_from_json(
    json: *const c_char,
    out: *mut *mut ScnProblem,
) -> ScnStatus {
    guard(|| {
        if out.is_null() {
            return Err(FfiError::Null("out"));
        }
        let p = parse_problem(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(ScnProblem(p)));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`scn_problem_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scn_problem_free(problem: *mut ScnProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Block sizes `n`, `m1`, `m2` of the problem's form.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scn_problem_dims(
    problem: *const ScnProblem,
    n: *mut usize,
    m1: *mut usize,
    m2: *mut usize,
) -> ScnStatus {
    guard(|| {
        let p = problem.as_ref().ok_or(FfiError::Null("problem"))?;
        if n.is_null() || m1.is_null() || m2.is_null() {
            return Err(FfiError::Null("dims"));
        }
        let part = p.0.form.partition();
        (*n, *m1, *m2) = (part.n, part.m1, part.m2);
        Ok(())
    })
}

/// Evaluates `g` at the witness point of `x`. The point `(x, y, z)` is
/// written to `out` when it is not null; `written` receives its length.
///
/// # Safety
/// `x` must hold `n` values and `out` at least `cap`.
#[no_mangle]
pub unsafe extern "C" fn scn_witness(
    problem: *const ScnProblem,
    x: *const f64,
    n: usize,
    g_value: *mut f64,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> ScnStatus {
    guard(|| {
        let p = problem.as_ref().ok_or(FfiError::Null("problem"))?;
        let point = p.0.form.witness_eval(slice(x, n, "x")?)?;
        if !g_value.is_null() {
            *g_value = p.0.form.eval_g(point.as_slice())?;
        }
        if !out.is_null() || !written.is_null() {
            fill(point.as_slice(), out, cap, written)?;
        }
        Ok(())
    })
}

/// Runs the alternating penalty solver with the file's parameters and start.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scn_solve(
    problem: *const ScnProblem,
    out: *mut *mut ScnResult,
) -> ScnStatus {
    guard(|| {
        let p = problem.as_ref().ok_or(FfiError::Null("problem"))?;
        if out.is_null() {
            return Err(FfiError::Null("out"));
        }
        let r: SolveResult = apfa_solve(&p.0.form, &p.0.solver, &p.0.start)?;
        let summary =
            CString::new(to_json9(&solve_summary(&p.0, &r))).expect("JSON has no nul bytes");
        *out = Box::into_raw(Box::new(ScnResult {
            summary,
            point: r.point.as_slice().to_vec(),
            status: r.status,
            outer_iterations: r.trace.len(),
        }));
        Ok(())
    })
}

/// # Safety
/// `result` must come from [`scn_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scn_result_free(result: *mut ScnResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scn_result_status(
    result: *const ScnResult,
    status: *mut ScnSolveStatus,
) -> ScnStatus {
    guard(|| {
        let r = result.as_ref().ok_or(FfiError::Null("result"))?;
        if status.is_null() {
            return Err(FfiError::Null("status"));
        }
        *status = r.status.into();
        Ok(())
    })
}

/// Number of outer iterations, or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scn_result_iterations(result: *const ScnResult) -> usize {
    result.as_ref().map_or(0, |r| r.outer_iterations)
}

/// Copies the final `(x, y, z)`; `written` receives the full length even
/// when `cap` is too small.
///
/// # Safety
/// `out` must hold at least `cap` values.
#[no_mangle]
pub unsafe extern "C" fn scn_result_point(
    result: *const ScnResult,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> ScnStatus {
    guard(|| {
        let r = result.as_ref().ok_or(FfiError::Null("result"))?;
        fill(&r.point, out, cap, written)
    })
}

/// The solve summary as JSON, owned by the result handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scn_result_json(result: *const ScnResult) -> *const c_char {
    result.as_ref().map_or(ptr::null(), |r| r.summary.as_ptr())
}
