//! C interface to `mdebif`.
//!
//! Problems and solution paths are opaque handles created and freed through
//! this API. Every fallible function returns an [`MdbStatus`]; on failure the
//! message is available from [`mdb_last_error_message`] on the same thread.
//! Matrices are written row-major. Strings returned by the library are
//! released with [`mdb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mdebif::bifurcation::{self, PinnedBranch};
use mdebif::criteria::{self, Verdict};
use mdebif::expr::{Expr, Scope};
use mdebif::mde::solve_ivp;
use mdebif::problem::ProblemFile;
use mdebif::{periodic, registry, report, variational, Error, ProblemDef, RegulatedPath, SolveSettings};

/// Result of an API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdbStatus {
    Ok = 0,
    /// Malformed or inconsistent input.
    Validation = 2,
    /// The computation failed: domain exit, no convergence, singular matrix.
    Numeric = 3,
    /// A required pointer argument was null.
    NullPointer = 4,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 5,
    /// The library panicked; this is a bug.
    Panic = 6,
}

/// A problem definition with its solver settings.
pub struct MdbProblem {
    file: ProblemFile,
    def: ProblemDef,
    settings: SolveSettings,
}

/// A solution path on `[0, T]`.
pub struct MdbPath {
    path: RegulatedPath,
    dim: usize,
}

/// Outcome of the Lomtatidze test for `y'' + q(t) y = 0`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MdbCriterion {
    pub q_minus: f64,
    pub q_plus: f64,
    pub product: f64,
    pub two_over_pi: f64,
    /// Nonzero when the test proves the periodic problem has only the
    /// trivial solution; zero when it is inconclusive.
    pub unique_trivial: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg).unwrap_or_else(|e| {
        let end = e.nul_position();
        CString::new(&e.into_vec()[..end]).unwrap_or_default()
    });
    LAST_ERROR.with(|cell| *cell.borrow_mut() = Some(msg));
}

struct Failure(MdbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() { MdbStatus::Validation } else { MdbStatus::Numeric };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MdbStatus::NullPointer, format!("{what} is null"))
}

fn validation(msg: impl Into<String>) -> Failure {
    Failure(MdbStatus::Validation, msg.into())
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MdbStatus {
    LAST_ERROR.with(|cell| *cell.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MdbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            MdbStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|e| Failure(MdbStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn problem_ref<'a>(p: *const MdbProblem) -> Result<&'a MdbProblem, Failure> {
    p.as_ref().ok_or_else(|| null("problem"))
}

fn check_dim(p: &MdbProblem, len: usize, what: &str) -> Result<(), Failure> {
    if len == p.def.dim() {
        Ok(())
    } else {
        Err(validation(format!("{what} has length {len}, expected {}", p.def.dim())))
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|e| validation(e.to_string()))
}

unsafe fn emit_problem(file: ProblemFile, out: *mut *mut MdbProblem) -> Result<(), Failure> {
    let def = file.to_def()?;
    let settings = file.solve_settings();
    *out = Box::into_raw(Box::new(MdbProblem { file, def, settings }));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next API call on the same thread.
#[no_mangle]
pub extern "C" fn mdb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|cell| cell.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mdb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a JSON problem file.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdb_problem_from_json(json: *const c_char, out: *mut *mut MdbProblem) -> MdbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        emit_problem(ProblemFile::from_json(text)?, out)
    })
}

/// Loads a built-in problem by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdb_problem_builtin(name: *const c_char, out: *mut *mut MdbProblem) -> MdbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = read_str(name, "name")?;
        emit_problem(registry::get(name)?, out)
    })
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `p` must come from `mdb_problem_*` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mdb_problem_free(p: *mut MdbProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// State dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn mdb_problem_dim(p: *const MdbProblem) -> usize {
    p.as_ref().map_or(0, |p| p.def.dim())
}

/// Period `T`, or NaN for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn mdb_problem_period(p: *const MdbProblem) -> f64 {
    p.as_ref().map_or(f64::NAN, |p| p.def.period())
}

/// Solves the initial value problem from `x0` (length `n`) on `[0, T]`.
///
/// # Safety
/// `p` must be a live problem handle, `x0` must point to `n` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mdb_solve(
    p: *const MdbProblem,
    lambda: f64,
    x0: *const f64,
    n: usize,
    out: *mut *mut MdbPath,
) -> MdbStatus {
    guard(|| {
        let p = problem_ref(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x0 = read_slice(x0, n, "x0")?;
        check_dim(p, n, "x0")?;
        let path = solve_ivp(&p.def, lambda, x0, &p.settings)?;
        *out = Box::into_raw(Box::new(MdbPath { path, dim: n }));
        Ok(())
    })
}

/// Writes `x(t)` into `out` (length `n`). At a jump time this is the
/// left-continuous value.
///
/// # Safety
/// `path` must be a live path handle and `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mdb_path_eval(path: *const MdbPath, t: f64, out: *mut f64, n: usize) -> MdbStatus {
    guard(|| {
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if n != path.dim {
            return Err(validation(format!("out has length {n}, expected {}", path.dim)));
        }
        let x = path.path.eval(t)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&x);
        Ok(())
    })
}

/// Releases a path. Null is ignored.
///
/// # Safety
/// `path` must come from [`mdb_solve`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mdb_path_free(path: *mut MdbPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Monodromy matrix along the trajectory from `x0`. Writes `M` row-major
/// into `m_out` (`n*n` doubles) and `det(I - M)` into `det_out`.
///
/// # Safety
/// `p` must be a live problem handle, `x0` must point to `n` doubles,
/// `m_out` to `n*n` writable doubles and `det_out` to one.
#[no_mangle]
pub unsafe extern "C" fn mdb_monodromy(
    p: *const MdbProblem,
    lambda: f64,
    x0: *const f64,
    n: usize,
    m_out: *mut f64,
    det_out: *mut f64,
) -> MdbStatus {
    guard(|| {
        let p = problem_ref(p)?;
        let x0 = read_slice(x0, n, "x0")?;
        if m_out.is_null() || det_out.is_null() {
            return Err(null("output"));
        }
        check_dim(p, n, "x0")?;
        let path = solve_ivp(&p.def, lambda, x0, &p.settings)?;
        let rep = variational::monodromy(&p.def, lambda, &path, &p.settings)?;
        let m = std::slice::from_raw_parts_mut(m_out, n * n);
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = rep.m[(i, j)];
            }
        }
        *det_out = rep.det_i_minus_m;
        Ok(())
    })
}

/// Periodic solution by damped Newton shooting from `guess`. On success
/// `x_out` holds the periodic initial state and `iterations_out`, if not
/// null, the number of Newton steps.
///
/// # Safety
/// `p` must be a live problem handle, `guess` and `x_out` must point to `n`
/// doubles, `iterations_out` must be null or writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn mdb_shoot(
    p: *const MdbProblem,
    lambda: f64,
    guess: *const f64,
    n: usize,
    tol: f64,
    max_iter: usize,
    x_out: *mut f64,
    iterations_out: *mut usize,
) -> MdbStatus {
    guard(|| {
        let p = problem_ref(p)?;
        let guess = read_slice(guess, n, "guess")?;
        if x_out.is_null() {
            return Err(null("x_out"));
        }
        check_dim(p, n, "guess")?;
        let r = periodic::shoot(&p.def, lambda, guess, tol, max_iter, &p.settings)?;
        std::slice::from_raw_parts_mut(x_out, n).copy_from_slice(&r.x0_star);
        if let Some(it) = iterations_out.as_mut() {
            *it = r.iterations;
        }
        Ok(())
    })
}

/// Scans `det(I - M(λ))` on `steps` uniform points of `[lambda_min,
/// lambda_max]` along the problem's branch state and returns the report as
/// JSON in `json_out`, to be released with [`mdb_string_free`].
///
/// # Safety
/// `p` must be a live problem handle and `json_out` writable.
#[no_mangle]
pub unsafe extern "C" fn mdb_scan_json(
    p: *const MdbProblem,
    lambda_min: f64,
    lambda_max: f64,
    steps: usize,
    json_out: *mut *mut c_char,
) -> MdbStatus {
    guard(|| {
        let p = problem_ref(p)?;
        if json_out.is_null() {
            return Err(null("json_out"));
        }
        let branch = p.file.branch.as_ref().ok_or_else(|| validation("problem has no branch state"))?;
        let grid = bifurcation::lambda_grid(lambda_min, lambda_max, steps);
        let report = bifurcation::scan(
            &p.def,
            &PinnedBranch::new(branch.x0.clone()),
            &grid,
            p.file.settings.bisect_tol,
            &p.settings,
        )?;
        let text = report::to_json(&report).map_err(Error::from)?;
        *json_out = into_c_string(text)?;
        Ok(())
    })
}

/// Lomtatidze test for `y'' + q(t) y = 0` with `q` an expression in `t`.
///
/// # Safety
/// `q` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mdb_criterion(q: *const c_char, period: f64, tol: f64, out: *mut MdbCriterion) -> MdbStatus {
    guard(|| {
        let q = read_str(q, "q")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let e = Expr::parse_scoped(q, &Scope::time()).map_err(|e| validation(format!("q: {e}")))?;
        let v = criteria::lomtatidze_check(&e, period, tol)?;
        *out = MdbCriterion {
            q_minus: v.q_minus,
            q_plus: v.q_plus,
            product: v.product,
            two_over_pi: v.two_over_pi,
            unique_trivial: i32::from(v.verdict == Verdict::UniqueTrivial),
        };
        Ok(())
    })
}
