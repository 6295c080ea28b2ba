//! C interface to `impulse-cone`.
//!
//! Problems and solutions are opaque heap handles created and released
//! through this API. Every function returns an [`IcStatus`]; on failure the
//! message is available from [`ic_last_error`] on the same thread until the
//! next call. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use impulse_cone::cli::{load_spec, parse_spec, verify_solution};
use impulse_cone::conditions::{Checker, FAssertions, HVerdict};
use impulse_cone::constants::ProblemConstants;
use impulse_cone::operator::cone_mapping_check;
use impulse_cone::pcfun::NodeKind;
use impulse_cone::solver::{multi_start, SolveError, SolveOptions, DEFAULT_STARTS};
use impulse_cone::{Error, PCFunction, ProblemSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or an out-of-range argument.
    InvalidArgument = 1,
    /// The problem text or an expression in it did not parse.
    Parse = 2,
    /// Parsed, but the data violate a requirement.
    InvalidProblem = 3,
    Numerical = 4,
    /// The search ran but found no certificate or no solution.
    NotFound = 5,
    Io = 6,
    /// A buffer passed in was too small; the needed length was written.
    BufferTooSmall = 7,
    Panic = 8,
}

/// Problem data loaded from a TOML description.
pub struct IcProblem {
    spec: ProblemSpec,
}

/// A computed solution on its nodal grid.
pub struct IcSolution {
    u: PCFunction,
    residual: f64,
    iterations: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IcConstants {
    pub m: f64,
    pub big_m: f64,
    pub gamma: f64,
    pub int_kcal_g: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub a0: f64,
    pub norm_gamma: f64,
    pub window_mass: f64,
    /// `NaN` when `gamma >= 1`.
    pub i1_coefficient: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcVerdict {
    None = 0,
    H1 = 1,
    H2 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IcVerifyReport {
    pub operator_residual: f64,
    pub shooting_crosscheck: f64,
    pub jump_error: f64,
    pub derivative_jump_error: f64,
    pub right_boundary_error: f64,
    pub left_boundary_error: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(IcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse(_) | Error::Format(_) => IcStatus::Parse,
            Error::InvalidSpec(_) | Error::Hypothesis(_) | Error::Degenerate(_) => IcStatus::InvalidProblem,
            Error::Io(_) => IcStatus::Io,
            Error::Domain(_) => IcStatus::InvalidArgument,
            Error::Eval(_) | Error::Quadrature { .. } | Error::Numerical(_) => IcStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(IcStatus::InvalidArgument, msg.to_owned())
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> IcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            IcStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid("null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string is not UTF-8"))
}

unsafe fn problem<'a>(p: *const IcProblem) -> Result<&'a ProblemSpec, Failure> {
    p.as_ref().map(|h| &h.spec).ok_or_else(|| invalid("null problem"))
}

unsafe fn solution<'a>(p: *const IcSolution) -> Result<&'a IcSolution, Failure> {
    p.as_ref().ok_or_else(|| invalid("null solution"))
}

unsafe fn store<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("null output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. Owned by the
/// library and valid until the next call into it.
#[no_mangle]
pub extern "C" fn ic_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a problem from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ic_problem_from_toml(toml: *const c_char, out: *mut *mut IcProblem) -> IcStatus {
    guard(|| {
        let spec = parse_spec(text(toml)?)?;
        store(out, Box::into_raw(Box::new(IcProblem { spec })))
    })
}

/// Reads and parses a problem file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ic_problem_load(path: *const c_char, out: *mut *mut IcProblem) -> IcStatus {
    guard(|| {
        let spec = load_spec(Path::new(text(path)?))?;
        store(out, Box::into_raw(Box::new(IcProblem { spec })))
    })
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ic_problem_free(p: *mut IcProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live problem handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ic_constants(p: *const IcProblem, out: *mut IcConstants) -> IcStatus {
    guard(|| {
        let k = ProblemConstants::compute(problem(p)?)?;
        store(
            out,
            IcConstants {
                m: k.m,
                big_m: k.big_m,
                gamma: k.gamma,
                int_kcal_g: k.int_kcal_g,
                c: k.c,
                c1: k.c1,
                c2: k.c2,
                a0: k.a0,
                norm_gamma: k.norm_gamma,
                window_mass: k.window_mass,
                i1_coefficient: if k.gamma < 1.0 { k.i1_coefficient() } else { f64::NAN },
            },
        )
    })
}

/// Checks the existence hypotheses for one pair `(rho1, rho2)`. Returns
/// `Ok` with `None` written when neither holds.
///
/// # Safety
/// `p` must be a live problem handle and `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn ic_check_pair(p: *const IcProblem, rho1: f64, rho2: f64, verdict: *mut IcVerdict) -> IcStatus {
    guard(|| {
        let spec = problem(p)?;
        let report = Checker::new(spec, FAssertions::default())?.check_pair(rho1, rho2)?;
        let v = match report.verdict {
            HVerdict::None => IcVerdict::None,
            HVerdict::H1 { .. } => IcVerdict::H1,
            HVerdict::H2 { .. } => IcVerdict::H2,
        };
        store(verdict, v)
    })
}

/// Applies the operator to `samples` seeded random cone elements and writes
/// how many images left the cone.
///
/// # Safety
/// `p` must be a live problem handle and `failures` writable.
#[no_mangle]
pub unsafe extern "C" fn ic_cone_check(p: *const IcProblem, samples: usize, seed: u64, failures: *mut usize) -> IcStatus {
    guard(|| {
        let rep = cone_mapping_check(problem(p)?, samples, seed)?;
        store(failures, rep.failures.len())
    })
}

/// Looks for a positive solution with norm in the band `[rho1, rho2/c]`.
/// Writes null and returns `NotFound` when every start fails.
///
/// # Safety
/// `p` must be a live problem handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ic_solve(p: *const IcProblem, rho1: f64, rho2: f64, out: *mut *mut IcSolution) -> IcStatus {
    guard(|| {
        let spec = problem(p)?;
        store(out, ptr::null_mut())?;
        let grid = spec.default_grid()?;
        match multi_start(spec, Arc::clone(&grid), rho1, rho2, DEFAULT_STARTS, &SolveOptions::from_spec(spec)) {
            Ok(rep) => {
                let s = IcSolution {
                    residual: rep.solution.residual,
                    iterations: rep.solution.iterations,
                    u: rep.solution.u,
                };
                store(out, Box::into_raw(Box::new(s)))
            }
            Err(SolveError::Numeric(e)) => Err(e.into()),
            Err(e) => Err(Failure(IcStatus::NotFound, e.to_string())),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ic_solution_free(s: *mut IcSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of nodes, counting both sides of each jump.
///
/// # Safety
/// `s` must be a live solution handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn ic_solution_len(s: *const IcSolution) -> usize {
    s.as_ref().map_or(0, |s| s.u.grid().len())
}

/// # Safety
/// `s` must be a live solution handle; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ic_solution_stats(
    s: *const IcSolution,
    residual: *mut f64,
    iterations: *mut usize,
    sup_norm: *mut f64,
) -> IcStatus {
    guard(|| {
        let s = solution(s)?;
        store(residual, s.residual)?;
        store(iterations, s.iterations)?;
        store(sup_norm, s.u.sup_norm())
    })
}

/// Copies node times, sides (`-1` left of a jump, `1` right, `0` plain) and
/// values into caller buffers of length `cap`. Any of the three may be null.
/// When `cap` is too small the needed length goes to `len` and
/// `BufferTooSmall` is returned.
///
/// # Safety
/// Non-null buffers must hold `cap` elements; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ic_solution_nodes(
    s: *const IcSolution,
    t: *mut f64,
    side: *mut i32,
    u: *mut f64,
    cap: usize,
    len: *mut usize,
) -> IcStatus {
    guard(|| {
        let s = solution(s)?;
        let n = s.u.grid().len();
        store(len, n)?;
        if cap < n {
            return Err(Failure(IcStatus::BufferTooSmall, format!("need {n} elements, got {cap}")));
        }
        for (i, (ti, kind, ui)) in s.u.nodes().enumerate() {
            if !t.is_null() {
                t.add(i).write(ti);
            }
            if !side.is_null() {
                side.add(i).write(match kind {
                    NodeKind::Left => -1,
                    NodeKind::Right => 1,
                    NodeKind::Plain => 0,
                });
            }
            if !u.is_null() {
                u.add(i).write(ui);
            }
        }
        Ok(())
    })
}

/// Residual, boundary and jump errors of a solution, plus its distance to a
/// shooting solution.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ic_verify(p: *const IcProblem, s: *const IcSolution, out: *mut IcVerifyReport) -> IcStatus {
    guard(|| {
        let r = verify_solution(problem(p)?, &solution(s)?.u)?;
        store(
            out,
            IcVerifyReport {
                operator_residual: r.operator_residual,
                shooting_crosscheck: r.shooting_crosscheck,
                jump_error: r.jump_error,
                derivative_jump_error: r.derivative_jump_error,
                right_boundary_error: r.right_boundary_error,
                left_boundary_error: r.left_boundary_error,
            },
        )
    })
}
