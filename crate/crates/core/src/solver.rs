//! Fixed points of `T` on a Nyström grid.
//!
//! Damped Picard iteration is the basic method. For superlinear `f` the
//! positive fixed point repels Picard iterates (the linearisation has
//! spectral radius above one there), so [`Method::Auto`] falls back to
//! Newton's method on `U − T(U) = 0` with a backtracking line search.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::operator::{jump_defect, Nystrom, ProblemSpec};
use crate::pcfun::{PCFunction, PcGrid};

pub const DIVERGENCE_NORM: f64 = 1e12;
pub const STAGNATION_WINDOW: usize = 50;
pub const STAGNATION_RATIO: f64 = 1e-3;
pub const CONE_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Picard,
    Newton,
    /// Picard, then Newton from the same start if Picard fails.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub method: Method,
}

impl SolveOptions {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        SolveOptions {
            damping: spec.numerics.damping,
            max_iter: spec.numerics.max_iter,
            tol: spec.numerics.tol,
            method: Method::Auto,
        }
    }

    pub fn picard(damping: f64, max_iter: usize, tol: f64) -> Self {
        SolveOptions {
            damping,
            max_iter,
            tol,
            method: Method::Picard,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: PCFunction,
    pub iterations: usize,
    pub residual: f64,
    /// `min_[a,b] u − c‖u‖`.
    pub cone_margin: f64,
    pub method: Method,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    MaxIterations,
    Diverged,
    Stagnated,
    /// Newton could not make progress.
    LineSearch,
    SingularJacobian,
    /// Converged to a fixed point below the positive-solution floor.
    BelowFloor,
    OutsideCone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub reason: FailureReason,
    pub best: PCFunction,
    pub residual: f64,
    pub history: Vec<f64>,
    pub method: Method,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("no fixed point found ({:?}, residual {:e})", .0.reason, .0.residual)]
    NotConverged(Box<Failure>),
    #[error("all {} starts failed", .0.len())]
    AllStartsFailed(Vec<Failure>),
}

pub type SolveResult<T> = std::result::Result<T, SolveError>;

fn clamp(values: &mut [f64]) {
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn sup_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn finish(
    spec: &ProblemSpec,
    grid: &Arc<PcGrid>,
    values: Vec<f64>,
    residual: f64,
    iterations: usize,
    method: Method,
    history: Vec<f64>,
) -> Result<Solution> {
    let u = PCFunction::new(Arc::clone(grid), values)?;
    let cone_margin = u.window_margin(&spec.cone)?;
    Ok(Solution {
        u,
        iterations,
        residual,
        cone_margin,
        method,
        history,
    })
}

fn failure(grid: &Arc<PcGrid>, reason: FailureReason, values: Vec<f64>, residual: f64, history: Vec<f64>, method: Method) -> SolveError {
    match PCFunction::new(Arc::clone(grid), values) {
        Ok(best) => SolveError::NotConverged(Box::new(Failure {
            reason,
            best,
            residual,
            history,
            method,
        })),
        Err(e) => e.into(),
    }
}

/// Damped Picard iteration `u ← (1−λ)u + λTu` on the grid of `init`.
fn picard(ny: &Nystrom, spec: &ProblemSpec, init: &[f64], opts: &SolveOptions) -> SolveResult<Solution> {
    let grid = ny.grid();
    let lambda = opts.damping;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid("damping must lie in (0, 1]").into());
    }
    let mut u = init.to_vec();
    clamp(&mut u);
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, u.clone());
    for it in 0..=opts.max_iter {
        let tu = ny.apply_values(&u)?;
        let r = sup_diff(&u, &tu);
        history.push(r);
        if r < best.0 {
            best = (r, u.clone());
        }
        if r <= opts.tol {
            return Ok(finish(spec, grid, u, r, it, Method::Picard, history)?);
        }
        if !r.is_finite() || sup_abs(&tu) > DIVERGENCE_NORM {
            return Err(failure(grid, FailureReason::Diverged, best.1, best.0, history, Method::Picard));
        }
        if it >= STAGNATION_WINDOW {
            let old = history[it - STAGNATION_WINDOW];
            if r > (1.0 - STAGNATION_RATIO) * old {
                return Err(failure(grid, FailureReason::Stagnated, best.1, best.0, history, Method::Picard));
            }
        }
        if it == opts.max_iter {
            break;
        }
        for (x, t) in u.iter_mut().zip(&tu) {
            *x = (1.0 - lambda) * *x + lambda * t;
        }
        clamp(&mut u);
    }
    Err(failure(grid, FailureReason::MaxIterations, best.1, best.0, history, Method::Picard))
}

/// Newton on `F(U) = U − T(U)` with backtracking on `‖F‖∞`.
fn newton(ny: &Nystrom, spec: &ProblemSpec, init: &[f64], opts: &SolveOptions) -> SolveResult<Solution> {
    let grid = ny.grid();
    let n = init.len();
    let mut u = init.to_vec();
    clamp(&mut u);
    let mut tu = ny.apply_values(&u)?;
    let mut r = sup_diff(&u, &tu);
    let mut history = vec![r];
    for it in 1..=NEWTON_MAX_ITER.min(opts.max_iter.max(1)) {
        if r <= opts.tol {
            return Ok(finish(spec, grid, u, r, it - 1, Method::Newton, history)?);
        }
        if !r.is_finite() || sup_abs(&u) > DIVERGENCE_NORM {
            return Err(failure(grid, FailureReason::Diverged, u, r, history, Method::Newton));
        }
        let jt = ny.jacobian(&u)?;
        let jac = DMatrix::<f64>::identity(n, n) - jt;
        let rhs = DVector::from_iterator(n, u.iter().zip(&tu).map(|(x, t)| t - x));
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(failure(grid, FailureReason::SingularJacobian, u, r, history, Method::Newton));
        };
        if step.iter().any(|s| !s.is_finite()) {
            return Err(failure(grid, FailureReason::SingularJacobian, u, r, history, Method::Newton));
        }
        let mut lambda = 1.0;
        let accepted = loop {
            let mut trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x + lambda * s).collect();
            clamp(&mut trial);
            let t_trial = ny.apply_values(&trial)?;
            let r_trial = sup_diff(&trial, &t_trial);
            if r_trial.is_finite() && r_trial < (1.0 - 1e-4 * lambda) * r {
                break Some((trial, t_trial, r_trial));
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                break None;
            }
        };
        match accepted {
            Some((nu, ntu, nr)) => {
                u = nu;
                tu = ntu;
                r = nr;
                history.push(r);
            }
            None => {
                if r <= opts.tol {
                    break;
                }
                return Err(failure(grid, FailureReason::LineSearch, u, r, history, Method::Newton));
            }
        }
    }
    if r <= opts.tol {
        let iterations = history.len() - 1;
        return Ok(finish(spec, grid, u, r, iterations, Method::Newton, history)?);
    }
    Err(failure(grid, FailureReason::MaxIterations, u, r, history, Method::Newton))
}

/// Fixed point of `T` from `init`, on the grid of `init`.
pub fn solve_fixed_point(spec: &ProblemSpec, init: &PCFunction, opts: &SolveOptions) -> SolveResult<Solution> {
    let ny = Nystrom::new(spec, Arc::clone(init.grid()))?;
    solve_with(&ny, spec, init.values(), opts)
}

fn solve_with(ny: &Nystrom, spec: &ProblemSpec, init: &[f64], opts: &SolveOptions) -> SolveResult<Solution> {
    match opts.method {
        Method::Picard => picard(ny, spec, init, opts),
        Method::Newton => newton(ny, spec, init, opts),
        Method::Auto => match picard(ny, spec, init, opts) {
            Ok(s) => Ok(s),
            Err(SolveError::NotConverged(_)) => newton(ny, spec, init, opts),
            Err(e) => Err(e),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartReport {
    pub solution: Solution,
    /// Index into `starts` of the winning start.
    pub start: usize,
    pub starts: Vec<StartKind>,
    pub failures: Vec<(usize, FailureReason)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StartKind {
    Constant { value: f64 },
    Gamma { scale: f64 },
}

fn acceptable(spec: &ProblemSpec, sol: &Solution, floor: f64) -> Option<FailureReason> {
    if sol.u.sup_norm() < floor {
        Some(FailureReason::BelowFloor)
    } else if !sol.u.in_cone(&spec.cone, CONE_TOL * sol.u.sup_norm().max(1.0)) {
        Some(FailureReason::OutsideCone)
    } else {
        None
    }
}

/// Starts for [`multi_start`]: constants log-spaced in `[ρ₁, ρ₂/c]`, then the
/// same levels as multiples of `γ/‖γ‖`.
pub fn start_list(rho1: f64, rho2: f64, c: f64, n_starts: usize) -> Vec<StartKind> {
    let hi = rho2 / c;
    let levels: Vec<f64> = match n_starts {
        0 => vec![],
        1 => vec![(rho1 * hi).sqrt()],
        n => (0..n).map(|i| rho1 * (hi / rho1).powf(i as f64 / (n - 1) as f64)).collect(),
    };
    let mut out: Vec<StartKind> = levels.iter().map(|&value| StartKind::Constant { value }).collect();
    out.extend(levels.iter().map(|&scale| StartKind::Gamma { scale }));
    out
}

fn start_values(grid: &PcGrid, kernel: &KernelSpec, start: StartKind) -> Result<Vec<f64>> {
    match start {
        StartKind::Constant { value } => Ok(vec![value; grid.len()]),
        StartKind::Gamma { scale } => {
            let norm = kernel.norm_gamma();
            grid.times().iter().map(|&t| Ok(scale * kernel.gamma(t)? / norm)).collect()
        }
    }
}

/// Runs the starts in order and returns the first positive cone solution
/// with `‖u‖ ≥ ρ₁(1 − 10⁻⁶)`.
pub fn multi_start(
    spec: &ProblemSpec,
    grid: Arc<PcGrid>,
    rho1: f64,
    rho2: f64,
    n_starts: usize,
    opts: &SolveOptions,
) -> SolveResult<MultiStartReport> {
    if !(rho1 > 0.0 && rho1 < rho2) {
        return Err(Error::invalid(format!("need 0 < rho1 < rho2, got {rho1}, {rho2}")).into());
    }
    let ny = Nystrom::new(spec, Arc::clone(&grid))?;
    let floor = rho1 * (1.0 - 1e-6);
    let starts = start_list(rho1, rho2, spec.cone.c, n_starts);
    let mut failures = Vec::new();
    let mut attempts = Vec::new();
    let methods: &[Method] = match opts.method {
        Method::Auto => &[Method::Picard, Method::Newton],
        Method::Picard => &[Method::Picard],
        Method::Newton => &[Method::Newton],
    };
    for (i, &start) in starts.iter().enumerate() {
        let init = start_values(&grid, &spec.kernel, start)?;
        for &method in methods {
            let mut o = *opts;
            o.method = method;
            let failed = match solve_with(&ny, spec, &init, &o) {
                Ok(sol) => match acceptable(spec, &sol, floor) {
                    None => {
                        return Ok(MultiStartReport {
                            solution: sol,
                            start: i,
                            starts,
                            failures,
                        })
                    }
                    Some(reason) => Failure {
                        reason,
                        residual: sol.residual,
                        best: sol.u,
                        history: sol.history,
                        method,
                    },
                },
                Err(SolveError::NotConverged(f)) => *f,
                Err(e) => return Err(e),
            };
            failures.push((i, failed.reason));
            attempts.push(failed);
        }
    }
    Err(SolveError::AllStartsFailed(attempts))
}

pub const DEFAULT_STARTS: usize = 8;

/// Diagnostics every returned solution should satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionChecks {
    pub residual: f64,
    pub cone_margin: f64,
    pub jump_defect: f64,
    /// `|u(1)|`.
    pub right_boundary: f64,
    /// `|u(0) − α[u]|`.
    pub left_boundary: f64,
}

pub fn solution_checks(spec: &ProblemSpec, u: &PCFunction) -> Result<SolutionChecks> {
    let ny = Nystrom::new(spec, Arc::clone(u.grid()))?;
    let v = u.values();
    Ok(SolutionChecks {
        residual: ny.residual_values(v)?,
        cone_margin: u.window_margin(&spec.cone)?,
        jump_defect: jump_defect(spec, u)?,
        right_boundary: v[v.len() - 1].abs(),
        left_boundary: (v[0] - spec.boundary.apply(u)?).abs(),
    })
}
