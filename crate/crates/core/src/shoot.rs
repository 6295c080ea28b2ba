//! Shooting solver for the impulsive BVP
//!
//! ```text
//! u″ + g(t) f(t, u) = 0,   Δu|τᵢ = Iᵢ(u(τᵢ)),   Δu′|τᵢ = Iᵢ(u(τᵢ))/(τᵢ − 1),
//! u(0) = α[u],   u(1) = 0,
//! ```
//!
//! integrated with classical RK4 from `(u(0), u′(0)) = (A, B)`; Newton on the
//! two boundary residuals. Between mesh points the integrator sees
//! `f(t, max(u, 0))` so that trial trajectories dipping below zero stay
//! inside the domain of `f`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{Nystrom, ProblemSpec};
use crate::pcfun::{PCFunction, PcGrid, Side};

pub const SHOOT_TOL: f64 = 1e-10;
pub const POSITIVITY_SLACK: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;
const MAX_NEWTON: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: PCFunction,
    pub du: PCFunction,
}

/// Mesh with `n_steps` steps per piece and atoms and weight breakpoints on nodes.
pub fn shooting_grid(spec: &ProblemSpec, n_steps: usize) -> Result<Arc<PcGrid>> {
    let mut extra = spec.boundary.measure.atom_locations();
    extra.extend_from_slice(spec.g.breakpoints());
    if let Some(d) = spec.boundary.measure.density() {
        extra.extend_from_slice(d.breakpoints());
    }
    Ok(Arc::new(PcGrid::refined(&spec.jump_points(), n_steps + 1, &extra)?))
}

fn rhs(spec: &ProblemSpec, t: f64, u: f64, v: f64) -> Result<(f64, f64)> {
    Ok((v, -spec.g.eval(t)? * spec.eval_f(t, u.max(0.0))?))
}

fn rk4_step(spec: &ProblemSpec, t: f64, h: f64, u: f64, v: f64) -> Result<(f64, f64)> {
    let (k1u, k1v) = rhs(spec, t, u, v)?;
    let (k2u, k2v) = rhs(spec, t + h / 2.0, u + h / 2.0 * k1u, v + h / 2.0 * k1v)?;
    let (k3u, k3v) = rhs(spec, t + h / 2.0, u + h / 2.0 * k2u, v + h / 2.0 * k2v)?;
    let (k4u, k4v) = rhs(spec, t + h, u + h * k3u, v + h * k3v)?;
    Ok((
        u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    ))
}

/// Integrates on a given mesh.
pub fn integrate_on(spec: &ProblemSpec, grid: &Arc<PcGrid>, a: f64, b: f64) -> Result<Trajectory> {
    if grid.jumps() != spec.jump_points().as_slice() {
        return Err(Error::invalid("mesh jump points differ from the impulse times"));
    }
    let ts = grid.times();
    let mut us = vec![0.0; ts.len()];
    let mut vs = vec![0.0; ts.len()];
    let (mut u, mut v) = (a, b);
    for p in 0..grid.num_pieces() {
        let range = grid.piece_range(p);
        if p > 0 {
            let left = range.start - 1;
            let imp = &spec.impulses[p - 1];
            let jump = imp.eval(us[left])?;
            u = us[left] + jump;
            v = vs[left] + jump / (imp.tau - 1.0);
        }
        us[range.start] = u;
        vs[range.start] = v;
        for i in range.start + 1..range.end {
            let (t0, t1) = (ts[i - 1], ts[i]);
            (u, v) = rk4_step(spec, t0, t1 - t0, u, v)?;
            if !(u.is_finite() && v.is_finite()) {
                return Err(Error::Numerical(format!("trajectory blew up near t = {t1}")));
            }
            us[i] = u;
            vs[i] = v;
        }
    }
    Ok(Trajectory {
        u: PCFunction::new(Arc::clone(grid), us)?,
        du: PCFunction::new(Arc::clone(grid), vs)?,
    })
}

pub fn integrate_ivp(spec: &ProblemSpec, a: f64, b: f64, n_steps: usize) -> Result<Trajectory> {
    integrate_on(spec, &shooting_grid(spec, n_steps)?, a, b)
}

/// `(u(1), A − α[u])` for the trajectory from `(A, B)`.
pub fn boundary_residuals(spec: &ProblemSpec, a: f64, b: f64, n_steps: usize) -> Result<(f64, f64)> {
    residuals_on(spec, &shooting_grid(spec, n_steps)?, a, b).map(|(r, _)| r)
}

fn residuals_on(spec: &ProblemSpec, grid: &Arc<PcGrid>, a: f64, b: f64) -> Result<((f64, f64), Trajectory)> {
    let traj = integrate_on(spec, grid, a, b)?;
    let v = traj.u.values();
    let r1 = v[v.len() - 1];
    let r2 = a - spec.boundary.apply(&traj.u)?;
    Ok(((r1, r2), traj))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootSolution {
    pub trajectory: Trajectory,
    pub a: f64,
    pub b: f64,
    pub residual: f64,
    pub iterations: usize,
    pub guess: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShootFailureReason {
    MaxIterations,
    SingularJacobian,
    LineSearch,
    NotPositive,
    BlowUp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootFailure {
    pub guess: (f64, f64),
    pub reason: ShootFailureReason,
    pub residual: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ShootError {
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("shooting failed from all {} guesses", .0.len())]
    AllGuessesFailed(Vec<ShootFailure>),
}

fn inf_norm(r: (f64, f64)) -> f64 {
    r.0.abs().max(r.1.abs())
}

/// Damped Newton on the boundary residuals from every guess in turn.
pub fn solve_shooting(spec: &ProblemSpec, guesses: &[(f64, f64)], n_steps: usize) -> std::result::Result<ShootSolution, ShootError> {
    let grid = shooting_grid(spec, n_steps)?;
    let mut failures = Vec::new();
    for (gi, &guess) in guesses.iter().enumerate() {
        match newton_from(spec, &grid, guess) {
            Ok((a, b, iterations, res, trajectory)) => {
                if trajectory.u.min_value() < -POSITIVITY_SLACK {
                    failures.push(ShootFailure {
                        guess,
                        reason: ShootFailureReason::NotPositive,
                        residual: res,
                    });
                    continue;
                }
                return Ok(ShootSolution {
                    trajectory,
                    a,
                    b,
                    residual: res,
                    iterations,
                    guess: gi,
                });
            }
            Err(f) => failures.push(ShootFailure {
                guess,
                reason: f.0,
                residual: f.1,
            }),
        }
    }
    Err(ShootError::AllGuessesFailed(failures))
}

type NewtonOutcome = std::result::Result<(f64, f64, usize, f64, Trajectory), (ShootFailureReason, f64)>;

fn newton_from(spec: &ProblemSpec, grid: &Arc<PcGrid>, (mut a, mut b): (f64, f64)) -> NewtonOutcome {
    let eval = |a: f64, b: f64| residuals_on(spec, grid, a, b).ok();
    let Some((mut r, mut traj)) = eval(a, b) else {
        return Err((ShootFailureReason::BlowUp, f64::INFINITY));
    };
    for it in 0..=MAX_NEWTON {
        let norm = inf_norm(r);
        if norm <= SHOOT_TOL {
            return Ok((a, b, it, norm, traj));
        }
        if it == MAX_NEWTON {
            break;
        }
        let ha = FD_STEP * a.abs().max(1.0);
        let hb = FD_STEP * b.abs().max(1.0);
        let (Some((ra, _)), Some((rb, _))) = (eval(a + ha, b), eval(a, b + hb)) else {
            return Err((ShootFailureReason::BlowUp, norm));
        };
        let j = [[(ra.0 - r.0) / ha, (rb.0 - r.0) / hb], [(ra.1 - r.1) / ha, (rb.1 - r.1) / hb]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let scale = j.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err((ShootFailureReason::SingularJacobian, norm));
        }
        let da = -(j[1][1] * r.0 - j[0][1] * r.1) / det;
        let db = -(-j[1][0] * r.0 + j[0][0] * r.1) / det;
        let mut lambda = 1.0;
        loop {
            if let Some((rt, tt)) = eval(a + lambda * da, b + lambda * db) {
                if inf_norm(rt) < (1.0 - 1e-4 * lambda) * norm {
                    a += lambda * da;
                    b += lambda * db;
                    r = rt;
                    traj = tt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err((ShootFailureReason::LineSearch, norm));
            }
        }
    }
    Err((ShootFailureReason::MaxIterations, inf_norm(r)))
}

/// Guesses seeded by an integral-equation solution: `u(0)` and `u′(0⁺)`.
pub fn guess_from_solution(spec: &ProblemSpec, u: &PCFunction) -> Result<(f64, f64)> {
    let ny = Nystrom::new(spec, Arc::clone(u.grid()))?;
    let slope = ny.image_derivative(u.values(), 0.0, Side::Right)?;
    Ok((u.values()[0], slope))
}

/// A 5 × 5 grid over `[0, ρ₂/c] × [−10, 10]`.
pub fn default_guesses(rho2: f64, c: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(25);
    for i in 0..5 {
        for j in 0..5 {
            out.push((rho2 / c * i as f64 / 4.0, -10.0 + 5.0 * j as f64));
        }
    }
    out
}

/// Sup-norm distance, taken over the nodes of the coarser function with the
/// finer one evaluated by local cubic interpolation on its own pieces.
pub fn crosscheck(u_integral: &PCFunction, u_shoot: &PCFunction) -> Result<f64> {
    if u_integral.jumps() != u_shoot.jumps() {
        return Err(Error::invalid("functions have different jump points"));
    }
    let (coarse, fine) = if u_integral.grid().len() <= u_shoot.grid().len() {
        (u_integral, u_shoot)
    } else {
        (u_shoot, u_integral)
    };
    let cg = coarse.grid();
    let mut worst: f64 = 0.0;
    for p in 0..cg.num_pieces() {
        for i in cg.piece_range(p) {
            let t = cg.times()[i];
            let v = cubic_on_piece(fine, p, t);
            worst = worst.max((coarse.values()[i] - v).abs());
        }
    }
    Ok(worst)
}

fn cubic_on_piece(u: &PCFunction, p: usize, t: f64) -> f64 {
    let grid = u.grid();
    let range = grid.piece_range(p);
    let ts = &grid.times()[range.clone()];
    let vs = &u.values()[range];
    let n = ts.len();
    let k = ts.partition_point(|&x| x < t);
    if k < n && ts[k] == t {
        return vs[k];
    }
    let width = n.min(4);
    let first = k.saturating_sub(2).min(n - width);
    let xs = &ts[first..first + width];
    let ys = &vs[first..first + width];
    let mut total = 0.0;
    for l in 0..width {
        let mut w = 1.0;
        for m in 0..width {
            if m != l {
                w *= (t - xs[m]) / (xs[l] - xs[m]);
            }
        }
        total += w * ys[l];
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Expr, Profile};
    use crate::operator::testing::*;
    use crate::operator::Impulse;

    fn dirichlet_one() -> ProblemSpec {
        let mut spec = trivial(0.0);
        spec.f = Expr::parse("1").unwrap();
        spec
    }

    #[test]
    fn linear_trajectory_is_exact() {
        let spec = trivial(1.0);
        let tr = integrate_ivp(&spec, 1.0, -1.0, 64).unwrap();
        for (t, _, v) in tr.u.nodes() {
            assert!((v - (1.0 - t)).abs() < 1e-14);
        }
    }

    #[test]
    fn quadratic_trajectory_is_exact() {
        let spec = dirichlet_one();
        let tr = integrate_ivp(&spec, 0.0, 0.5, 64).unwrap();
        for (t, _, v) in tr.u.nodes() {
            assert!((v - t * (1.0 - t) / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn jump_is_applied_exactly() {
        let spec = example();
        let tr = integrate_ivp(&spec, 0.7, 0.3, 128).unwrap();
        let g = tr.u.grid();
        let (l, r) = (g.left_index(0), g.right_index(0));
        let y = tr.u.values()[l];
        assert_eq!(tr.u.values()[r], y + y / 2.0);
        assert_eq!(tr.du.values()[r], tr.du.values()[l] + (y / 2.0) / (0.2 - 1.0));
    }

    #[test]
    fn residual_examples() {
        let spec = trivial(1.0);
        let (r1, r2) = boundary_residuals(&spec, 1.0, -1.0, 32).unwrap();
        assert!(r1.abs() < 1e-15 && r2.abs() < 1e-15);
        let (r1, r2) = boundary_residuals(&spec, 1.0, -0.5, 32).unwrap();
        assert!((r1 - 0.5).abs() < 1e-14 && r2 == 0.0);
        let (r1, _) = boundary_residuals(&dirichlet_one(), 0.0, 0.0, 32).unwrap();
        assert!((r1 + 0.5).abs() < 1e-14);
    }

    #[test]
    fn rk4_is_fourth_order() {
        // u″ = −u (g ≡ 1, f = u) from (0, 1): u = sin t
        let mut spec = trivial(0.0);
        spec.f = Expr::parse("u").unwrap();
        let err = |n| {
            let tr = integrate_ivp(&spec, 0.0, 1.0, n).unwrap();
            tr.u.nodes().map(|(t, _, v)| (v - t.sin()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 / e2 >= 8.0, "{e1} {e2}");
    }

    #[test]
    fn shooting_solves_linear_problem() {
        let spec = trivial(1.0);
        let sol = solve_shooting(&spec, &[(0.0, 0.0)], 64).unwrap();
        assert!((sol.a - 1.0).abs() < 1e-10 && (sol.b + 1.0).abs() < 1e-10);
    }

    #[test]
    fn shooting_reports_failure() {
        // f = exp(u) overflows from this start
        let mut blowup = dirichlet_one();
        blowup.f = Expr::parse("exp(u)").unwrap();
        let err = solve_shooting(&blowup, &[(1e3, 1e3)], 64).unwrap_err();
        assert!(matches!(err, ShootError::AllGuessesFailed(ref f) if f.len() == 1));
    }

    #[test]
    fn crosscheck_examples() {
        let spec = example();
        let tr = integrate_ivp(&spec, 0.7, 0.3, 128).unwrap();
        assert_eq!(crosscheck(&tr.u, &tr.u).unwrap(), 0.0);
        let shifted = tr.u.map(|v| v + 0.01);
        assert!((crosscheck(&tr.u, &shifted).unwrap() - 0.01).abs() < 1e-12);
        let coarse = integrate_ivp(&spec, 0.7, 0.3, 32).unwrap();
        assert!(crosscheck(&coarse.u, &tr.u).unwrap() < 1e-7);
    }

    #[test]
    fn two_jumps_have_exact_relations() {
        let mut spec = example();
        let half = Profile::parse("x/2", &["x"], vec![]).unwrap();
        spec.impulses = vec![
            Impulse::new(0.1, half.clone(), 0.5, 0.5).unwrap(),
            Impulse::new(0.2, half, 0.5, 0.5).unwrap(),
        ];
        let tr = integrate_ivp(&spec, 1.0, 0.0, 64).unwrap();
        for j in 0..2 {
            let g = tr.u.grid();
            let y = tr.u.values()[g.left_index(j)];
            assert_eq!(tr.u.values()[g.right_index(j)], y + y / 2.0);
        }
    }
}
