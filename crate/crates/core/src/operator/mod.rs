//! The perturbed Hammerstein operator
//!
//! ```text
//! Tu(t) = γ(t)·( α[u] + Σᵢ χ_(τᵢ,1](t) Iᵢ(u(τᵢ)) / (1 − τᵢ) ) + ∫₀¹ k(t,s) g(s) f(s, u(s)) ds
//! ```
//!
//! on piecewise-continuous functions, together with the problem description
//! it acts on. Fixed points of `T` are the solutions of the impulsive BVP.

mod nystrom;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use nystrom::Nystrom;

use crate::error::{Error, Result};
use crate::expr::{Expr, Profile};
use crate::kernel::{KernelSpec, Weight};
use crate::measure::{BoundaryFunctional, ImpulseBound, StieltjesMeasure};
use crate::pcfun::{ConeParams, NodeKind, PCFunction, PcGrid};
use crate::quad;

#[derive(Debug, Clone, PartialEq)]
pub struct Impulse {
    pub tau: f64,
    /// `I(x)`, an expression in `x`.
    pub map: Profile,
    /// `δ₁` with `δ₁x ≤ I(x)`.
    pub delta_lower: f64,
    /// `δ₂` with `I(x) ≤ δ₂x`.
    pub delta_upper: f64,
}

impl Impulse {
    pub fn new(tau: f64, map: Profile, delta_lower: f64, delta_upper: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(format!("impulse time {tau} not in (0, 1)")));
        }
        if !(delta_lower >= 0.0 && delta_upper >= delta_lower && delta_upper.is_finite()) {
            return Err(Error::invalid(format!(
                "impulse bounds need 0 <= delta1 <= delta2, got {delta_lower}, {delta_upper}"
            )));
        }
        Ok(Impulse {
            tau,
            map,
            delta_lower,
            delta_upper,
        })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.map.eval(x)?)
    }
}

/// Grid sizes, tolerances and search ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub nodes_per_piece: usize,
    pub tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub shoot_steps: usize,
    pub quad_tol: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_count: usize,
    pub f_grid: usize,
    pub u_cap: f64,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            nodes_per_piece: 257,
            tol: 1e-9,
            damping: 0.5,
            max_iter: 10_000,
            shoot_steps: 2048,
            quad_tol: quad::DEFAULT_TOL,
            rho_min: 1e-3,
            rho_max: 1e3,
            rho_count: 25,
            f_grid: 129,
            u_cap: 1e6,
            seed: 0,
        }
    }
}

/// One impulsive BVP in integral form.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// `f(t, u)`.
    pub f: Expr,
    pub g: Weight,
    pub impulses: Vec<Impulse>,
    pub boundary: BoundaryFunctional,
    pub kernel: KernelSpec,
    pub cone: ConeParams,
    pub numerics: Numerics,
}

/// Largest `x` at which the impulse bounds are sampled.
const IMPULSE_AUDIT_MAX: f64 = 1e4;

impl ProblemSpec {
    /// Validates the data: impulse ordering and window placement, variable
    /// names, sampled positivity of `f` and `g`, the impulse slope bounds,
    /// `∫ₐᵇ Φg > 0` and the absence of boundary atoms at impulse times.
    pub fn new(
        f: Expr,
        g: Weight,
        impulses: Vec<Impulse>,
        boundary: BoundaryFunctional,
        kernel: KernelSpec,
        cone: ConeParams,
        numerics: Numerics,
    ) -> Result<Self> {
        for v in f.free_vars() {
            if v != "t" && v != "u" {
                return Err(Error::invalid(format!("f may only use t and u, found `{v}`")));
            }
        }
        let mut prev = 0.0;
        for imp in &impulses {
            if imp.tau <= prev {
                return Err(Error::invalid("impulse times must be strictly increasing"));
            }
            prev = imp.tau;
            if boundary.measure.has_atom_near(imp.tau) {
                return Err(Error::invalid(format!("boundary measure has an atom at impulse time {}", imp.tau)));
            }
        }
        let tau_max = impulses.last().map_or(0.0, |i| i.tau);
        if !(cone.a > tau_max) {
            return Err(Error::invalid(format!(
                "cone window [{}, {}] must lie right of the last impulse at {tau_max}",
                cone.a, cone.b
            )));
        }
        ConeParams::new(cone.a, cone.b, cone.c, tau_max)?;
        if numerics.nodes_per_piece < 5 {
            return Err(Error::invalid("nodes_per_piece must be at least 5"));
        }
        if !(numerics.damping > 0.0 && numerics.damping <= 1.0) {
            return Err(Error::invalid("damping must lie in (0, 1]"));
        }
        let spec = ProblemSpec {
            f,
            g,
            impulses,
            boundary,
            kernel,
            cone,
            numerics,
        };
        spec.audit_impulses()?;
        spec.audit_signs()?;
        let window = quad::integrate(
            |s| Ok(spec.kernel.phi(s)? * spec.g.eval(s)?),
            spec.cone.a,
            spec.cone.b,
            spec.g.breakpoints(),
            spec.numerics.quad_tol,
        )?;
        if !(window > 0.0) {
            return Err(Error::invalid("the weight must satisfy ∫_a^b Φ(s) g(s) ds > 0"));
        }
        Ok(spec)
    }

    fn audit_impulses(&self) -> Result<()> {
        for (i, imp) in self.impulses.iter().enumerate() {
            let at_zero = imp.eval(0.0)?;
            if at_zero != 0.0 {
                return Err(Error::invalid(format!("impulse {i}: I(0) = {at_zero}, must be 0")));
            }
            for k in 0..=200 {
                let x = 1e-6 * (IMPULSE_AUDIT_MAX / 1e-6f64).powf(k as f64 / 200.0);
                let v = imp.eval(x)?;
                let slack = 1e-12 * (1.0 + x);
                if v < imp.delta_lower * x - slack || v > imp.delta_upper * x + slack {
                    return Err(Error::invalid(format!(
                        "impulse {i}: I({x:e}) = {v:e} outside [{} x, {} x]",
                        imp.delta_lower, imp.delta_upper
                    )));
                }
            }
        }
        Ok(())
    }

    fn audit_signs(&self) -> Result<()> {
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            let v = self.g.eval(s)?;
            if v < 0.0 {
                return Err(Error::invalid(format!("g({s}) = {v} is negative")));
            }
        }
        for i in 0..=32 {
            let t = i as f64 / 32.0;
            for j in 0..=32 {
                let u = 100.0 * j as f64 / 32.0;
                let v = self.eval_f(t, u)?;
                if v < 0.0 {
                    return Err(Error::invalid(format!("f({t}, {u}) = {v} is negative")));
                }
            }
        }
        Ok(())
    }

    pub fn eval_f(&self, t: f64, u: f64) -> Result<f64> {
        Ok(self.f.eval(&[("t", t), ("u", u)])?)
    }

    pub fn jump_points(&self) -> Vec<f64> {
        self.impulses.iter().map(|i| i.tau).collect()
    }

    pub fn lower_bounds(&self) -> Vec<ImpulseBound> {
        self.impulses
            .iter()
            .map(|i| ImpulseBound {
                tau: i.tau,
                delta: i.delta_lower,
            })
            .collect()
    }

    pub fn upper_bounds(&self) -> Vec<ImpulseBound> {
        self.impulses
            .iter()
            .map(|i| ImpulseBound {
                tau: i.tau,
                delta: i.delta_upper,
            })
            .collect()
    }

    /// `dA₁ = dA + Σ δ₁ᵢ/(1 − τᵢ) Dirac(τᵢ)`.
    pub fn measure_lower(&self) -> Result<StieltjesMeasure> {
        self.boundary.augment(&self.lower_bounds())
    }

    /// `dA₂ = dA + Σ δ₂ᵢ/(1 − τᵢ) Dirac(τᵢ)`.
    pub fn measure_upper(&self) -> Result<StieltjesMeasure> {
        self.boundary.augment(&self.upper_bounds())
    }

    /// Default solver grid: uniform pieces with boundary atoms on nodes.
    pub fn default_grid(&self) -> Result<Arc<PcGrid>> {
        self.grid_with(self.numerics.nodes_per_piece)
    }

    pub fn grid_with(&self, nodes_per_piece: usize) -> Result<Arc<PcGrid>> {
        let mut extra = self.boundary.measure.atom_locations();
        extra.extend_from_slice(self.g.breakpoints());
        Ok(Arc::new(PcGrid::refined(&self.jump_points(), nodes_per_piece, &extra)?))
    }

    /// Same problem with the cone constant replaced (no window checks).
    pub fn with_cone_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.cone.c = c;
        out
    }
}

/// `Tu` on the grid of `u`.
pub fn apply_t(spec: &ProblemSpec, u: &PCFunction) -> Result<PCFunction> {
    Nystrom::new(spec, Arc::clone(u.grid()))?.apply(u)
}

/// `‖u − Tu‖` on the grid of `u`.
pub fn residual(spec: &ProblemSpec, u: &PCFunction) -> Result<f64> {
    Nystrom::new(spec, Arc::clone(u.grid()))?.residual(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeWitness {
    pub sample: usize,
    /// `min_[a,b] Tu − c‖Tu‖`, or `min Tu` if that is smaller.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeCheckReport {
    pub samples: usize,
    pub failures: Vec<ConeWitness>,
    /// Smallest `(min_[a,b] Tu − c‖Tu‖) / max(‖Tu‖, 1)`.
    pub worst_margin: f64,
}

impl ConeCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const CONE_CHECK_TOL: f64 = 1e-10;

/// A random element of the cone: `|trigonometric polynomial| + constant` on
/// every piece, shifted up into the cone if needed and scaled log-uniformly.
pub fn random_cone_element(grid: &Arc<PcGrid>, cone: &ConeParams, rng: &mut impl Rng) -> Result<PCFunction> {
    let pieces = grid.num_pieces();
    let coeffs: Vec<Vec<(f64, f64)>> = (0..pieces)
        .map(|_| {
            let degree = rng.random_range(0..=5);
            (0..=degree)
                .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let floor: f64 = rng.random_range(0.0..0.5);
    let mut piece_of_node = vec![0; grid.len()];
    for p in 0..pieces {
        for i in grid.piece_range(p) {
            piece_of_node[i] = p;
        }
    }
    let mut idx = 0;
    let raw = PCFunction::sample(Arc::clone(grid), |t, _| {
        let p = piece_of_node[idx];
        idx += 1;
        let v: f64 = coeffs[p]
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let w = std::f64::consts::PI * k as f64 * t;
                a * w.cos() + b * w.sin()
            })
            .sum();
        v.abs() + floor
    });
    let norm = raw.sup_norm();
    let low = raw.min_on(cone.a, cone.b)?;
    // lift by λ so that low + λ ≥ c (‖u‖ + λ)
    let lift = if low >= cone.c * norm {
        0.0
    } else {
        (cone.c * norm - low) / (1.0 - cone.c).max(1e-12) * (1.0 + 1e-6) + 1e-12
    };
    let scale = 10f64.powf(rng.random_range(-2.0..1.3));
    Ok(raw.map(|v| (v + lift) * scale))
}

/// Applies `T` to `n_random` seeded cone elements and checks `Tu ∈ K`.
pub fn cone_mapping_check(spec: &ProblemSpec, n_random: usize, seed: u64) -> Result<ConeCheckReport> {
    let mut report = ConeCheckReport {
        samples: n_random,
        failures: Vec::new(),
        worst_margin: f64::INFINITY,
    };
    if n_random == 0 {
        return Ok(report);
    }
    let grid = spec.default_grid()?;
    let nystrom = Nystrom::new(spec, Arc::clone(&grid))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for sample in 0..n_random {
        let u = random_cone_element(&grid, &spec.cone, &mut rng)?;
        let tu = nystrom.apply(&u)?;
        let margin = tu.cone_margin(&spec.cone)?;
        let scale = tu.sup_norm().max(1.0);
        report.worst_margin = report.worst_margin.min(tu.window_margin(&spec.cone)? / scale);
        if margin < -CONE_CHECK_TOL {
            report.failures.push(ConeWitness { sample, margin });
        }
    }
    Ok(report)
}

/// Jump sizes of `u` at each impulse time.
pub fn jumps(u: &PCFunction) -> Vec<f64> {
    (0..u.jumps().len()).map(|j| u.jump(j)).collect()
}

/// Largest `|Δu(τᵢ) − γ(τᵢ) Iᵢ(u(τᵢ))/(1 − τᵢ)|`; for the built-in kernel the
/// target is `Iᵢ(u(τᵢ))` itself.
pub fn jump_defect(spec: &ProblemSpec, u: &PCFunction) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (j, imp) in spec.impulses.iter().enumerate() {
        let left = u.values()[u.grid().left_index(j)];
        let want = spec.kernel.gamma(imp.tau)? * imp.eval(left)? / (1.0 - imp.tau);
        worst = worst.max((u.jump(j) - want).abs());
    }
    Ok(worst)
}

/// Node kinds for a flat index, re-exported for solution writers.
pub fn node_kind(grid: &PcGrid, idx: usize) -> NodeKind {
    grid.kind(idx)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::measure::Atom;

    pub fn example_with(f: &str, impulse: &str) -> ProblemSpec {
        let cone = ConeParams::new(0.25, 0.75, 0.25, 0.2).unwrap();
        let kernel = KernelSpec::builtin_dirichlet(&cone).unwrap();
        let measure = StieltjesMeasure::new(vec![Atom { loc: 0.5, weight: 0.8 }], None).unwrap();
        let map = Profile::parse(impulse, &["x"], vec![]).unwrap();
        let delta = map.eval(1.0).unwrap();
        ProblemSpec::new(
            Expr::parse(f).unwrap(),
            Profile::constant(1.0),
            vec![Impulse::new(0.2, map, delta, delta).unwrap()],
            BoundaryFunctional::new(0.0, measure).unwrap(),
            kernel,
            cone,
            Numerics::default(),
        )
        .unwrap()
    }

    pub fn example() -> ProblemSpec {
        example_with("u^2", "x/2")
    }

    pub fn trivial(a0: f64) -> ProblemSpec {
        let cone = ConeParams::new(0.25, 0.75, 0.25, 0.2).unwrap();
        ProblemSpec::new(
            Expr::parse("0").unwrap(),
            Profile::constant(1.0),
            vec![Impulse::new(0.2, Profile::constant(0.0), 0.0, 0.0).unwrap()],
            BoundaryFunctional::new(a0, StieltjesMeasure::empty()).unwrap(),
            KernelSpec::builtin_dirichlet(&cone).unwrap(),
            cone,
            Numerics::default(),
        )
        .unwrap()
    }
}
