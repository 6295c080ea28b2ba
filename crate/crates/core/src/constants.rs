//! Scalars consumed by the index conditions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::kernel::{golden_max, KernelSpec, Weight};
use crate::measure::{BoundaryFunctional, StieltjesMeasure};
use crate::operator::ProblemSpec;
use crate::pcfun::Side;
use crate::quad;

/// Number of `t` samples before golden-section refinement.
pub const T_SAMPLES: usize = 513;
const T_XTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "int_Kcal_g")]
    pub int_kcal_g: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "A0")]
    pub a0: f64,
    pub norm_gamma: f64,
    /// `dA₁([a, b])`.
    pub window_mass: f64,
}

impl ProblemConstants {
    pub fn compute(spec: &ProblemSpec) -> Result<Self> {
        let tol = spec.numerics.quad_tol;
        let upper = spec.measure_upper()?;
        let lower = spec.measure_lower()?;
        Ok(ProblemConstants {
            m: compute_m(&spec.kernel, &spec.g, tol)?,
            big_m: compute_big_m(&spec.kernel, &spec.g, spec.cone.a, spec.cone.b, tol)?,
            gamma: compute_gamma(&spec.kernel, &upper)?,
            int_kcal_g: compute_kcal_g(&spec.kernel, &upper, &spec.g, tol)?,
            c: spec.cone.c,
            c1: spec.kernel.c1(),
            c2: spec.kernel.c2(),
            a0: spec.boundary.a0,
            norm_gamma: spec.kernel.norm_gamma(),
            window_mass: lower.mass_on(spec.cone.a, spec.cone.b)?,
        })
    }

    /// `‖γ‖ ∫𝒦g / (1 − Γ) + 1/m`, the factor multiplying `f^{0,ρ}` in (I¹).
    pub fn i1_coefficient(&self) -> f64 {
        self.norm_gamma * self.int_kcal_g / (1.0 - self.gamma) + 1.0 / self.m
    }

    pub fn alpha0(&self, rho: f64) -> f64 {
        self.a0 / rho + self.window_mass
    }

    /// Largest `f^{0,ρ}` for which (I¹) holds at `ρ`.
    pub fn i1_threshold(&self, rho: f64) -> f64 {
        (1.0 - self.a0 * self.norm_gamma / ((1.0 - self.gamma) * rho)) / self.i1_coefficient()
    }

    /// Smallest `f_{ρ,ρ/c}` for which (I⁰) holds at `ρ`.
    pub fn i0_threshold(&self, rho: f64) -> f64 {
        (1.0 - self.c2 * self.norm_gamma * self.alpha0(rho)) * self.big_m
    }
}

fn refine_sampled<F>(mut f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let n = T_SAMPLES;
    let ts: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &t) in ts.iter().enumerate() {
        let v = f(t)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let (l, r) = (ts[best.0.saturating_sub(1)], ts[(best.0 + 1).min(n - 1)]);
    let (_, refined) = golden_max(&mut f, l, r, T_XTOL)?;
    Ok(refined.max(best.1))
}

/// `m` with `1/m = sup_t ∫₀¹ k(t,s) g(s) ds`.
pub fn compute_m(ks: &KernelSpec, g: &Weight, tol: f64) -> Result<f64> {
    let sup = refine_sampled(|t| quad::kernel_action(ks, g, |_| Ok(1.0), &[], t, tol), 0.0, 1.0)?;
    if !(sup > 0.0) {
        return Err(Error::Degenerate("sup_t ∫ k(t,s) g(s) ds vanishes".into()));
    }
    Ok(1.0 / sup)
}

/// `M(a,b)` with `1/M = inf_{t ∈ [a,b]} ∫ₐᵇ k(t,s) g(s) ds`.
pub fn compute_big_m(ks: &KernelSpec, g: &Weight, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::invalid(format!("window [{a}, {b}] is empty")));
    }
    let neg_inf = refine_sampled(|t| Ok(-quad::kernel_action_on(ks, g, &mut |_| Ok(1.0), &[], t, a, b, tol)?), a, b)?;
    let inf = -neg_inf;
    if !(inf > 0.0) {
        return Err(Error::Degenerate("inf_t ∫ₐᵇ k(t,s) g(s) ds vanishes".into()));
    }
    Ok(1.0 / inf)
}

/// `Γ = ∫ γ dA₂`.
pub fn compute_gamma(ks: &KernelSpec, da2: &StieltjesMeasure) -> Result<f64> {
    da2.integrate(|t, _| ks.gamma(t), Side::Default, &[])
}

/// `𝒦(s) = ∫ k(t,s) dA₂(t)`.
pub fn kcal(ks: &KernelSpec, da2: &StieltjesMeasure, s: f64) -> Result<f64> {
    da2.integrate(|t, _| ks.k(t, s), Side::Default, &[s])
}

/// `∫₀¹ 𝒦(s) g(s) ds`, integrating in `s` first for every part of `dA₂`.
pub fn compute_kcal_g(ks: &KernelSpec, da2: &StieltjesMeasure, g: &Weight, tol: f64) -> Result<f64> {
    da2.integrate(|t, _| quad::kernel_action(ks, g, |_| Ok(1.0), &[], t, tol), Side::Default, &[])
}

/// `α₀ = A₀/ρ + dA₁([a, b])`.
pub fn alpha0_default(boundary: &BoundaryFunctional, da1: &StieltjesMeasure, a: f64, b: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho = {rho} must be positive")));
    }
    Ok(boundary.a0 / rho + da1.mass_on(a, b)?)
}

/// A sampled extremum of `f(t,u)/ρ` over a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FBound {
    pub value: f64,
    pub t: f64,
    pub u: f64,
    /// The `u` range was cut at `u_cap`.
    pub capped: bool,
}

/// `f^{0,ρ} = sup { f(t,u)/ρ : 0 ≤ t ≤ 1, 0 ≤ u ≤ ρ }`.
pub fn f_sup(f: &Expr, rho: f64, grid: usize) -> Result<FBound> {
    check_rho(rho)?;
    let (v, t, u) = extremum(f, [0.0, 1.0], [0.0, rho], grid, true)?;
    Ok(FBound {
        value: v / rho,
        t,
        u,
        capped: false,
    })
}

/// `f_{ρ,ρ/c} = inf { f(t,u)/ρ : a ≤ t ≤ b, ρ ≤ u ≤ ρ/c }`, with `u ≤ u_cap`.
pub fn f_inf(f: &Expr, rho: f64, c: f64, a: f64, b: f64, grid: usize, u_cap: f64) -> Result<FBound> {
    check_rho(rho)?;
    let top = rho / c;
    let capped = top > u_cap;
    let hi = if capped { u_cap.max(rho) } else { top };
    let (v, t, u) = extremum(f, [a, b], [rho, hi], grid, false)?;
    Ok(FBound {
        value: v / rho,
        t,
        u,
        capped,
    })
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("rho = {rho} must be positive and finite")))
    }
}

const NM_STARTS: usize = 5;

/// Grid search plus Nelder–Mead from the best cells. Returns `(f, t, u)`.
fn extremum(f: &Expr, tr: [f64; 2], ur: [f64; 2], n: usize, maximize: bool) -> Result<(f64, f64, f64)> {
    let n = n.max(2);
    let sign = if maximize { 1.0 } else { -1.0 };
    let objective = |t: f64, u: f64| -> Result<f64> { Ok(sign * f.eval(&[("t", t), ("u", u)])?) };
    let at = |r: [f64; 2], i: usize| r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64;
    let mut samples = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (t, u) = (at(tr, i), at(ur, j));
            samples.push((objective(t, u)?, t, u));
        }
    }
    samples.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut best = samples[0];
    let scale = [(tr[1] - tr[0]) / (n - 1) as f64, (ur[1] - ur[0]) / (n - 1) as f64];
    for &(_, t, u) in samples.iter().take(NM_STARTS) {
        let cand = nelder_mead(&objective, [t, u], scale, tr, ur)?;
        if cand.0 > best.0 {
            best = cand;
        }
    }
    Ok((sign * best.0, best.1, best.2))
}

/// Maximises `obj` over the box, clamping trial points.
fn nelder_mead<F>(obj: &F, start: [f64; 2], step: [f64; 2], tr: [f64; 2], ur: [f64; 2]) -> Result<(f64, f64, f64)>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let clamp = |p: [f64; 2]| [p[0].clamp(tr[0], tr[1]), p[1].clamp(ur[0], ur[1])];
    let eval = |p: [f64; 2]| -> Result<(f64, [f64; 2])> {
        let p = clamp(p);
        Ok((obj(p[0], p[1])?, p))
    };
    let mut simplex = [
        eval(start)?,
        eval([start[0] + step[0], start[1]])?,
        eval([start[0], start[1] + step[1]])?,
    ];
    let lerp = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
    for _ in 0..200 {
        simplex.sort_by(|x, y| y.0.total_cmp(&x.0));
        let spread = (simplex[0].0 - simplex[2].0).abs();
        let size = (0..2)
            .map(|k| {
                (simplex[0].1[k] - simplex[2].1[k])
                    .abs()
                    .max((simplex[0].1[k] - simplex[1].1[k]).abs())
            })
            .fold(0.0, f64::max);
        if spread <= 1e-15 * (1.0 + simplex[0].0.abs()) && size < 1e-12 {
            break;
        }
        let centroid = lerp(simplex[0].1, simplex[1].1, 0.5);
        let worst = simplex[2];
        let reflected = eval(lerp(worst.1, centroid, 2.0))?;
        if reflected.0 > simplex[0].0 {
            let expanded = eval(lerp(worst.1, centroid, 3.0))?;
            simplex[2] = if expanded.0 > reflected.0 { expanded } else { reflected };
        } else if reflected.0 > simplex[1].0 {
            simplex[2] = reflected;
        } else {
            let contracted = eval(lerp(worst.1, centroid, 0.5))?;
            if contracted.0 > worst.0 {
                simplex[2] = contracted;
            } else {
                let best = simplex[0].1;
                for v in simplex.iter_mut().skip(1) {
                    *v = eval(lerp(best, v.1, 0.5))?;
                }
            }
        }
    }
    simplex.sort_by(|x, y| y.0.total_cmp(&x.0));
    Ok((simplex[0].0, simplex[0].1[0], simplex[0].1[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Profile;
    use crate::measure::Atom;
    use crate::operator::testing::example;
    use crate::pcfun::ConeParams;

    fn builtin() -> KernelSpec {
        KernelSpec::builtin_dirichlet(&ConeParams::new(0.25, 0.75, 0.25, 0.2).unwrap()).unwrap()
    }

    const TOL: f64 = quad::DEFAULT_TOL;

    #[test]
    fn m_examples() {
        let ks = builtin();
        assert!((compute_m(&ks, &Profile::constant(1.0), TOL).unwrap() - 8.0).abs() < 1e-9);
        assert!((compute_m(&ks, &Profile::constant(2.0), TOL).unwrap() - 4.0).abs() < 1e-9);
        assert!(matches!(compute_m(&ks, &Profile::constant(0.0), TOL), Err(Error::Degenerate(_))));
    }

    #[test]
    fn big_m_examples() {
        let ks = builtin();
        let one = Profile::constant(1.0);
        assert!((compute_big_m(&ks, &one, 0.25, 0.75, TOL).unwrap() - 16.0).abs() < 1e-9);
        assert!((compute_big_m(&ks, &Profile::constant(2.0), 0.25, 0.75, TOL).unwrap() - 8.0).abs() < 1e-9);
        assert!(compute_big_m(&ks, &one, 0.5, 0.5, TOL).is_err());
    }

    #[test]
    fn big_m_matches_closed_form() {
        // ∫ₐᵇ k(t,s) ds = (1−t)(t²−a²)/2 + t((1−t)²−(1−b)²)/2
        let ks = builtin();
        let (a, b): (f64, f64) = (0.1, 0.6);
        let inner = |t: f64| (1.0 - t) * (t * t - a * a) / 2.0 + t * ((1.0 - t).powi(2) - (1.0 - b).powi(2)) / 2.0;
        let want = (0..=2000)
            .map(|i| inner(a + (b - a) * i as f64 / 2000.0))
            .fold(f64::INFINITY, f64::min);
        let got = compute_big_m(&ks, &Profile::constant(1.0), a, b, TOL).unwrap();
        assert!((1.0 / got - want).abs() < 1e-11);
    }

    #[test]
    fn gamma_and_kcal_examples() {
        let spec = example();
        let da2 = spec.measure_upper().unwrap();
        assert!((compute_gamma(&spec.kernel, &da2).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(compute_gamma(&spec.kernel, &StieltjesMeasure::empty()).unwrap(), 0.0);
        let one = Profile::constant(1.0);
        assert!((compute_kcal_g(&spec.kernel, &da2, &one, TOL).unwrap() - 0.15).abs() < 1e-12);
        assert_eq!(compute_kcal_g(&spec.kernel, &StieltjesMeasure::empty(), &one, TOL).unwrap(), 0.0);
        let doubled = da2.scaled(2.0).unwrap();
        assert!((compute_kcal_g(&spec.kernel, &doubled, &one, TOL).unwrap() - 0.30).abs() < 1e-12);
        let heavy = StieltjesMeasure::new(vec![Atom { loc: 0.25, weight: 2.0 }], None).unwrap();
        assert!(compute_gamma(&spec.kernel, &heavy).unwrap() >= 1.0);
    }

    #[test]
    fn kcal_g_with_density_matches_iterated_integral() {
        let ks = builtin();
        let density = Profile::parse("t", &["t", "s"], vec![]).unwrap();
        let da = StieltjesMeasure::new(vec![], Some(density)).unwrap();
        // 𝒦(s) = ∫ t k(t,s) dt = s(1-s²)/6 ; ∫ 𝒦 = 1/24
        for s in [0.1, 0.5, 0.9] {
            assert!((kcal(&ks, &da, s).unwrap() - s * (1.0 - s * s) / 6.0).abs() < 1e-13);
        }
        let got = compute_kcal_g(&ks, &da, &Profile::constant(1.0), TOL).unwrap();
        assert!((got - 1.0 / 24.0).abs() < 1e-13);
    }

    #[test]
    fn example_constants() {
        let c = ProblemConstants::compute(&example()).unwrap();
        assert!((c.m - 8.0).abs() < 1e-9);
        assert!((c.big_m - 16.0).abs() < 1e-9);
        assert_eq!(c.c, 0.25);
        assert!((c.i1_coefficient() - 1.625).abs() < 1e-10);
        assert!((c.i1_threshold(1.0) / (8.0 / 13.0) - 1.0).abs() < 1e-9);
        assert!((c.i0_threshold(1.0) / 12.8 - 1.0).abs() < 1e-9);
        assert!(c.m <= c.big_m);
    }

    #[test]
    fn f_bound_examples() {
        let sq = Expr::parse("u^2").unwrap();
        assert!((f_sup(&sq, 0.5, 129).unwrap().value - 0.5).abs() < 1e-12);
        let inf = f_inf(&sq, 13.0, 0.25, 0.25, 0.75, 129, 1e6).unwrap();
        assert!((inf.value - 13.0).abs() < 1e-12);
        assert!(!inf.capped);
        let zero = Expr::parse("0").unwrap();
        assert_eq!(f_sup(&zero, 2.0, 129).unwrap().value, 0.0);
        assert_eq!(f_inf(&zero, 2.0, 0.25, 0.25, 0.75, 129, 1e6).unwrap().value, 0.0);
        assert!(f_inf(&sq, 1e3, 1e-4, 0.25, 0.75, 17, 1e6).unwrap().capped);
    }

    #[test]
    fn nelder_mead_finds_interior_optimum() {
        // peak at (0.3141, 0.7) lies between grid nodes
        let f = Expr::parse("2 - (t - 0.3141)^2 - (u - 0.7)^2").unwrap();
        let b = f_sup(&f, 1.0, 9).unwrap();
        assert!((b.value - 2.0).abs() < 1e-12);
        assert!((b.t - 0.3141).abs() < 1e-5);
    }

    #[test]
    fn alpha0_examples() {
        let spec = example();
        let da1 = spec.measure_lower().unwrap();
        assert!((alpha0_default(&spec.boundary, &da1, 0.25, 0.75, 1.0).unwrap() - 0.8).abs() < 1e-15);
        let empty = BoundaryFunctional::new(0.0, StieltjesMeasure::empty()).unwrap();
        assert_eq!(alpha0_default(&empty, &StieltjesMeasure::empty(), 0.25, 0.75, 3.0).unwrap(), 0.0);
        let a0 = BoundaryFunctional::new(1.0, StieltjesMeasure::empty()).unwrap();
        assert_eq!(alpha0_default(&a0, &StieltjesMeasure::empty(), 0.25, 0.75, 2.0).unwrap(), 0.5);
    }
}
