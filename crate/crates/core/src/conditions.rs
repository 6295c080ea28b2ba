//! Index conditions (I¹), (I⁰) and the existence hypotheses (H₁), (H₂).
//!
//! (I¹) at `ρ`:  `A₀‖γ‖/((1−Γ)ρ) + f^{0,ρ} (‖γ‖ ∫𝒦g/(1−Γ) + 1/m) ≤ 1`, needs `Γ < 1`.
//! (I⁰) at `ρ`:  `c₂‖γ‖α₀ + f_{ρ,ρ/c}/M ≥ 1`.
//! (H₁): (I¹) at `ρ₁`, (I⁰) at `ρ₂`, `ρ₁ < ρ₂`.
//! (H₂): (I⁰) at `ρ₁`, (I¹) at `ρ₂`, `ρ₁ < cρ₂`.
//!
//! Both index statements also assume `u ≠ Tu` on the boundary of the relevant
//! set. That cannot be checked numerically; a fixed point there would itself
//! be a solution.

use serde::Serialize;

use crate::constants::{f_inf, f_sup, ProblemConstants};
use crate::error::{Error, Result};
use crate::operator::ProblemSpec;

pub const VERDICT_TOL: f64 = 1e-12;
pub const MARGINAL_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Sampled,
    Asserted,
}

/// User-supplied analytic values of `f^{0,ρ}` and `f_{ρ,ρ/c}` keyed by `ρ`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FAssertions {
    pub sup: Vec<(f64, f64)>,
    pub inf: Vec<(f64, f64)>,
}

impl FAssertions {
    fn lookup(list: &[(f64, f64)], rho: f64) -> Option<f64> {
        list.iter()
            .find(|(r, _)| (r - rho).abs() <= 1e-12 * rho.abs().max(1.0))
            .map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexCheck {
    pub lhs: f64,
    pub holds: bool,
    pub marginal: bool,
    /// The `f` bound that entered `lhs`.
    pub f_bound: f64,
    pub provenance: Provenance,
    /// Sampling of `f_{ρ,ρ/c}` stopped at the `u` cap.
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoCheck {
    pub rho: f64,
    /// Absent when `Γ ≥ 1`.
    pub i1: Option<IndexCheck>,
    pub i0: IndexCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum HVerdict {
    None,
    H1 { rho1: f64, rho2: f64 },
    H2 { rho1: f64, rho2: f64 },
}

impl HVerdict {
    pub fn certified(&self) -> bool {
        !matches!(self, HVerdict::None)
    }

    pub fn pair(&self) -> Option<(f64, f64)> {
        match *self {
            HVerdict::None => None,
            HVerdict::H1 { rho1, rho2 } | HVerdict::H2 { rho1, rho2 } => Some((rho1, rho2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub constants: ProblemConstants,
    pub checks: Vec<RhoCheck>,
    pub verdict: HVerdict,
}

impl ConditionReport {
    pub fn check_at(&self, rho: f64) -> Option<&RhoCheck> {
        self.checks.iter().find(|c| c.rho == rho)
    }
}

/// Evaluates the conditions for one problem, caching its constants.
pub struct Checker<'a> {
    spec: &'a ProblemSpec,
    constants: ProblemConstants,
    assertions: FAssertions,
}

impl<'a> Checker<'a> {
    pub fn new(spec: &'a ProblemSpec, assertions: FAssertions) -> Result<Self> {
        Ok(Checker {
            spec,
            constants: ProblemConstants::compute(spec)?,
            assertions,
        })
    }

    pub fn with_constants(spec: &'a ProblemSpec, constants: ProblemConstants, assertions: FAssertions) -> Self {
        Checker {
            spec,
            constants,
            assertions,
        }
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    /// (I¹) at `rho`; refuses when `Γ ≥ 1`.
    pub fn check_i1(&self, rho: f64) -> Result<IndexCheck> {
        let k = &self.constants;
        if !(k.gamma < 1.0) {
            return Err(Error::Hypothesis(format!(
                "Γ = ∫γ dA₂ = {} but the index-one condition needs Γ < 1",
                k.gamma
            )));
        }
        let (bound, provenance) = match FAssertions::lookup(&self.assertions.sup, rho) {
            Some(v) => (v, Provenance::Asserted),
            None => (f_sup(&self.spec.f, rho, self.spec.numerics.f_grid)?.value, Provenance::Sampled),
        };
        Ok(self.i1_from_bound(rho, bound, provenance))
    }

    pub fn i1_from_bound(&self, rho: f64, f_bound: f64, provenance: Provenance) -> IndexCheck {
        let k = &self.constants;
        let lhs = k.a0 * k.norm_gamma / ((1.0 - k.gamma) * rho) + f_bound * k.i1_coefficient();
        IndexCheck {
            lhs,
            holds: lhs <= 1.0 + VERDICT_TOL,
            marginal: (lhs - 1.0).abs() < MARGINAL_BAND,
            f_bound,
            provenance,
            capped: false,
        }
    }

    /// (I⁰) at `rho` with the default `α₀`.
    pub fn check_i0(&self, rho: f64) -> Result<IndexCheck> {
        let (bound, provenance, capped) = match FAssertions::lookup(&self.assertions.inf, rho) {
            Some(v) => (v, Provenance::Asserted, false),
            None => {
                let s = self.spec;
                let b = f_inf(&s.f, rho, s.cone.c, s.cone.a, s.cone.b, s.numerics.f_grid, s.numerics.u_cap)?;
                (b.value, Provenance::Sampled, b.capped)
            }
        };
        let mut check = self.i0_from_bound(rho, bound, provenance);
        check.capped = capped;
        Ok(check)
    }

    pub fn i0_from_bound(&self, rho: f64, f_bound: f64, provenance: Provenance) -> IndexCheck {
        let k = &self.constants;
        let lhs = k.c2 * k.norm_gamma * k.alpha0(rho) + f_bound / k.big_m;
        IndexCheck {
            lhs,
            holds: lhs >= 1.0 - VERDICT_TOL,
            marginal: (lhs - 1.0).abs() < MARGINAL_BAND,
            f_bound,
            provenance,
            capped: false,
        }
    }

    pub fn check_rho(&self, rho: f64) -> Result<RhoCheck> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("rho = {rho} must be positive")));
        }
        let i1 = match self.check_i1(rho) {
            Ok(c) => Some(c),
            Err(Error::Hypothesis(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(RhoCheck {
            rho,
            i1,
            i0: self.check_i0(rho)?,
        })
    }

    /// First `(ρ₁, ρ₂)` on the grid satisfying (H₁), else (H₂).
    pub fn find_h(&self, rho_grid: &[f64]) -> Result<ConditionReport> {
        if rho_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("rho grid must be strictly increasing"));
        }
        let checks = rho_grid.iter().map(|&r| self.check_rho(r)).collect::<Result<Vec<_>>>()?;
        let verdict = verdict_from(&checks, self.constants.c);
        Ok(ConditionReport {
            constants: self.constants,
            checks,
            verdict,
        })
    }

    /// Checks (H₁) and then (H₂) for the given pair only.
    pub fn check_pair(&self, rho1: f64, rho2: f64) -> Result<ConditionReport> {
        let checks = vec![self.check_rho(rho1)?, self.check_rho(rho2)?];
        let (lo, hi) = (&checks[0], &checks[1]);
        let i1 = |c: &RhoCheck| c.i1.is_some_and(|x| x.holds);
        let verdict = if rho1 < rho2 && i1(lo) && hi.i0.holds {
            HVerdict::H1 { rho1, rho2 }
        } else if rho1 < self.constants.c * rho2 && lo.i0.holds && i1(hi) {
            HVerdict::H2 { rho1, rho2 }
        } else {
            HVerdict::None
        };
        Ok(ConditionReport {
            constants: self.constants,
            checks,
            verdict,
        })
    }
}

fn verdict_from(checks: &[RhoCheck], c: f64) -> HVerdict {
    let i1 = |k: &RhoCheck| k.i1.is_some_and(|x| x.holds);
    for (i, lo) in checks.iter().enumerate() {
        for hi in &checks[i + 1..] {
            if i1(lo) && hi.i0.holds {
                return HVerdict::H1 {
                    rho1: lo.rho,
                    rho2: hi.rho,
                };
            }
        }
    }
    for lo in checks {
        for hi in checks {
            if lo.rho < c * hi.rho && lo.i0.holds && i1(hi) {
                return HVerdict::H2 {
                    rho1: lo.rho,
                    rho2: hi.rho,
                };
            }
        }
    }
    HVerdict::None
}

/// `count` log-spaced values over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        n => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo * (hi / lo).powf(i as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}

pub fn default_rho_grid(spec: &ProblemSpec) -> Vec<f64> {
    let n = &spec.numerics;
    log_grid(n.rho_min, n.rho_max, n.rho_count)
}

pub fn check_i1(spec: &ProblemSpec, rho: f64) -> Result<IndexCheck> {
    Checker::new(spec, FAssertions::default())?.check_i1(rho)
}

pub fn check_i0(spec: &ProblemSpec, rho: f64) -> Result<IndexCheck> {
    Checker::new(spec, FAssertions::default())?.check_i0(rho)
}

pub fn find_h(spec: &ProblemSpec, rho_grid: &[f64]) -> Result<ConditionReport> {
    Checker::new(spec, FAssertions::default())?.find_h(rho_grid)
}
