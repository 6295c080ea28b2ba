//! Kernel `k(t,s)`, boundary profile `γ(t)`, majorant `Φ(s)` and the cone
//! constants `c₁, c₂`.
//!
//! The built-in kernel is the Green's function of `−u″` with Dirichlet
//! conditions, `k(t,s) = s(1−t)` for `s ≤ t` and `t(1−s)` for `s > t`, with
//! `γ(t) = 1 − t` and `Φ(s) = s(1 − s)`. Custom kernels give one expression
//! for each triangle; `s ↦ k(t,s)` may only be non-smooth on the diagonal.

use crate::error::{Error, Result};
use crate::expr::{Expr, Profile};
use crate::pcfun::ConeParams;
use crate::quad;

/// The weight `g` in `∫ k(t,s) g(s) … ds`.
pub type Weight = Profile;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    Dirichlet,
    Custom {
        /// `k(t,s)` for `s ≤ t`.
        lower: Expr,
        /// `k(t,s)` for `s > t`.
        upper: Expr,
        gamma: Expr,
        phi: Expr,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    c1: f64,
    c2: f64,
    norm_gamma: f64,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {v} must lie in (0, 1]")))
    }
}

fn check_vars(name: &str, e: &Expr, allowed: &[&str]) -> Result<()> {
    for v in e.free_vars() {
        if !allowed.contains(&v.as_str()) {
            return Err(Error::invalid(format!("{name} uses `{v}`, expected only {allowed:?}")));
        }
    }
    Ok(())
}

impl KernelSpec {
    pub fn builtin_dirichlet(cone: &ConeParams) -> Result<Self> {
        let (a, b) = (cone.a, cone.b);
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(Error::invalid(format!("invalid window [{a}, {b}]")));
        }
        Ok(KernelSpec {
            kind: KernelKind::Dirichlet,
            c1: a.min(1.0 - b),
            c2: 1.0 - b,
            norm_gamma: 1.0,
        })
    }

    /// User-supplied kernel; `c1`, `c2` are taken as given and audited by
    /// [`verify_c3_c4`].
    pub fn custom(lower: Expr, upper: Expr, gamma: Expr, phi: Expr, c1: f64, c2: f64) -> Result<Self> {
        check_unit("c1", c1)?;
        check_unit("c2", c2)?;
        check_vars("kernel (s <= t)", &lower, &["t", "s"])?;
        check_vars("kernel (s > t)", &upper, &["t", "s"])?;
        check_vars("gamma", &gamma, &["t"])?;
        check_vars("phi", &phi, &["s"])?;
        let mut spec = KernelSpec {
            kind: KernelKind::Custom { lower, upper, gamma, phi },
            c1,
            c2,
            norm_gamma: 1.0,
        };
        spec.norm_gamma = spec.sampled_norm_gamma()?;
        if !(spec.norm_gamma > 0.0) {
            return Err(Error::invalid("gamma vanishes identically"));
        }
        Ok(spec)
    }

    /// Copy with different cone constants (for audits of wrong constants).
    pub fn with_constants(&self, c1: f64, c2: f64) -> Result<Self> {
        check_unit("c1", c1)?;
        check_unit("c2", c2)?;
        Ok(KernelSpec { c1, c2, ..self.clone() })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self.kind, KernelKind::Dirichlet)
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// `min{c₁, c₂}`.
    pub fn cone_constant(&self) -> f64 {
        self.c1.min(self.c2)
    }

    pub fn norm_gamma(&self) -> f64 {
        self.norm_gamma
    }

    pub fn k(&self, t: f64, s: f64) -> Result<f64> {
        match &self.kind {
            KernelKind::Dirichlet => Ok(if s <= t { s * (1.0 - t) } else { t * (1.0 - s) }),
            KernelKind::Custom { lower, upper, .. } => {
                let e = if s <= t { lower } else { upper };
                Ok(e.eval(&[("t", t), ("s", s)])?)
            }
        }
    }

    pub fn gamma(&self, t: f64) -> Result<f64> {
        match &self.kind {
            KernelKind::Dirichlet => Ok(1.0 - t),
            KernelKind::Custom { gamma, .. } => Ok(gamma.eval(&[("t", t)])?),
        }
    }

    pub fn phi(&self, s: f64) -> Result<f64> {
        match &self.kind {
            KernelKind::Dirichlet => Ok(s * (1.0 - s)),
            KernelKind::Custom { phi, .. } => Ok(phi.eval(&[("s", s)])?),
        }
    }

    /// `∂k/∂t (t, s)`, taken within the triangle containing `(t, s)`.
    pub fn dk_dt(&self, t: f64, s: f64) -> Result<f64> {
        match &self.kind {
            KernelKind::Dirichlet => Ok(if s <= t { -s } else { 1.0 - s }),
            KernelKind::Custom { lower, upper, .. } => {
                let e = if s <= t { lower } else { upper };
                central_difference(|x| Ok(e.eval(&[("t", x), ("s", s)])?), t)
            }
        }
    }

    pub fn dgamma(&self, t: f64) -> Result<f64> {
        match &self.kind {
            KernelKind::Dirichlet => Ok(-1.0),
            KernelKind::Custom { gamma, .. } => central_difference(|x| Ok(gamma.eval(&[("t", x)])?), t),
        }
    }

    /// Points where `s ↦ k(t,s)` may be non-smooth.
    pub fn kinks_at(&self, t: f64) -> Vec<f64> {
        vec![t]
    }

    fn sampled_norm_gamma(&self) -> Result<f64> {
        let n = 2049;
        let mut best = (0.0f64, 0.0f64);
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            let v = self.gamma(t)?.abs();
            if v > best.1 {
                best = (t, v);
            }
        }
        let h = 1.0 / (n - 1) as f64;
        let lo = (best.0 - h).max(0.0);
        let hi = (best.0 + h).min(1.0);
        let (_, v) = golden_max(|t| Ok(self.gamma(t)?.abs()), lo, hi, 1e-12)?;
        Ok(v.max(best.1))
    }
}

fn central_difference<F: Fn(f64) -> Result<f64>>(f: F, x: f64) -> Result<f64> {
    let h = 1e-6 * (1.0 + x.abs());
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F: FnMut(f64) -> Result<f64>>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<(f64, f64)> {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > xtol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1)?;
        }
    }
    let candidates = [(lo, f(lo)?), (hi, f(hi)?), (x1, f1), (x2, f2)];
    Ok(candidates
        .into_iter()
        .fold((lo, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best }))
}

/// Worst sampled margins of the three kernel inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelAudit {
    /// `min Φ(s) − k(t,s)` over `t, s ∈ [0,1]`.
    pub upper_margin: f64,
    pub upper_witness: (f64, f64),
    /// `min k(t,s) − c₁Φ(s)` over `t ∈ [a,b]`, `s ∈ [0,1]`.
    pub lower_margin: f64,
    pub lower_witness: (f64, f64),
    /// `min γ(t) − c₂‖γ‖` over `t ∈ [a,b]`.
    pub gamma_margin: f64,
    pub gamma_witness: f64,
    /// `max_t ∫|k(t+h,s) − k(t,s)| ds` for `h = 1e-4`.
    pub continuity_modulus: f64,
    pub pass: bool,
}

pub const AUDIT_TOL: f64 = 1e-12;

/// Samples an `n × n` grid and reports the worst margins.
pub fn verify_c3_c4(ks: &KernelSpec, cone: &ConeParams, n: usize) -> Result<KernelAudit> {
    if n < 2 {
        return Err(Error::invalid("need at least two samples per axis"));
    }
    let unit = |i: usize| i as f64 / (n - 1) as f64;
    let window = |i: usize| cone.a + (cone.b - cone.a) * unit(i);
    let mut upper = (f64::INFINITY, (0.0, 0.0));
    let mut lower = (f64::INFINITY, (0.0, 0.0));
    let mut gamma = (f64::INFINITY, 0.0);
    for i in 0..n {
        let t = unit(i);
        let tw = window(i);
        for j in 0..n {
            let s = unit(j);
            let phi = ks.phi(s)?;
            let m = phi - ks.k(t, s)?;
            if m < upper.0 {
                upper = (m, (t, s));
            }
            let m = ks.k(tw, s)? - ks.c1 * phi;
            if m < lower.0 {
                lower = (m, (tw, s));
            }
        }
        let m = ks.gamma(tw)? - ks.c2 * ks.norm_gamma;
        if m < gamma.0 {
            gamma = (m, tw);
        }
    }
    let h = 1e-4;
    let mut modulus: f64 = 0.0;
    for i in 0..n.min(33) {
        let t = unit(i) * (1.0 - h);
        let v = quad::integrate(|s| Ok((ks.k(t + h, s)? - ks.k(t, s)?).abs()), 0.0, 1.0, &[t, t + h], 1e-10)?;
        modulus = modulus.max(v);
    }
    let pass = upper.0 >= -AUDIT_TOL && lower.0 >= -AUDIT_TOL && gamma.0 >= -AUDIT_TOL;
    Ok(KernelAudit {
        upper_margin: upper.0,
        upper_witness: upper.1,
        lower_margin: lower.0,
        lower_witness: lower.1,
        gamma_margin: gamma.0,
        gamma_witness: gamma.1,
        continuity_modulus: modulus,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone() -> ConeParams {
        ConeParams::new(0.25, 0.75, 0.25, 0.2).unwrap()
    }

    #[test]
    fn dirichlet_values() {
        let ks = KernelSpec::builtin_dirichlet(&cone()).unwrap();
        assert_eq!(ks.k(0.5, 0.25).unwrap(), 0.125);
        assert!((ks.gamma(0.3).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(ks.norm_gamma(), 1.0);
        assert_eq!(ks.cone_constant(), 0.25);
        assert_eq!(ks.c2(), 0.25);
    }

    #[test]
    fn dirichlet_passes_audit() {
        let ks = KernelSpec::builtin_dirichlet(&cone()).unwrap();
        let audit = verify_c3_c4(&ks, &cone(), 101).unwrap();
        assert!(audit.pass, "{audit:?}");
        assert!(audit.continuity_modulus < 1e-3);
    }

    #[test]
    fn forcing_c1_to_one_fails_with_witness() {
        let ks = KernelSpec::builtin_dirichlet(&cone()).unwrap().with_constants(1.0, 0.25).unwrap();
        let audit = verify_c3_c4(&ks, &cone(), 101).unwrap();
        assert!(!audit.pass);
        assert!(audit.lower_margin < 0.0);
        let (t, s) = audit.lower_witness;
        assert!(ks.k(t, s).unwrap() < ks.phi(s).unwrap());
    }

    #[test]
    fn zero_constants_rejected() {
        let ks = KernelSpec::builtin_dirichlet(&cone()).unwrap();
        assert!(ks.with_constants(0.0, 0.25).is_err());
        let e = |s: &str| Expr::parse(s).unwrap();
        assert!(KernelSpec::custom(e("s*(1-t)"), e("t*(1-s)"), e("1-t"), e("s*(1-s)"), 0.0, 0.5).is_err());
    }

    #[test]
    fn custom_matches_builtin() {
        let e = |s: &str| Expr::parse(s).unwrap();
        let custom = KernelSpec::custom(e("s*(1-t)"), e("t*(1-s)"), e("1-t"), e("s*(1-s)"), 0.25, 0.25).unwrap();
        let builtin = KernelSpec::builtin_dirichlet(&cone()).unwrap();
        assert!((custom.norm_gamma() - 1.0).abs() < 1e-12);
        for &(t, s) in &[(0.1, 0.7), (0.8, 0.3), (0.5, 0.5)] {
            assert!((custom.k(t, s).unwrap() - builtin.k(t, s).unwrap()).abs() < 1e-15);
            assert!((custom.dk_dt(t, s).unwrap() - builtin.dk_dt(t, s).unwrap()).abs() < 1e-8);
        }
        assert!((custom.dgamma(0.4).unwrap() + 1.0).abs() < 1e-8);
        assert!(verify_c3_c4(&custom, &cone(), 51).unwrap().pass);
    }

    #[test]
    fn custom_rejects_foreign_variables() {
        let e = |s: &str| Expr::parse(s).unwrap();
        assert!(KernelSpec::custom(e("s*(1-x)"), e("t*(1-s)"), e("1-t"), e("s*(1-s)"), 0.25, 0.25).is_err());
    }

    #[test]
    fn golden_section_finds_interior_max() {
        let (x, v) = golden_max(|x| Ok(-(x - 0.3) * (x - 0.3)), 0.0, 1.0, 1e-12).unwrap();
        assert!((x - 0.3).abs() < 1e-6);
        assert!(v.abs() < 1e-12);
    }
}
