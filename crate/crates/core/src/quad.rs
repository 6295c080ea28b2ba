//! Breakpoint-aware adaptive Gauss–Legendre quadrature.
//!
//! Every integral over `[0, 1]` in the crate goes through [`integrate`]: the
//! interval is cut at the declared breakpoints, each panel is integrated with a
//! fixed-order Gauss–Legendre rule and bisected until the one-level and
//! two-level estimates agree.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Weight};

pub const DEFAULT_ORDER: usize = 16;
pub const MAX_DEPTH: usize = 30;
pub const DEFAULT_TOL: f64 = 1e-11;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre polynomial from the usual cosine guesses.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn apply<F>(&self, f: &mut F, lo: f64, hi: f64) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut acc = 0.0;
        for (x, w) in self.mapped(lo, hi) {
            acc += w * f(x)?;
        }
        Ok(acc)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

pub fn default_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(DEFAULT_ORDER))
}

/// Sorted, deduplicated breakpoints strictly inside `(lo, hi)`, with the ends.
pub fn panel_edges(lo: f64, hi: f64, breakpoints: &[f64]) -> Vec<f64> {
    let scale = 1e-14 * (1.0 + lo.abs().max(hi.abs()));
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x.is_finite() && x > lo + scale && x < hi - scale)
        .collect();
    inner.sort_by(f64::total_cmp);
    let mut edges = Vec::with_capacity(inner.len() + 2);
    edges.push(lo);
    for x in inner {
        if x - edges[edges.len() - 1] > scale {
            edges.push(x);
        }
    }
    edges.push(hi);
    edges
}

struct Adaptive<'a> {
    rule: &'a GaussLegendre,
    tol: f64,
    error_bound: f64,
    exhausted: bool,
}

impl Adaptive<'_> {
    fn panel<F>(&mut self, f: &mut F, lo: f64, hi: f64, whole: f64, depth: usize) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mid = 0.5 * (lo + hi);
        let left = self.rule.apply(f, lo, mid)?;
        let right = self.rule.apply(f, mid, hi)?;
        let refined = left + right;
        let diff = (refined - whole).abs();
        if diff <= self.tol * (1.0 + refined.abs()) || mid <= lo || mid >= hi {
            self.error_bound += diff;
            return Ok(refined);
        }
        if depth >= MAX_DEPTH {
            self.exhausted = true;
            self.error_bound += diff;
            return Ok(refined);
        }
        let l = self.panel(f, lo, mid, left, depth + 1)?;
        let r = self.panel(f, mid, hi, right, depth + 1)?;
        Ok(l + r)
    }
}

/// Integrates `f` over `[lo, hi]` with panels split at `breakpoints`.
///
/// Each panel is accepted once the Gauss estimate over the panel and the sum
/// over its two halves differ by at most `tol * (1 + |result|)`. Running out of
/// bisection depth yields [`Error::Quadrature`] with the best estimate.
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, breakpoints: &[f64], tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::Domain(format!("integration interval [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let rule = default_rule();
    let mut state = Adaptive {
        rule,
        tol,
        error_bound: 0.0,
        exhausted: false,
    };
    let edges = panel_edges(lo, hi, breakpoints);
    let mut parts = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let whole = rule.apply(&mut f, w[0], w[1])?;
        parts.push(state.panel(&mut f, w[0], w[1], whole, 0)?);
    }
    let total = pairwise_sum(&parts);
    if state.exhausted {
        return Err(Error::Quadrature {
            estimate: total,
            error_bound: state.error_bound,
        });
    }
    Ok(total)
}

/// Convenience wrapper for infallible integrands.
pub fn integrate_fn<F>(mut f: F, lo: f64, hi: f64, breakpoints: &[f64], tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Ok(f(x)), lo, hi, breakpoints, tol)
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// `∫₀¹ k(t,s) g(s) h(s) ds`, split at the kernel kink, the weight's
/// breakpoints and `h_breaks`.
pub fn kernel_action<H>(kernel: &KernelSpec, g: &Weight, mut h: H, h_breaks: &[f64], t: f64, tol: f64) -> Result<f64>
where
    H: FnMut(f64) -> Result<f64>,
{
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
    }
    kernel_action_on(kernel, g, &mut h, h_breaks, t, 0.0, 1.0, tol)
}

/// Same integrand as [`kernel_action`] restricted to `s ∈ [lo, hi]`.
#[allow(clippy::too_many_arguments)]
pub fn kernel_action_on<H>(kernel: &KernelSpec, g: &Weight, h: &mut H, h_breaks: &[f64], t: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    H: FnMut(f64) -> Result<f64>,
{
    let mut breaks: Vec<f64> = kernel.kinks_at(t);
    breaks.extend_from_slice(g.breakpoints());
    breaks.extend_from_slice(h_breaks);
    integrate(
        |s| {
            let hv = h(s)?;
            if hv == 0.0 {
                return Ok(0.0);
            }
            Ok(kernel.k(t, s)? * g.eval(s)? * hv)
        },
        lo,
        hi,
        &breaks,
        tol,
    )
}
