//! Nyström discretisation of `T` on a fixed [`PcGrid`].
//!
//! Unknowns are the nodal values `U`. On every continuity piece the samples
//! `F_j = f(t_j, U_j)` are interpolated by local degree-4 Lagrange polynomials
//! (panels of four cells; the last panel of a piece overlaps its neighbour),
//! and `∫ k(t_i, s) g(s) P(s) ds` is evaluated with Gauss–Legendre points on
//! every cell. Because every `t_i` is a node the kernel kink never falls
//! inside a cell. `g` enters the quadrature weights and its breakpoints split
//! cells.
//!
//! For the built-in kernel the sums over quadrature points are evaluated with
//! prefix sums, `∫ k(t,s) h(s) ds = (1−t) ∫_0^t s h + t ∫_t^1 (1−s) h`.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::ProblemSpec;
use crate::error::{Error, Result};
use crate::pcfun::{PCFunction, PcGrid, Side};
use crate::quad::{self, GaussLegendre};

const PANEL_CELLS: usize = 4;
const POINTS_PER_CELL: usize = 8;
const STRIDE: usize = PANEL_CELLS + 1;
/// Largest cached `k(t_i, s_q)` table for custom kernels.
const CACHE_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, Copy)]
struct Point {
    s: f64,
    /// Gauss weight times `g(s)`.
    wg: f64,
    first: usize,
    count: usize,
}

pub struct Nystrom<'a> {
    spec: &'a ProblemSpec,
    grid: Arc<PcGrid>,
    points: Vec<Point>,
    basis: Vec<f64>,
    gamma: Vec<f64>,
    /// Number of impulses with `τ_j` strictly left of (or at, for right nodes) node `i`.
    active: Vec<usize>,
    alpha_weights: Vec<f64>,
    kernel_cache: Option<Vec<f64>>,
}

fn lagrange(xs: &[f64], s: f64, out: &mut [f64]) {
    for (l, slot) in out.iter_mut().enumerate().take(xs.len()) {
        let mut v = 1.0;
        for (m, &xm) in xs.iter().enumerate() {
            if m != l {
                v *= (s - xm) / (xs[l] - xm);
            }
        }
        *slot = v;
    }
}

fn split_cell(lo: f64, hi: f64, breaks: &[f64]) -> Vec<f64> {
    quad::panel_edges(lo, hi, breaks)
}

impl<'a> Nystrom<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: Arc<PcGrid>) -> Result<Self> {
        if grid.jumps() != spec.jump_points().as_slice() {
            return Err(Error::invalid("grid jump points differ from the impulse times"));
        }
        let rule = GaussLegendre::new(POINTS_PER_CELL);
        let ts = grid.times();
        let n = grid.len();
        let mut points = Vec::new();
        let mut basis = Vec::new();
        let mut scratch = [0.0; STRIDE];
        for p in 0..grid.num_pieces() {
            let range = grid.piece_range(p);
            let cells = range.len() - 1;
            for c in 0..cells {
                let (first, count) = if cells <= PANEL_CELLS {
                    (range.start, cells + 1)
                } else {
                    let start = (c / PANEL_CELLS * PANEL_CELLS).min(cells - PANEL_CELLS);
                    (range.start + start, PANEL_CELLS + 1)
                };
                let xs = &ts[first..first + count];
                let (lo, hi) = (ts[range.start + c], ts[range.start + c + 1]);
                for w in split_cell(lo, hi, spec.g.breakpoints()).windows(2) {
                    for (s, wt) in rule.mapped(w[0], w[1]) {
                        let wg = wt * spec.g.eval(s)?;
                        lagrange(xs, s, &mut scratch);
                        basis.extend_from_slice(&scratch);
                        points.push(Point { s, wg, first, count });
                    }
                }
            }
        }

        let gamma = ts.iter().map(|&t| spec.kernel.gamma(t)).collect::<Result<Vec<_>>>()?;
        let mut active = vec![0; n];
        for p in 0..grid.num_pieces() {
            for i in grid.piece_range(p) {
                active[i] = p;
            }
        }

        let mut alpha_weights = vec![0.0; n];
        let measure = &spec.boundary.measure;
        for atom in measure.atoms() {
            for (idx, w) in grid.stencil(atom.loc, Side::Left)? {
                alpha_weights[idx] += atom.weight * w;
            }
        }
        if let Some(density) = measure.density() {
            for p in 0..grid.num_pieces() {
                let range = grid.piece_range(p);
                for i in range.start..range.end - 1 {
                    let (t0, t1) = (ts[i], ts[i + 1]);
                    for w in split_cell(t0, t1, density.breakpoints()).windows(2) {
                        for (s, wt) in rule.mapped(w[0], w[1]) {
                            let theta = (s - t0) / (t1 - t0);
                            let d = wt * density.eval(s)?;
                            alpha_weights[i] += d * (1.0 - theta);
                            alpha_weights[i + 1] += d * theta;
                        }
                    }
                }
            }
        }

        let kernel_cache = if !spec.kernel.is_dirichlet() && n * points.len() <= CACHE_LIMIT {
            let mut cache = Vec::with_capacity(n * points.len());
            for &t in ts {
                for pt in &points {
                    cache.push(spec.kernel.k(t, pt.s)?);
                }
            }
            Some(cache)
        } else {
            None
        };

        Ok(Nystrom {
            spec,
            grid,
            points,
            basis,
            gamma,
            active,
            alpha_weights,
            kernel_cache,
        })
    }

    pub fn grid(&self) -> &Arc<PcGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(Error::invalid("value vector does not match the grid"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::Domain(format!("T needs u >= 0, got u({}) = {v}", self.grid.times()[i])));
        }
        Ok(())
    }

    fn nonlinearity(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.grid
            .times()
            .iter()
            .zip(values)
            .map(|(&t, &u)| self.spec.eval_f(t, u))
            .collect()
    }

    /// `g(s_q) w_q P(s_q)` at every quadrature point.
    fn weighted_samples(&self, nonlin: &[f64]) -> Vec<f64> {
        self.points
            .iter()
            .enumerate()
            .map(|(q, pt)| {
                let b = &self.basis[q * STRIDE..q * STRIDE + pt.count];
                let p: f64 = b.iter().zip(&nonlin[pt.first..pt.first + pt.count]).map(|(l, f)| l * f).sum();
                pt.wg * p
            })
            .collect()
    }

    pub fn alpha(&self, values: &[f64]) -> f64 {
        self.spec.boundary.a0 + self.alpha_weights.iter().zip(values).map(|(w, u)| w * u).sum::<f64>()
    }

    fn impulse_terms(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.spec
            .impulses
            .iter()
            .enumerate()
            .map(|(j, imp)| Ok(imp.eval(values[self.grid.left_index(j)])? / (1.0 - imp.tau)))
            .collect()
    }

    fn integral_part(&self, h: &[f64]) -> Result<Vec<f64>> {
        let ts = self.grid.times();
        if self.spec.kernel.is_dirichlet() {
            let nq = self.points.len();
            let mut suffix = vec![0.0; nq + 1];
            for q in (0..nq).rev() {
                suffix[q] = suffix[q + 1] + (1.0 - self.points[q].s) * h[q];
            }
            let mut out = Vec::with_capacity(ts.len());
            let mut q = 0;
            let mut prefix = 0.0;
            for &t in ts {
                while q < nq && self.points[q].s <= t {
                    prefix += self.points[q].s * h[q];
                    q += 1;
                }
                out.push((1.0 - t) * prefix + t * suffix[q]);
            }
            return Ok(out);
        }
        let nq = self.points.len();
        ts.iter()
            .enumerate()
            .map(|(i, &t)| match &self.kernel_cache {
                Some(cache) => Ok(cache[i * nq..(i + 1) * nq].iter().zip(h).map(|(k, x)| k * x).sum()),
                None => {
                    let mut acc = 0.0;
                    for (pt, x) in self.points.iter().zip(h) {
                        acc += self.spec.kernel.k(t, pt.s)? * x;
                    }
                    Ok(acc)
                }
            })
            .collect()
    }

    /// `T` on raw nodal values.
    pub fn apply_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check(values)?;
        let nonlin = self.nonlinearity(values)?;
        let h = self.weighted_samples(&nonlin);
        let mut out = self.integral_part(&h)?;
        let alpha = self.alpha(values);
        let imp = self.impulse_terms(values)?;
        let mut partial = vec![alpha; imp.len() + 1];
        for j in 0..imp.len() {
            partial[j + 1] = partial[j] + imp[j];
        }
        for (i, v) in out.iter_mut().enumerate() {
            *v += self.gamma[i] * partial[self.active[i]];
        }
        Ok(out)
    }

    pub fn apply(&self, u: &PCFunction) -> Result<PCFunction> {
        if **u.grid() != *self.grid {
            return Err(Error::invalid("function lives on a different grid"));
        }
        PCFunction::new(Arc::clone(&self.grid), self.apply_values(u.values())?)
    }

    pub fn residual_values(&self, values: &[f64]) -> Result<f64> {
        let tu = self.apply_values(values)?;
        Ok(values.iter().zip(&tu).fold(0.0, |m, (u, t)| m.max((u - t).abs())))
    }

    pub fn residual(&self, u: &PCFunction) -> Result<f64> {
        if **u.grid() != *self.grid {
            return Err(Error::invalid("function lives on a different grid"));
        }
        self.residual_values(u.values())
    }

    /// Derivative of `T` at `values`: `W diag(f_u) + γ ⊗ ∂(α + impulses)`.
    pub fn jacobian(&self, values: &[f64]) -> Result<DMatrix<f64>> {
        self.check(values)?;
        let ts = self.grid.times();
        let n = ts.len();
        let fu = ts
            .iter()
            .zip(values)
            .map(|(&t, &u)| {
                let h = 1e-7 * (1.0 + u.abs());
                if u >= h {
                    Ok((self.spec.eval_f(t, u + h)? - self.spec.eval_f(t, u - h)?) / (2.0 * h))
                } else {
                    Ok((self.spec.eval_f(t, u + h)? - self.spec.eval_f(t, u)?) / h)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let dimp = self
            .spec
            .impulses
            .iter()
            .enumerate()
            .map(|(j, imp)| {
                let x = values[self.grid.left_index(j)];
                let h = 1e-7 * (1.0 + x.abs());
                let d = if x >= h {
                    (imp.eval(x + h)? - imp.eval(x - h)?) / (2.0 * h)
                } else {
                    (imp.eval(x + h)? - imp.eval(x)?) / h
                };
                Ok(d / (1.0 - imp.tau))
            })
            .collect::<Result<Vec<f64>>>()?;

        let nq = self.points.len();
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for (i, &t) in ts.iter().enumerate() {
            for (q, pt) in self.points.iter().enumerate() {
                let k = match &self.kernel_cache {
                    Some(cache) => cache[i * nq + q],
                    None => self.spec.kernel.k(t, pt.s)?,
                };
                let kw = k * pt.wg;
                if kw == 0.0 {
                    continue;
                }
                let b = &self.basis[q * STRIDE..q * STRIDE + pt.count];
                for (l, bl) in b.iter().enumerate() {
                    jac[(i, pt.first + l)] += kw * bl;
                }
            }
            for j in 0..n {
                jac[(i, j)] *= fu[j];
            }
            let g = self.gamma[i];
            if g != 0.0 {
                for (j, w) in self.alpha_weights.iter().enumerate() {
                    jac[(i, j)] += g * w;
                }
                for (j, d) in dimp.iter().enumerate().take(self.active[i]) {
                    jac[(i, self.grid.left_index(j))] += g * d;
                }
            }
        }
        Ok(jac)
    }

    /// One-sided derivative of `Tu` at `t`, from the integral representation.
    pub fn image_derivative(&self, values: &[f64], t: f64, side: Side) -> Result<f64> {
        self.check(values)?;
        let nonlin = self.nonlinearity(values)?;
        let h = self.weighted_samples(&nonlin);
        let mut integral = 0.0;
        for (pt, x) in self.points.iter().zip(&h) {
            // at s = t the one-sided limit picks the triangle
            let s_lower = pt.s < t || (pt.s == t && side == Side::Right);
            let dk = if s_lower {
                self.spec.kernel.dk_dt(t, pt.s.min(t))?
            } else {
                self.spec.kernel.dk_dt(t, pt.s)?
            };
            integral += dk * x;
        }
        let imp = self.impulse_terms(values)?;
        let active: f64 = self
            .spec
            .impulses
            .iter()
            .zip(&imp)
            .filter(|(i, _)| i.tau < t || (i.tau == t && side == Side::Right))
            .map(|(_, v)| v)
            .sum();
        let dg = self.spec.kernel.dgamma(t)?;
        Ok(dg * (self.alpha(values) + active) + integral)
    }
}
