//! Piecewise-continuous functions on `[0, 1]` with finitely many jumps.
//!
//! A [`PCFunction`] stores values on a [`PcGrid`]: one sorted node list per
//! continuity piece `[0, τ₁], [τ₁, τ₂], …, [τ_q, 1]`. Each jump point τᵢ
//! therefore appears twice, once as the last node of the piece to its left
//! and once as the first node of the piece to its right. Between nodes the
//! function is linear, so the sup-norm and window minima are exact maxima and
//! minima over nodal values.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Two jump points (or atoms) closer than this are the same point.
pub const COLLISION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    /// Left at jump points, meaning `u(τ) = u(τ⁻)`.
    Default,
}

/// Node kind as written to solution files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Last node of a piece, at a jump point.
    Left,
    /// First node of a piece, at a jump point.
    Right,
    Plain,
}

impl NodeKind {
    pub fn tag(self) -> &'static str {
        match self {
            NodeKind::Left => "L",
            NodeKind::Right => "R",
            NodeKind::Plain => "·",
        }
    }

    pub fn side(self) -> Side {
        match self {
            NodeKind::Left => Side::Left,
            NodeKind::Right => Side::Right,
            NodeKind::Plain => Side::Default,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcGrid {
    jumps: Vec<f64>,
    ts: Vec<f64>,
    /// `offsets[p]..offsets[p + 1]` indexes piece `p` in `ts`.
    offsets: Vec<usize>,
}

fn validate_jumps(jumps: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &tau in jumps {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(format!("jump point {tau} not in (0, 1)")));
        }
        if tau - prev <= COLLISION_TOL {
            return Err(Error::invalid("jump points must be strictly increasing"));
        }
        prev = tau;
    }
    Ok(())
}

impl PcGrid {
    /// Pieces given explicitly; each must start and end at its piece edges.
    pub fn from_pieces(jumps: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        validate_jumps(&jumps)?;
        if pieces.len() != jumps.len() + 1 {
            return Err(Error::invalid(format!(
                "{} jump point(s) need {} pieces, got {}",
                jumps.len(),
                jumps.len() + 1,
                pieces.len()
            )));
        }
        let mut ts = Vec::new();
        let mut offsets = vec![0];
        for (p, piece) in pieces.into_iter().enumerate() {
            let lo = if p == 0 { 0.0 } else { jumps[p - 1] };
            let hi = if p == jumps.len() { 1.0 } else { jumps[p] };
            if piece.len() < 2 {
                return Err(Error::invalid(format!("piece {p} has fewer than two nodes")));
            }
            if piece[0] != lo || piece[piece.len() - 1] != hi {
                return Err(Error::invalid(format!(
                    "piece {p} must span [{lo}, {hi}], got [{}, {}]",
                    piece[0],
                    piece[piece.len() - 1]
                )));
            }
            if piece.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid(format!("piece {p} nodes not strictly increasing")));
            }
            ts.extend(piece);
            offsets.push(ts.len());
        }
        Ok(PcGrid { jumps, ts, offsets })
    }

    /// `n` equispaced nodes on every piece.
    pub fn uniform(jumps: &[f64], n: usize) -> Result<Self> {
        Self::refined(jumps, n, &[])
    }

    /// Uniform pieces with every point of `extra` placed on a node.
    ///
    /// A target closer than a quarter spacing to an existing interior node
    /// moves that node; otherwise a node is inserted.
    pub fn refined(jumps: &[f64], n: usize, extra: &[f64]) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("need at least two nodes per piece"));
        }
        validate_jumps(jumps)?;
        let mut edges = vec![0.0];
        edges.extend_from_slice(jumps);
        edges.push(1.0);
        let mut pieces = Vec::with_capacity(edges.len() - 1);
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let h = (hi - lo) / (n - 1) as f64;
            let mut piece: Vec<f64> = (0..n).map(|i| if i + 1 == n { hi } else { lo + h * i as f64 }).collect();
            let mut pinned = vec![false; piece.len()];
            for &x in extra {
                if !(x > lo && x < hi) {
                    continue;
                }
                let k = piece.partition_point(|&t| t < x);
                let (below, above) = (piece[k - 1], piece[k]);
                if above == x || below == x {
                    continue;
                }
                let nearest = if x - below <= above - x { k - 1 } else { k };
                let movable = nearest > 0 && nearest + 1 < piece.len() && !pinned[nearest];
                if movable && (piece[nearest] - x).abs() < 0.25 * h {
                    piece[nearest] = x;
                    pinned[nearest] = true;
                } else {
                    piece.insert(k, x);
                    pinned.insert(k, true);
                }
            }
            pieces.push(piece);
        }
        Self::from_pieces(jumps.to_vec(), pieces)
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn num_pieces(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn piece_range(&self, p: usize) -> std::ops::Range<usize> {
        self.offsets[p]..self.offsets[p + 1]
    }

    pub fn piece(&self, p: usize) -> &[f64] {
        &self.ts[self.piece_range(p)]
    }

    /// Piece containing `t` away from jump points.
    fn piece_of(&self, t: f64) -> usize {
        self.jumps.partition_point(|&tau| tau < t)
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        let p = self.offsets.partition_point(|&o| o <= idx) - 1;
        let range = self.piece_range(p);
        if idx == range.start && p > 0 {
            NodeKind::Right
        } else if idx + 1 == range.end && p + 1 < self.num_pieces() {
            NodeKind::Left
        } else {
            NodeKind::Plain
        }
    }

    /// Flat index of the left node at jump `i`.
    pub fn left_index(&self, jump: usize) -> usize {
        self.offsets[jump + 1] - 1
    }

    pub fn right_index(&self, jump: usize) -> usize {
        self.offsets[jump + 1]
    }

    pub fn jump_index(&self, t: f64) -> Option<usize> {
        self.jumps.iter().position(|&tau| (tau - t).abs() <= COLLISION_TOL)
    }

    /// Interpolation stencil for `(t, side)`: up to two `(index, weight)` pairs.
    pub fn stencil(&self, t: f64, side: Side) -> Result<[(usize, f64); 2]> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
        }
        if let Some(j) = self.jump_index(t) {
            let idx = match side {
                Side::Right => self.right_index(j),
                Side::Left | Side::Default => self.left_index(j),
            };
            return Ok([(idx, 1.0), (idx, 0.0)]);
        }
        let range = self.piece_range(self.piece_of(t));
        let piece = &self.ts[range.clone()];
        let k = piece.partition_point(|&x| x < t);
        if k < piece.len() && piece[k] == t {
            return Ok([(range.start + k, 1.0), (range.start + k, 0.0)]);
        }
        let k = k.clamp(1, piece.len() - 1);
        let (t0, t1) = (piece[k - 1], piece[k]);
        let theta = (t - t0) / (t1 - t0);
        Ok([(range.start + k - 1, 1.0 - theta), (range.start + k, theta)])
    }
}

/// Element of PC[0,1] in nodal form.
#[derive(Debug, Clone, PartialEq)]
pub struct PCFunction {
    grid: Arc<PcGrid>,
    values: Vec<f64>,
}

impl PCFunction {
    pub fn new(grid: Arc<PcGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!("{} values for {} grid nodes", values.len(), grid.len())));
        }
        Ok(PCFunction { grid, values })
    }

    /// Samples `f(t, kind)` at every node.
    pub fn sample<F>(grid: Arc<PcGrid>, mut f: F) -> Self
    where
        F: FnMut(f64, NodeKind) -> f64,
    {
        let values = (0..grid.len()).map(|i| f(grid.times()[i], grid.kind(i))).collect();
        PCFunction { grid, values }
    }

    pub fn try_sample<F>(grid: Arc<PcGrid>, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, NodeKind) -> Result<f64>,
    {
        let values = (0..grid.len())
            .map(|i| f(grid.times()[i], grid.kind(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PCFunction { grid, values })
    }

    pub fn constant(grid: Arc<PcGrid>, value: f64) -> Self {
        let n = grid.len();
        PCFunction {
            grid,
            values: vec![value; n],
        }
    }

    pub fn grid(&self) -> &Arc<PcGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn jumps(&self) -> &[f64] {
        self.grid.jumps()
    }

    /// `(t, kind, value)` for every node in order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, NodeKind, f64)> + '_ {
        (0..self.values.len()).map(|i| (self.grid.times()[i], self.grid.kind(i), self.values[i]))
    }

    pub fn eval(&self, t: f64, side: Side) -> Result<f64> {
        let [(i, wi), (j, wj)] = self.grid.stencil(t, side)?;
        if wj == 0.0 {
            return Ok(self.values[i]);
        }
        Ok(wi * self.values[i] + wj * self.values[j])
    }

    /// `u(τ⁺) − u(τ⁻)` at jump number `jump`.
    pub fn jump(&self, jump: usize) -> f64 {
        self.values[self.grid.right_index(jump)] - self.values[self.grid.left_index(jump)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Minimum over `[a, b]`; the window must not contain a jump point.
    pub fn min_on(&self, a: f64, b: f64) -> Result<f64> {
        if !(0.0 <= a && a <= b && b <= 1.0) {
            return Err(Error::Domain(format!("window [{a}, {b}] not inside [0, 1]")));
        }
        if self.jumps().iter().any(|&tau| tau >= a && tau <= b) {
            return Err(Error::Domain(format!("window [{a}, {b}] contains a jump point")));
        }
        let mut m = self.eval(a, Side::Default)?.min(self.eval(b, Side::Default)?);
        for (i, &t) in self.grid.times().iter().enumerate() {
            if t > a && t < b {
                m = m.min(self.values[i]);
            }
        }
        Ok(m)
    }

    /// Membership in the cone `{u ≥ 0, min_[a,b] u ≥ c‖u‖}` up to `tol`.
    pub fn in_cone(&self, cone: &ConeParams, tol: f64) -> bool {
        self.cone_margin(cone).is_ok_and(|m| m >= -tol)
    }

    /// Smallest of `min u` and `min_[a,b] u − c‖u‖`; nonnegative inside the cone.
    pub fn cone_margin(&self, cone: &ConeParams) -> Result<f64> {
        Ok(self.window_margin(cone)?.min(self.min_value()))
    }

    /// `min_[a,b] u − c‖u‖`.
    pub fn window_margin(&self, cone: &ConeParams) -> Result<f64> {
        Ok(self.min_on(cone.a, cone.b)? - cone.c * self.sup_norm())
    }

    pub fn map<F: FnMut(f64) -> f64>(&self, f: F) -> Self {
        PCFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn zip_with<F: FnMut(f64, f64) -> f64>(&self, other: &PCFunction, mut f: F) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("functions live on different grids"));
        }
        Ok(PCFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Same function on another grid with identical jump points.
    pub fn resample(&self, grid: Arc<PcGrid>) -> Result<Self> {
        if grid.jumps() != self.jumps() {
            return Err(Error::invalid("resampling across different jump sets"));
        }
        PCFunction::try_sample(grid, |t, kind| self.eval(t, kind.side()))
    }
}

/// Window `[a, b]` and constant `c` of the cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ConeParams {
    /// Checks `0 < τ_max < a < b < 1` and `0 < c ≤ 1`.
    pub fn new(a: f64, b: f64, c: f64, tau_max: f64) -> Result<Self> {
        if !(tau_max < a && a < b && b < 1.0 && tau_max >= 0.0) {
            return Err(Error::invalid(format!("cone window [{a}, {b}] must satisfy {tau_max} < a < b < 1")));
        }
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::invalid(format!("cone constant c = {c} not in (0, 1]")));
        }
        Ok(ConeParams { a, b, c })
    }
}
