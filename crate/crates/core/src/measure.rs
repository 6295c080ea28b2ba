//! Positive Stieltjes measures on `[0, 1]` and affine boundary functionals.
//!
//! A measure is a finite list of point masses plus an optional density. The
//! functional `α[u] = A₀ + ∫ u dA` is a [`BoundaryFunctional`]; the impulse
//! bounds `δ₁, δ₂` enter through [`BoundaryFunctional::augment`], which adds a
//! point mass `δ/(1 − τ)` at every impulse time.

use crate::error::{Error, Result};
use crate::expr::Profile;
use crate::pcfun::{PCFunction, Side, COLLISION_TOL};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub loc: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StieltjesMeasure {
    atoms: Vec<Atom>,
    density: Option<Profile>,
}

impl StieltjesMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Atoms are sorted; coinciding locations, negative weights, locations
    /// outside `[0, 1]` and densities that go negative on a sample are rejected.
    pub fn new(mut atoms: Vec<Atom>, density: Option<Profile>) -> Result<Self> {
        for atom in &atoms {
            if !(0.0..=1.0).contains(&atom.loc) {
                return Err(Error::invalid(format!("atom location {} outside [0, 1]", atom.loc)));
            }
            if !(atom.weight >= 0.0 && atom.weight.is_finite()) {
                return Err(Error::invalid(format!("atom weight {} must be finite and >= 0", atom.weight)));
            }
        }
        atoms.sort_by(|x, y| x.loc.total_cmp(&y.loc));
        if atoms.windows(2).any(|w| w[1].loc - w[0].loc <= COLLISION_TOL) {
            return Err(Error::invalid("measure has two atoms at the same location"));
        }
        if let Some(d) = &density {
            for i in 0..=1000 {
                let s = i as f64 / 1000.0;
                let v = d.eval(s)?;
                if v < 0.0 {
                    return Err(Error::invalid(format!("density negative at s = {s}: {v}")));
                }
            }
        }
        Ok(StieltjesMeasure { atoms, density })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Profile> {
        self.density.as_ref()
    }

    pub fn atom_locations(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.loc).collect()
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.integrate(|_, _| Ok(1.0), Side::Default, &[])
    }

    /// `Σ wᵢ φ(locᵢ) + ∫ φ(s) ρ(s) ds`.
    ///
    /// `side` says which one-sided value of `φ` is taken at atoms; `breaks`
    /// adds quadrature breakpoints for the density part.
    pub fn integrate<F>(&self, mut phi: F, side: Side, breaks: &[f64]) -> Result<f64>
    where
        F: FnMut(f64, Side) -> Result<f64>,
    {
        let mut total = 0.0;
        for atom in &self.atoms {
            if atom.weight != 0.0 {
                total += atom.weight * phi(atom.loc, side)?;
            }
        }
        if let Some(d) = &self.density {
            let mut all = d.breakpoints().to_vec();
            all.extend_from_slice(breaks);
            total += quad::integrate(|s| Ok(phi(s, Side::Default)? * d.eval(s)?), 0.0, 1.0, &all, quad::DEFAULT_TOL)?;
        }
        Ok(total)
    }

    /// Integral of a piecewise-linear function, left limits at atoms.
    pub fn integrate_pc(&self, u: &PCFunction) -> Result<f64> {
        let breaks = if self.density.is_some() {
            u.grid().times().to_vec()
        } else {
            Vec::new()
        };
        self.integrate(|s, side| u.eval(s, side), Side::Left, &breaks)
    }

    /// Measure of `[a, b]`: atoms inside plus `∫ₐᵇ ρ`.
    pub fn mass_on(&self, a: f64, b: f64) -> Result<f64> {
        let atoms: f64 = self.atoms.iter().filter(|x| x.loc >= a && x.loc <= b).map(|x| x.weight).sum();
        let dens = match &self.density {
            Some(d) => quad::integrate(|s| Ok(d.eval(s)?), a, b, d.breakpoints(), quad::DEFAULT_TOL)?,
            None => 0.0,
        };
        Ok(atoms + dens)
    }

    pub fn has_atom_near(&self, x: f64) -> bool {
        self.atoms.iter().any(|a| (a.loc - x).abs() <= COLLISION_TOL)
    }

    /// Adds point masses; fails if one lands on an existing atom.
    pub fn with_atoms(&self, extra: &[Atom]) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        for a in extra {
            if self.has_atom_near(a.loc) {
                return Err(Error::invalid(format!("impulse atom at {} collides with a boundary atom", a.loc)));
            }
            atoms.push(*a);
        }
        StieltjesMeasure::new(atoms, self.density.clone())
    }

    /// Same measure with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                loc: a.loc,
                weight: a.weight * factor,
            })
            .collect();
        let density = match &self.density {
            Some(d) if factor != 1.0 => {
                use crate::expr::{BinOp, Expr};
                let scaled = Expr::Binary(BinOp::Mul, Box::new(Expr::Num(factor)), Box::new(d.expr().clone()));
                Some(Profile::new(scaled, &["s", "t"], d.breakpoints().to_vec())?)
            }
            other => other.clone(),
        };
        StieltjesMeasure::new(atoms, density)
    }
}

/// Impulse location and a slope bound on its map: `(τ, δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseBound {
    pub tau: f64,
    pub delta: f64,
}

/// `α[u] = A₀ + ∫₀¹ u dA`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryFunctional {
    pub a0: f64,
    pub measure: StieltjesMeasure,
}

impl BoundaryFunctional {
    pub fn new(a0: f64, measure: StieltjesMeasure) -> Result<Self> {
        if !(a0 >= 0.0 && a0.is_finite()) {
            return Err(Error::invalid(format!("A0 = {a0} must be finite and >= 0")));
        }
        Ok(BoundaryFunctional { a0, measure })
    }

    pub fn apply(&self, u: &PCFunction) -> Result<f64> {
        Ok(self.a0 + self.measure.integrate_pc(u)?)
    }

    /// `dA + Σ δᵢ/(1 − τᵢ) · Dirac(τᵢ)`.
    pub fn augment(&self, impulses: &[ImpulseBound]) -> Result<StieltjesMeasure> {
        let mut prev = 0.0;
        let mut extra = Vec::with_capacity(impulses.len());
        for imp in impulses {
            if !(imp.tau > prev && imp.tau < 1.0) {
                return Err(Error::invalid("impulse times must be strictly increasing in (0, 1)"));
            }
            if !(imp.delta >= 0.0) {
                return Err(Error::invalid(format!("impulse bound {} must be >= 0", imp.delta)));
            }
            prev = imp.tau;
            extra.push(Atom {
                loc: imp.tau,
                weight: imp.delta / (1.0 - imp.tau),
            });
        }
        self.measure.with_atoms(&extra)
    }
}
