//! TOML problem files.
//!
//! ```toml
//! [problem]
//! f = "u^2"            # f(t, u)
//! g = "1"              # g(s) or g(t)
//! g_breakpoints = []
//!
//! [kernel]
//! type = "dirichlet"   # or "custom" with lower, upper, gamma, phi, c1, c2
//!
//! [boundary]
//! A0 = 0.0
//! atoms = [[0.5, 0.8]] # [location, weight]
//! # density = "t"      # optional, in t
//! # density_breakpoints = []
//!
//! [[impulses]]
//! tau = 0.2
//! I = "x/2"
//! delta1 = 0.5
//! delta2 = 0.5
//!
//! [cone]
//! a = 0.25
//! b = 0.75
//! # c = 0.25           # defaults to min(c1, c2)
//!
//! [numerics]           # every key optional
//! nodes_per_piece = 257
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Profile};
use crate::kernel::KernelSpec;
use crate::measure::{Atom, BoundaryFunctional, StieltjesMeasure};
use crate::operator::{Impulse, Numerics, ProblemSpec};
use crate::pcfun::ConeParams;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    problem: ProblemSection,
    #[serde(default)]
    kernel: KernelSection,
    #[serde(default)]
    boundary: BoundarySection,
    #[serde(default)]
    impulses: Vec<ImpulseSection>,
    cone: ConeSection,
    #[serde(default)]
    numerics: NumericsSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    f: String,
    #[serde(default = "one")]
    g: String,
    #[serde(default)]
    g_breakpoints: Vec<f64>,
}

fn one() -> String {
    "1".into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum KernelSection {
    #[default]
    Dirichlet,
    Custom {
        lower: String,
        upper: String,
        gamma: String,
        phi: String,
        c1: f64,
        c2: f64,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundarySection {
    #[serde(rename = "A0", default)]
    a0: f64,
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    density: Option<String>,
    #[serde(default)]
    density_breakpoints: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImpulseSection {
    tau: f64,
    #[serde(rename = "I")]
    map: String,
    delta1: f64,
    delta2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConeSection {
    a: f64,
    b: f64,
    c: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NumericsSection {
    nodes_per_piece: Option<usize>,
    tol: Option<f64>,
    damping: Option<f64>,
    max_iter: Option<usize>,
    shoot_steps: Option<usize>,
    quad_tol: Option<f64>,
    rho_min: Option<f64>,
    rho_max: Option<f64>,
    rho_count: Option<usize>,
    f_grid: Option<usize>,
    u_cap: Option<f64>,
    seed: Option<u64>,
}

impl NumericsSection {
    fn resolve(self) -> Numerics {
        let d = Numerics::default();
        Numerics {
            nodes_per_piece: self.nodes_per_piece.unwrap_or(d.nodes_per_piece),
            tol: self.tol.unwrap_or(d.tol),
            damping: self.damping.unwrap_or(d.damping),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            shoot_steps: self.shoot_steps.unwrap_or(d.shoot_steps),
            quad_tol: self.quad_tol.unwrap_or(d.quad_tol),
            rho_min: self.rho_min.unwrap_or(d.rho_min),
            rho_max: self.rho_max.unwrap_or(d.rho_max),
            rho_count: self.rho_count.unwrap_or(d.rho_count),
            f_grid: self.f_grid.unwrap_or(d.f_grid),
            u_cap: self.u_cap.unwrap_or(d.u_cap),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

fn expr(field: &str, src: &str) -> Result<Expr> {
    Expr::parse(src).map_err(|e| Error::invalid(format!("{field}: {e}")))
}

fn profile(field: &str, src: &str, allowed: &[&str], breaks: Vec<f64>) -> Result<Profile> {
    Profile::parse(src, allowed, breaks).map_err(|e| Error::invalid(format!("{field}: {e}")))
}

pub fn parse_spec(text: &str) -> Result<ProblemSpec> {
    let file: File = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let f = expr("problem.f", &file.problem.f)?;
    let g = profile("problem.g", &file.problem.g, &["s", "t"], file.problem.g_breakpoints)?;

    let impulses = file
        .impulses
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let map = profile(&format!("impulses[{i}].I"), &s.map, &["x"], vec![])?;
            Impulse::new(s.tau, map, s.delta1, s.delta2)
        })
        .collect::<Result<Vec<_>>>()?;
    let tau_max = impulses.last().map_or(0.0, |i| i.tau);

    let atoms = file.boundary.atoms.into_iter().map(|(loc, weight)| Atom { loc, weight }).collect();
    let density = file
        .boundary
        .density
        .map(|d| profile("boundary.density", &d, &["t", "s"], file.boundary.density_breakpoints))
        .transpose()?;
    let boundary = BoundaryFunctional::new(file.boundary.a0, StieltjesMeasure::new(atoms, density)?)?;

    let provisional = ConeParams::new(file.cone.a, file.cone.b, file.cone.c.unwrap_or(1.0), tau_max)?;
    let kernel = match file.kernel {
        KernelSection::Dirichlet => KernelSpec::builtin_dirichlet(&provisional)?,
        KernelSection::Custom {
            lower,
            upper,
            gamma,
            phi,
            c1,
            c2,
        } => KernelSpec::custom(
            expr("kernel.lower", &lower)?,
            expr("kernel.upper", &upper)?,
            expr("kernel.gamma", &gamma)?,
            expr("kernel.phi", &phi)?,
            c1,
            c2,
        )?,
    };
    let c = file.cone.c.unwrap_or_else(|| kernel.cone_constant());
    let cone = ConeParams::new(file.cone.a, file.cone.b, c, tau_max)?;
    ProblemSpec::new(f, g, impulses, boundary, kernel, cone, file.numerics.resolve())
}

pub fn load_spec(path: &Path) -> Result<ProblemSpec> {
    parse_spec(&std::fs::read_to_string(path)?)
}
