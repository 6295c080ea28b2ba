//! `impulse-cone constants|check|solve|verify`.
//!
//! Exit codes: 0 success, 1 usage/input/numerical error, 2 nothing certified
//! or found (or verification above tolerance).

mod solution_csv;
mod specfile;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub use solution_csv::{read_solution, write_solution};
pub use specfile::{load_spec, parse_spec};

use crate::conditions::{default_rho_grid, Checker, ConditionReport, FAssertions, HVerdict};
use crate::constants::ProblemConstants;
use crate::error::{Error, Result};
use crate::kernel::verify_c3_c4;
use crate::operator::{cone_mapping_check, jumps, Nystrom, ProblemSpec};
use crate::pcfun::{PCFunction, Side};
use crate::shoot::{crosscheck, default_guesses, guess_from_solution, solve_shooting};
use crate::solver::{multi_start, solution_checks, SolveError, SolveOptions, DEFAULT_STARTS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const VERIFY_TOL: f64 = 1e-6;
pub const CONE_SAMPLES: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "impulse-cone",
    version,
    about = "Positive solutions of impulsive BVPs with Stieltjes boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Problem file (TOML).
    spec: PathBuf,
    /// Emit a JSON report instead of text.
    #[arg(long)]
    json: bool,
    /// Seed for randomised checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RhoArgs {
    #[arg(long, requires = "rho2")]
    rho1: Option<f64>,
    #[arg(long, requires = "rho1")]
    rho2: Option<f64>,
    /// Analytic value of f^{0,ρ} at ρ, as RHO:VALUE (repeatable).
    #[arg(long = "assert-f-sup", value_parser = parse_pair)]
    assert_f_sup: Vec<(f64, f64)>,
    /// Analytic value of f_{ρ,ρ/c} at ρ, as RHO:VALUE (repeatable).
    #[arg(long = "assert-f-inf", value_parser = parse_pair)]
    assert_f_inf: Vec<(f64, f64)>,
}

impl RhoArgs {
    fn assertions(&self) -> FAssertions {
        FAssertions {
            sup: self.assert_f_sup.clone(),
            inf: self.assert_f_inf.clone(),
        }
    }

    fn pair(&self) -> Option<(f64, f64)> {
        self.rho1.zip(self.rho2)
    }
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected RHO:VALUE")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
    Ok((num(a)?, num(b)?))
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print m, M(a,b), Γ, ∫𝒦g, c, c₁, c₂ and α₀(1).
    Constants {
        #[command(flatten)]
        common: Common,
    },
    /// Look for (ρ₁, ρ₂) satisfying one of the existence hypotheses.
    Check {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rho: RhoArgs,
    },
    /// Compute a positive solution and optionally write it as CSV.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rho: RhoArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Residual tolerance (overrides the file).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Check a solution CSV against the integral equation and the BVP.
    Verify {
        #[command(flatten)]
        common: Common,
        solution: PathBuf,
    },
}

/// Machine report; unused sections are `null`.
#[derive(Debug, Default, Serialize)]
pub struct Report {
    pub constants: Option<Value>,
    pub conditions: Option<Value>,
    pub solution_meta: Option<Value>,
    pub residuals: Option<Value>,
}

struct Outcome {
    code: i32,
    report: Report,
    text: String,
}

/// Runs the CLI; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let json = match &cli.command {
        Command::Constants { common } | Command::Check { common, .. } | Command::Solve { common, .. } | Command::Verify { common, .. } => {
            common.json
        }
    };
    match dispatch(cli.command) {
        Ok(o) => {
            let written = if json {
                serde_json::to_string_pretty(&o.report)
                    .map_err(|e| Error::Format(e.to_string()))
                    .and_then(|s| writeln!(out, "{s}").map_err(Error::from))
            } else {
                write!(out, "{}", o.text).map_err(Error::from)
            };
            match written {
                Ok(()) => o.code,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_ERROR
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Constants { common } => cmd_constants(&common.spec),
        Command::Check { common, rho } => cmd_check(&common.spec, &rho, common.seed),
        Command::Solve { common, rho, out, tol } => cmd_solve(&common.spec, &rho, out.as_deref(), tol),
        Command::Verify { common, solution } => cmd_verify(&common.spec, &solution),
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn constants_section(spec: &ProblemSpec, k: &ProblemConstants) -> Value {
    let mut v = to_value(k);
    if let Value::Object(map) = &mut v {
        map.insert("alpha0_at_1".into(), json!(k.alpha0(1.0)));
        map.insert("gamma_below_one".into(), json!(k.gamma < 1.0));
        if k.gamma < 1.0 {
            map.insert("i1_coefficient".into(), json!(k.i1_coefficient()));
        }
        map.insert(
            "kernel".into(),
            json!(if spec.kernel.is_dirichlet() { "dirichlet" } else { "custom" }),
        );
    }
    v
}

fn constants_text(k: &ProblemConstants) -> String {
    let mut s = String::new();
    let mut line = |name: &str, v: f64| s.push_str(&format!("{name:<12} = {v:?}\n"));
    line("m", k.m);
    line("M(a,b)", k.big_m);
    line("Gamma", k.gamma);
    line("int_Kcal_g", k.int_kcal_g);
    line("c", k.c);
    line("c1", k.c1);
    line("c2", k.c2);
    line("A0", k.a0);
    line("norm_gamma", k.norm_gamma);
    line("alpha0(1)", k.alpha0(1.0));
    if k.gamma < 1.0 {
        line("I1 coeff", k.i1_coefficient());
    } else {
        s.push_str("WARNING: Gamma >= 1, the index-one condition cannot be checked\n");
    }
    s
}

fn cmd_constants(path: &Path) -> Result<Outcome> {
    let spec = load_spec(path)?;
    let k = ProblemConstants::compute(&spec)?;
    let mut text = constants_text(&k);
    let mut section = constants_section(&spec, &k);
    if !spec.kernel.is_dirichlet() {
        let audit = verify_c3_c4(&spec.kernel, &spec.cone, 101)?;
        text.push_str(&format!("kernel audit {}\n", if audit.pass { "passed" } else { "FAILED" }));
        if let Value::Object(map) = &mut section {
            map.insert("kernel_audit_pass".into(), json!(audit.pass));
        }
    }
    Ok(Outcome {
        code: EXIT_OK,
        report: Report {
            constants: Some(section),
            ..Report::default()
        },
        text,
    })
}

fn conditions_text(r: &ConditionReport) -> String {
    let mut s = String::new();
    for c in &r.checks {
        let i1 = match c.i1 {
            Some(x) => format!(
                "I1 lhs {:?} {}{} [{:?}]",
                x.lhs,
                if x.holds { "holds" } else { "fails" },
                if x.marginal { " (marginal)" } else { "" },
                x.provenance
            ),
            None => "I1 refused (Gamma >= 1)".into(),
        };
        let x = c.i0;
        s.push_str(&format!(
            "rho {:<12?} {i1}; I0 lhs {:?} {}{}{} [{:?}]\n",
            c.rho,
            x.lhs,
            if x.holds { "holds" } else { "fails" },
            if x.marginal { " (marginal)" } else { "" },
            if x.capped { " (u capped)" } else { "" },
            x.provenance
        ));
    }
    s.push_str(&match r.verdict {
        HVerdict::None => "verdict: no hypothesis pair found\n".into(),
        HVerdict::H1 { rho1, rho2 } => format!("verdict: H1 with rho1 = {rho1:?}, rho2 = {rho2:?}\n"),
        HVerdict::H2 { rho1, rho2 } => format!("verdict: H2 with rho1 = {rho1:?}, rho2 = {rho2:?}\n"),
    });
    s
}

fn conditions(spec: &ProblemSpec, rho: &RhoArgs) -> Result<ConditionReport> {
    let checker = Checker::new(spec, rho.assertions())?;
    match rho.pair() {
        Some((r1, r2)) => checker.check_pair(r1, r2),
        None => checker.find_h(&default_rho_grid(spec)),
    }
}

fn cmd_check(path: &Path, rho: &RhoArgs, seed: u64) -> Result<Outcome> {
    let spec = load_spec(path)?;
    let report = conditions(&spec, rho)?;
    let cone = cone_mapping_check(&spec, CONE_SAMPLES, seed)?;
    let mut text = constants_text(&report.constants);
    text.push_str(&conditions_text(&report));
    text.push_str(&format!(
        "cone check: {}/{} samples mapped into the cone (worst relative margin {:?})\n",
        cone.samples - cone.failures.len(),
        cone.samples,
        cone.worst_margin
    ));
    let mut cond = to_value(&report);
    if let Value::Object(map) = &mut cond {
        map.remove("constants");
        map.insert(
            "cone_check".into(),
            json!({"samples": cone.samples, "failures": cone.failures.len(), "worst_margin": cone.worst_margin, "seed": seed}),
        );
    }
    Ok(Outcome {
        code: if report.verdict.certified() { EXIT_OK } else { EXIT_NOT_FOUND },
        report: Report {
            constants: Some(constants_section(&spec, &report.constants)),
            conditions: Some(cond),
            ..Report::default()
        },
        text,
    })
}

fn cmd_solve(path: &Path, rho: &RhoArgs, out: Option<&Path>, tol: Option<f64>) -> Result<Outcome> {
    let spec = load_spec(path)?;
    let (band, verdict) = match rho.pair() {
        Some(p) => (p, None),
        None => {
            let report = conditions(&spec, rho)?;
            let band = report.verdict.pair().unwrap_or((spec.numerics.rho_min, spec.numerics.rho_max));
            (band, Some(report.verdict))
        }
    };
    let mut opts = SolveOptions::from_spec(&spec);
    if let Some(t) = tol {
        opts.tol = t;
    }
    let grid = spec.default_grid()?;
    let mut text = format!("band: rho1 = {:?}, rho2 = {:?}\n", band.0, band.1);
    let meta_base = json!({"rho1": band.0, "rho2": band.1, "verdict": verdict, "tol": opts.tol, "nodes": grid.len()});
    match multi_start(&spec, Arc::clone(&grid), band.0, band.1, DEFAULT_STARTS, &opts) {
        Ok(rep) => {
            let sol = &rep.solution;
            let checks = solution_checks(&spec, &sol.u)?;
            let js = jumps(&sol.u);
            if let Some(p) = out {
                let file = std::fs::File::create(p)?;
                write_solution(std::io::BufWriter::new(file), &sol.u)?;
                text.push_str(&format!("wrote {}\n", p.display()));
            }
            text.push_str(&format!(
                "solved with {:?} from start {} ({:?}) in {} iterations\nresidual    = {:?}\ncone margin = {:?}\nsup norm    = {:?}\njumps       = {:?}\n",
                sol.method, rep.start, rep.starts[rep.start], sol.iterations, sol.residual, sol.cone_margin, sol.u.sup_norm(), js
            ));
            let mut meta = meta_base;
            meta["method"] = to_value(&sol.method);
            meta["iterations"] = json!(sol.iterations);
            meta["start"] = to_value(&rep.starts[rep.start]);
            meta["sup_norm"] = json!(sol.u.sup_norm());
            meta["jumps"] = json!(js);
            meta["out"] = json!(out.map(|p| p.display().to_string()));
            meta["converged"] = json!(true);
            Ok(Outcome {
                code: EXIT_OK,
                report: Report {
                    solution_meta: Some(meta),
                    residuals: Some(to_value(&checks)),
                    ..Report::default()
                },
                text,
            })
        }
        Err(SolveError::AllStartsFailed(fails)) => {
            let best = fails.iter().map(|f| f.residual).fold(f64::INFINITY, f64::min);
            text.push_str(&format!("no solution found: {} attempts, best residual {best:?}\n", fails.len()));
            for f in &fails {
                text.push_str(&format!("  {:?} {:?} residual {:?}\n", f.method, f.reason, f.residual));
            }
            let mut meta = meta_base;
            meta["converged"] = json!(false);
            meta["attempts"] = json!(fails
                .iter()
                .map(|f| json!({"method": f.method, "reason": f.reason, "residual": f.residual}))
                .collect::<Vec<_>>());
            meta["best_residual"] = json!(best);
            Ok(Outcome {
                code: EXIT_NOT_FOUND,
                report: Report {
                    solution_meta: Some(meta),
                    ..Report::default()
                },
                text,
            })
        }
        Err(SolveError::NotConverged(f)) => Err(Error::Numerical(format!("{:?}", f.reason))),
        Err(SolveError::Numeric(e)) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyReport {
    pub operator_residual: f64,
    pub shooting_crosscheck: f64,
    pub jump_error: f64,
    pub derivative_jump_error: f64,
    pub right_boundary_error: f64,
    pub left_boundary_error: f64,
}

impl VerifyReport {
    pub fn worst(&self) -> f64 {
        [
            self.operator_residual,
            self.shooting_crosscheck,
            self.jump_error,
            self.derivative_jump_error,
            self.right_boundary_error,
            self.left_boundary_error,
        ]
        .into_iter()
        .fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x) })
    }
}

/// Residual, jump and boundary errors of `u`, plus its distance to a
/// shooting solution started from `u`.
pub fn verify_solution(spec: &ProblemSpec, u: &PCFunction) -> Result<VerifyReport> {
    let ny = Nystrom::new(spec, Arc::clone(u.grid()))?;
    let v = u.values();
    let operator_residual = ny.residual_values(v)?;
    let mut jump_error: f64 = 0.0;
    let mut derivative_jump_error: f64 = 0.0;
    for (j, imp) in spec.impulses.iter().enumerate() {
        let left = v[u.grid().left_index(j)];
        let i = imp.eval(left)?;
        jump_error = jump_error.max((u.jump(j) - i).abs());
        let dl = ny.image_derivative(v, imp.tau, Side::Left)?;
        let dr = ny.image_derivative(v, imp.tau, Side::Right)?;
        derivative_jump_error = derivative_jump_error.max((dr - dl - i / (imp.tau - 1.0)).abs());
    }
    let mut guesses = vec![guess_from_solution(spec, u)?];
    guesses.extend(default_guesses(u.sup_norm().max(1.0) * spec.cone.c, spec.cone.c));
    let shooting_crosscheck = match solve_shooting(spec, &guesses, spec.numerics.shoot_steps) {
        Ok(s) => crosscheck(u, &s.trajectory.u)?,
        Err(_) => f64::INFINITY,
    };
    Ok(VerifyReport {
        operator_residual,
        shooting_crosscheck,
        jump_error,
        derivative_jump_error,
        right_boundary_error: v[v.len() - 1].abs(),
        left_boundary_error: (v[0] - spec.boundary.apply(u)?).abs(),
    })
}

fn cmd_verify(path: &Path, solution: &Path) -> Result<Outcome> {
    let spec = load_spec(path)?;
    let file = std::fs::File::open(solution)?;
    let u = read_solution(file, &spec.jump_points())?;
    let rep = verify_solution(&spec, &u)?;
    let ok = rep.worst() <= VERIFY_TOL;
    let text = format!(
        "operator residual     = {:?}\nshooting crosscheck   = {:?}\njump error            = {:?}\nderivative jump error = {:?}\nu(1) error            = {:?}\nu(0) - alpha[u]       = {:?}\n{}\n",
        rep.operator_residual,
        rep.shooting_crosscheck,
        rep.jump_error,
        rep.derivative_jump_error,
        rep.right_boundary_error,
        rep.left_boundary_error,
        if ok { "verified" } else { "NOT verified" }
    );
    Ok(Outcome {
        code: if ok { EXIT_OK } else { EXIT_NOT_FOUND },
        report: Report {
            solution_meta: Some(
                json!({"file": solution.display().to_string(), "nodes": u.grid().len(), "verified": ok, "tol": VERIFY_TOL}),
            ),
            residuals: Some(to_value(&rep)),
            ..Report::default()
        },
        text,
    })
}
