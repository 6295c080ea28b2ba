#![allow(dead_code)]

pub mod exprgen;

use std::path::PathBuf;

use impulse_cone::cli::{self, parse_spec};
use impulse_cone::ProblemSpec;

pub fn example_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

pub fn example_spec() -> ProblemSpec {
    cli::load_spec(&example_path("example.toml")).unwrap()
}

pub fn two_impulse_spec() -> ProblemSpec {
    cli::load_spec(&example_path("two_impulses.toml")).unwrap()
}

/// The example data with a different nonlinearity and impulse map.
pub fn example_toml(f: &str, impulse: &str) -> String {
    example_toml_full(f, impulse, 0.0)
}

pub fn example_toml_a0(a0: f64) -> String {
    example_toml_full("u^2", "x/2", a0)
}

fn example_toml_full(f: &str, impulse: &str, a0: f64) -> String {
    format!(
        r#"
[problem]
f = "{f}"
[boundary]
A0 = {a0:?}
atoms = [[0.5, 0.8]]
[[impulses]]
tau = 0.2
I = "{impulse}"
delta1 = 0.5
delta2 = 0.5
[cone]
a = 0.25
b = 0.75
"#
    )
}

pub fn example_with(f: &str, impulse: &str) -> ProblemSpec {
    parse_spec(&example_toml(f, impulse)).unwrap()
}

/// `f ≡ 0`, `α[u] = A₀`, one inert impulse at 0.2: `u = A₀(1 − t)`.
pub fn linear_toml(a0: f64) -> String {
    format!(
        r#"
[problem]
f = "0"
[boundary]
A0 = {a0:?}
[[impulses]]
tau = 0.2
I = "0"
delta1 = 0.0
delta2 = 0.0
[cone]
a = 0.25
b = 0.75
"#
    )
}

/// `-u'' = 1`, `u(0) = u(1) = 0`: `u = t(1 − t)/2`.
pub const DIRICHLET_TOML: &str = r#"
[problem]
f = "1"
[cone]
a = 0.25
b = 0.75
"#;

pub struct Captured {
    pub code: i32,
    pub out: String,
    pub err: String,
}

pub fn run_cli(args: &[&str]) -> Captured {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("impulse-cone").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    Captured {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}
