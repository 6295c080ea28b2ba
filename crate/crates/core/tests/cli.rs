mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::run_cli;
use impulse_cone::cli::{read_solution, write_solution};
use serde_json::Value;
use tempfile::TempDir;

fn example() -> String {
    common::example_path("example.toml").to_str().unwrap().to_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = args.to_vec();
    full.push("--json");
    let run = run_cli(&full);
    let v = serde_json::from_str(&run.out).unwrap_or_else(|e| panic!("{e}: {}", run.out));
    (run.code, v)
}

fn solve_example(dir: &TempDir) -> PathBuf {
    let out = dir.path().join("u.csv");
    let run = run_cli(&["solve", &example(), "--out", s(&out)]);
    assert_eq!(run.code, 0, "{}{}", run.out, run.err);
    out
}

#[test]
fn constants_of_the_example() {
    let (code, v) = json(&["constants", &example()]);
    assert_eq!(code, 0);
    let k = &v["constants"];
    assert!((k["m"].as_f64().unwrap() - 8.0).abs() < 1e-9);
    assert!((k["M"].as_f64().unwrap() - 16.0).abs() < 1e-9);
    assert!((k["Gamma"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    assert!((k["int_Kcal_g"].as_f64().unwrap() - 0.15).abs() < 1e-12);
    assert_eq!(k["c"].as_f64(), Some(0.25));
    for key in ["conditions", "solution_meta", "residuals"] {
        assert!(v[key].is_null(), "{key}");
    }
}

#[test]
fn json_report_matches_printed_values() {
    let text = run_cli(&["constants", &example()]).out;
    let (_, v) = json(&["constants", &example()]);
    let printed = |name: &str| -> f64 {
        let line = text.lines().find(|l| l.split('=').next().unwrap().trim() == name).unwrap();
        line.split('=').nth(1).unwrap().trim().parse().unwrap()
    };
    for (label, key) in [
        ("m", "m"),
        ("M(a,b)", "M"),
        ("Gamma", "Gamma"),
        ("int_Kcal_g", "int_Kcal_g"),
        ("c", "c"),
        ("c1", "c1"),
        ("c2", "c2"),
    ] {
        assert_eq!(printed(label).to_bits(), v["constants"][key].as_f64().unwrap().to_bits(), "{label}");
    }
}

#[test]
fn gamma_at_least_one_is_flagged() {
    let dir = TempDir::new().unwrap();
    let text = common::example_toml("u^2", "x/2").replace("[[0.5, 0.8]]", "[[0.5, 2.0]]");
    let p = write(&dir, "big.toml", &text);
    let run = run_cli(&["constants", s(&p)]);
    assert_eq!(run.code, 0);
    assert!(run.out.contains("WARNING: Gamma >= 1"), "{}", run.out);
    let (_, v) = json(&["constants", s(&p)]);
    assert_eq!(v["constants"]["gamma_below_one"], Value::Bool(false));
}

#[test]
fn missing_file_is_an_error() {
    for cmd in ["constants", "check", "solve"] {
        let run = run_cli(&[cmd, "/nonexistent/spec.toml"]);
        assert_eq!(run.code, 1, "{cmd}");
        assert!(run.err.starts_with("error:"), "{}", run.err);
    }
}

#[test]
fn malformed_expression_is_an_error() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.toml", &common::example_toml("u^", "x/2"));
    for cmd in ["constants", "check", "solve"] {
        let run = run_cli(&[cmd, s(&p)]);
        assert_eq!(run.code, 1, "{cmd}");
        assert!(run.err.contains("problem.f") && run.err.contains("byte 2"), "{}", run.err);
    }
}

#[test]
fn check_certifies_h1_on_the_example() {
    let (code, v) = json(&["check", &example(), "--rho1", "0.5", "--rho2", "13"]);
    assert_eq!(code, 0);
    assert_eq!(v["conditions"]["verdict"]["kind"], "H1");
    let cone = &v["conditions"]["cone_check"];
    assert_eq!(cone["samples"], 200);
    assert_eq!(cone["failures"], 0);
}

#[test]
fn check_with_a_failing_pair_exits_two() {
    let run = run_cli(&["check", &example(), "--rho1", "1.0", "--rho2", "13"]);
    assert_eq!(run.code, 2, "{}", run.out);
}

#[test]
fn check_searches_the_grid_without_explicit_rho() {
    let (code, v) = json(&["check", &example()]);
    assert_eq!(code, 0);
    assert!(v["conditions"]["verdict"]["kind"].is_string());
}

#[test]
fn rho1_requires_rho2() {
    assert_eq!(run_cli(&["check", &example(), "--rho1", "0.5"]).code, 1);
}

#[test]
fn solve_writes_one_jump_pair() {
    let dir = TempDir::new().unwrap();
    let out = solve_example(&dir);
    let u = read_solution(fs::File::open(&out).unwrap(), &[0.2]).unwrap();
    assert_eq!(u.jumps(), &[0.2]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("0.2,")).count(), 2);
    assert!(u.values().last().unwrap().abs() <= 1e-8);
    assert!(u.sup_norm() > 0.5);
}

#[test]
fn solve_reports_residuals_in_json() {
    let (code, v) = json(&["solve", &example(), "--rho1", "0.5", "--rho2", "13"]);
    assert_eq!(code, 0);
    assert_eq!(v["solution_meta"]["converged"], Value::Bool(true));
    assert!(v["residuals"]["residual"].as_f64().unwrap() <= 1e-9);
    assert!(v["residuals"]["right_boundary"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn solve_of_the_linear_problem_is_one_minus_t() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "lin.toml", &common::linear_toml(1.0));
    let out = dir.path().join("lin.csv");
    let run = run_cli(&["solve", s(&spec), "--out", s(&out), "--tol", "1e-14"]);
    assert_eq!(run.code, 0, "{}{}", run.out, run.err);
    let u = read_solution(fs::File::open(&out).unwrap(), &[0.2]).unwrap();
    for (t, _, v) in u.nodes() {
        assert!((v - (1.0 - t)).abs() <= 1e-12, "t = {t}");
    }
}

#[test]
fn unreachable_tolerance_exits_two() {
    let (code, v) = json(&["solve", &example(), "--rho1", "0.5", "--rho2", "13", "--tol", "1e-30"]);
    assert_eq!(code, 2);
    assert_eq!(v["solution_meta"]["converged"], Value::Bool(false));
    assert!(v["solution_meta"]["best_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn verify_accepts_solver_output() {
    let dir = TempDir::new().unwrap();
    let out = solve_example(&dir);
    let (code, v) = json(&["verify", &example(), s(&out)]);
    assert_eq!(code, 0, "{v}");
    assert!(v["residuals"]["shooting_crosscheck"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn verify_rejects_a_perturbed_solution() {
    let dir = TempDir::new().unwrap();
    let out = solve_example(&dir);
    let u = read_solution(fs::File::open(&out).unwrap(), &[0.2]).unwrap();
    let bumped = u.map(|x| x + 0.05);
    let p = dir.path().join("bumped.csv");
    write_solution(fs::File::create(&p).unwrap(), &bumped).unwrap();
    let (code, v) = json(&["verify", &example(), s(&p)]);
    assert_eq!(code, 2);
    let r = v["residuals"]["operator_residual"].as_f64().unwrap();
    assert!(r > 0.01 && r < 1.0, "residual {r}");
}

#[test]
fn verify_rejects_a_csv_without_the_jump_pair() {
    let dir = TempDir::new().unwrap();
    let out = solve_example(&dir);
    let text = fs::read_to_string(&out).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("0.2,R")).collect();
    let p = write(&dir, "broken.csv", &(kept.join("\n") + "\n"));
    let run = run_cli(&["verify", &example(), s(&p)]);
    assert_eq!(run.code, 1);
    assert!(run.err.starts_with("error:"));
}

#[test]
fn two_impulse_solution_has_two_jumps() {
    let path = common::example_path("two_impulses.toml");
    let (code, v) = json(&["solve", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let jumps = v["solution_meta"]["jumps"].as_array().unwrap();
    assert_eq!(jumps.len(), 2);
    assert!(jumps.iter().all(|j| j.as_f64().unwrap() > 0.0));
}

#[test]
fn exit_codes_are_total() {
    let dir = TempDir::new().unwrap();
    let junk = write(&dir, "junk.toml", "not = [valid");
    let ex = example();
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["--help"],
        vec!["frobnicate"],
        vec!["constants"],
        vec!["constants", s(&junk)],
        vec!["check", &ex, "--rho1", "x", "--rho2", "1"],
        vec!["check", &ex, "--rho1", "2", "--rho2", "1"],
        vec!["check", &ex, "--assert-f-sup", "0.5"],
        vec!["verify", &ex, "/nonexistent.csv"],
        vec!["solve", &ex, "--out", "/nonexistent/dir/u.csv", "--rho1", "0.5", "--rho2", "13"],
    ];
    for args in cases {
        let run = run_cli(&args);
        assert!([0, 1, 2].contains(&run.code), "{args:?} -> {}", run.code);
    }
}
