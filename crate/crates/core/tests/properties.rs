mod common;

use std::sync::Arc;

use impulse_cone::conditions::{Checker, FAssertions, Provenance};
use impulse_cone::constants::{compute_big_m, compute_gamma, compute_kcal_g, compute_m, f_inf, f_sup};
use impulse_cone::expr::{Expr, Profile};
use impulse_cone::kernel::KernelSpec;
use impulse_cone::measure::{Atom, BoundaryFunctional, ImpulseBound, StieltjesMeasure};
use impulse_cone::operator::{random_cone_element, Nystrom};
use impulse_cone::pcfun::{ConeParams, PcGrid, Side};
use impulse_cone::quad::{integrate, DEFAULT_TOL};
use impulse_cone::PCFunction;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::exprgen::{expr_tree, render};

fn example_cone() -> ConeParams {
    ConeParams::new(0.25, 0.75, 0.25, 0.2).unwrap()
}

fn grid() -> Arc<PcGrid> {
    Arc::new(PcGrid::uniform(&[0.2], 65).unwrap())
}

fn random_pc(seed: u64, len: usize) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn mixed_measure() -> StieltjesMeasure {
    let density = Profile::parse("1 + t^2", &["t"], vec![]).unwrap();
    StieltjesMeasure::new(vec![Atom { loc: 0.2, weight: 0.3 }, Atom { loc: 0.5, weight: 0.8 }], Some(density)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_of_rendering_is_the_tree(tree in expr_tree(), spaced in any::<bool>()) {
        let text = render(&tree, spaced);
        prop_assert_eq!(Expr::parse(&text).unwrap(), tree);
    }

    #[test]
    fn display_round_trips(tree in expr_tree()) {
        prop_assert_eq!(Expr::parse(&tree.to_string()).unwrap(), tree);
    }

    #[test]
    fn product_binds_tighter_than_sum(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3) {
        let e = Expr::parse("a+b*c").unwrap();
        let got = e.eval(&[("a", a), ("b", b), ("c", c)]).unwrap();
        prop_assert_eq!(got.to_bits(), (a + (b * c)).to_bits());
    }

    #[test]
    fn evaluation_is_pure(tree in expr_tree(), x in -3.0f64..3.0) {
        let b = [("x", x), ("u", x), ("t", x), ("abc", x)];
        let first = tree.eval(&b).ok().map(f64::to_bits);
        prop_assert_eq!(first, tree.eval(&b).ok().map(f64::to_bits));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measure_integral_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = grid();
        let m = mixed_measure();
        let u = PCFunction::new(Arc::clone(&g), random_pc(seed, g.len())).unwrap();
        let v = PCFunction::new(Arc::clone(&g), random_pc(seed ^ 0x9e37, g.len())).unwrap();
        let w = u.zip_with(&v, |x, y| a * x + b * y).unwrap();
        let lhs = m.integrate_pc(&w).unwrap();
        let rhs = a * m.integrate_pc(&u).unwrap() + b * m.integrate_pc(&v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
    }

    #[test]
    fn measure_integral_is_monotone(seed in any::<u64>()) {
        let g = grid();
        let m = mixed_measure();
        let u = PCFunction::new(Arc::clone(&g), random_pc(seed, g.len())).unwrap();
        let bump = random_pc(seed.wrapping_add(1), g.len());
        let v = PCFunction::new(Arc::clone(&g), u.values().iter().zip(&bump).map(|(x, d)| x + d.abs()).collect()).unwrap();
        prop_assert!(m.integrate_pc(&u).unwrap() <= m.integrate_pc(&v).unwrap() + 1e-12);
    }

    #[test]
    fn augmenting_with_zero_weights_is_identity(tau in 0.05f64..0.95) {
        let bf = BoundaryFunctional::new(0.0, mixed_measure()).unwrap();
        let aug = bf.augment(&[ImpulseBound { tau, delta: 0.0 }]).unwrap();
        let phi = |s: f64, _: Side| Ok(s.sin() + 2.0);
        let want = bf.measure.integrate(phi, Side::Left, &[]).unwrap();
        prop_assert!((aug.integrate(phi, Side::Left, &[]).unwrap() - want).abs() <= 1e-14);
    }

    #[test]
    fn sup_norm_is_subadditive(seed in any::<u64>()) {
        let g = grid();
        let u = PCFunction::new(Arc::clone(&g), random_pc(seed, g.len())).unwrap();
        let v = PCFunction::new(Arc::clone(&g), random_pc(!seed, g.len())).unwrap();
        let w = u.zip_with(&v, |x, y| x + y).unwrap();
        prop_assert!(w.sup_norm() <= u.sup_norm() + v.sup_norm());
    }

    #[test]
    fn cone_membership_is_scale_invariant(seed in any::<u64>(), lambda in 1e-3f64..1e3) {
        let g = grid();
        let cone = example_cone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_cone_element(&g, &cone, &mut rng).unwrap();
        prop_assert!(u.in_cone(&cone, 1e-12 * u.sup_norm()));
        let s = u.scaled(lambda);
        prop_assert!(s.in_cone(&cone, 1e-12 * s.sup_norm()));
        let outside = u.map(|x| x - 2.0 * u.sup_norm());
        prop_assert!(!outside.in_cone(&cone, 0.0));
        prop_assert!(!outside.scaled(lambda).in_cone(&cone, 0.0));
    }

    #[test]
    fn nodes_evaluate_to_stored_values(seed in any::<u64>()) {
        let g = grid();
        let u = PCFunction::new(Arc::clone(&g), random_pc(seed, g.len())).unwrap();
        for (i, (t, kind, v)) in u.nodes().enumerate() {
            prop_assert_eq!(u.eval(t, kind.side()).unwrap().to_bits(), v.to_bits(), "node {}", i);
        }
    }

    #[test]
    fn builtin_kernel_is_symmetric_and_bounded(t in 0.0f64..=1.0, s in 0.0f64..=1.0) {
        let cone = example_cone();
        let ks = KernelSpec::builtin_dirichlet(&cone).unwrap();
        prop_assert_eq!(ks.k(t, s).unwrap(), ks.k(s, t).unwrap());
        let phi = ks.phi(s).unwrap();
        if (cone.a..=cone.b).contains(&t) && phi >= 1e-13 {
            let r = ks.k(t, s).unwrap() / phi;
            prop_assert!((0.25 - 1e-14..=1.0 + 1e-14).contains(&r), "k/phi = {}", r);
        }
    }

    #[test]
    fn kernel_row_integral_matches_antiderivative(t in 0.0f64..=1.0) {
        let ks = KernelSpec::builtin_dirichlet(&example_cone()).unwrap();
        let got = integrate(|s| ks.k(t, s), 0.0, 1.0, &[t], DEFAULT_TOL).unwrap();
        prop_assert!((got - t * (1.0 - t) / 2.0).abs() <= 1e-10);
    }

    #[test]
    fn quadrature_is_additive(x in 0.0f64..=1.0, k in 0u32..12) {
        let f = |s: f64| Ok((3.0 * s).cos() + s.powi(k as i32));
        let whole = integrate(f, 0.0, 1.0, &[], DEFAULT_TOL).unwrap();
        let split = integrate(f, 0.0, x, &[], DEFAULT_TOL).unwrap() + integrate(f, x, 1.0, &[], DEFAULT_TOL).unwrap();
        prop_assert!((whole - split).abs() <= 1e-12);
    }

    #[test]
    fn spurious_breakpoints_do_not_matter(bps in prop::collection::vec(0.0f64..1.0, 0..6)) {
        let f = |s: f64| Ok((s - 0.3).abs() * s.exp());
        let base = integrate(f, 0.0, 1.0, &[0.3], DEFAULT_TOL).unwrap();
        let mut more = bps.clone();
        more.push(0.3);
        prop_assert!((integrate(f, 0.0, 1.0, &more, DEFAULT_TOL).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn gauss_rule_is_exact_for_polynomials(coeffs in prop::collection::vec(-2.0f64..2.0, 1..32), lo in -1.0f64..0.0, hi in 0.1f64..2.0) {
        let rule = impulse_cone::quad::GaussLegendre::new(16);
        let p = |s: f64| Ok(coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c));
        let exact: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * (hi.powi(i as i32 + 1) - lo.powi(i as i32 + 1)) / (i as f64 + 1.0))
            .sum();
        let got = rule.apply(&mut { p }, lo, hi).unwrap();
        prop_assert!((got - exact).abs() <= 1e-12 * (1.0 + exact.abs()) * 2f64.powi(coeffs.len() as i32 / 4));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constants_scale_with_the_weight(lambda in 0.1f64..10.0) {
        let cone = example_cone();
        let ks = KernelSpec::builtin_dirichlet(&cone).unwrap();
        let one = Profile::constant(1.0);
        let g = Profile::constant(lambda);
        let da2 = StieltjesMeasure::new(vec![Atom { loc: 0.5, weight: 0.8 }, Atom { loc: 0.2, weight: 0.5 / 0.8 }], None).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        prop_assert!(rel(compute_m(&ks, &g, 1e-12).unwrap(), compute_m(&ks, &one, 1e-12).unwrap() / lambda) < 1e-9);
        prop_assert!(rel(compute_big_m(&ks, &g, 0.25, 0.75, 1e-12).unwrap(), compute_big_m(&ks, &one, 0.25, 0.75, 1e-12).unwrap() / lambda) < 1e-9);
        prop_assert!(rel(compute_kcal_g(&ks, &da2, &g, 1e-12).unwrap(), lambda * compute_kcal_g(&ks, &da2, &one, 1e-12).unwrap()) < 1e-10);
        prop_assert!((compute_gamma(&ks, &da2).unwrap() - 0.9).abs() < 1e-15);
        prop_assert!(compute_m(&ks, &g, 1e-12).unwrap() <= compute_big_m(&ks, &g, 0.25, 0.75, 1e-12).unwrap());
    }

    #[test]
    fn f_bounds_bracket_samples(rho in 0.05f64..20.0, ti in 0.0f64..=1.0, ui in 0.0f64..=1.0) {
        let f = Expr::parse("u^2 + t*u + sin(5*t)^2").unwrap();
        let eval = |t: f64, u: f64| f.eval(&[("t", t), ("u", u)]).unwrap();
        let sup = f_sup(&f, rho, 64).unwrap();
        prop_assert!(sup.value * rho >= eval(ti, ui * rho) * (1.0 - 1e-9));
        let (a, b, c) = (0.25, 0.75, 0.25);
        let inf = f_inf(&f, rho, c, a, b, 64, 1e6).unwrap();
        let (t0, u0) = (a + ti * (b - a), rho + ui * (rho / c - rho));
        prop_assert!(inf.value <= eval(t0, u0) / rho * (1.0 + 1e-9));
    }

    #[test]
    fn index_lhs_is_monotone(rho in 0.01f64..100.0, f0 in 0.0f64..2.0, df in 1e-6f64..1.0) {
        let spec = common::example_spec();
        let ch = Checker::new(&spec, FAssertions::default()).unwrap();
        let lo = ch.i1_from_bound(rho, f0, Provenance::Asserted);
        let hi = ch.i1_from_bound(rho, f0 + df, Provenance::Asserted);
        prop_assert!(hi.lhs > lo.lhs);
        prop_assert!(!lo.holds || lo.lhs <= 1.0 + 1e-12);
        prop_assert!(!hi.holds || lo.holds);
        let lo0 = ch.i0_from_bound(rho, f0, Provenance::Asserted);
        let hi0 = ch.i0_from_bound(rho, f0 + df, Provenance::Asserted);
        prop_assert!(hi0.lhs > lo0.lhs);
        prop_assert!(!lo0.holds || hi0.holds);
    }

    #[test]
    fn i1_lhs_grows_with_a0(a0 in 0.0f64..2.0, da in 1e-3f64..1.0, rho in 0.1f64..10.0) {
        let with = |a: f64| common::example_toml_a0(a);
        let s1 = impulse_cone::cli::parse_spec(&with(a0)).unwrap();
        let s2 = impulse_cone::cli::parse_spec(&with(a0 + da)).unwrap();
        let l1 = Checker::new(&s1, FAssertions::default()).unwrap().i1_from_bound(rho, 0.3, Provenance::Asserted).lhs;
        let l2 = Checker::new(&s2, FAssertions::default()).unwrap().i1_from_bound(rho, 0.3, Provenance::Asserted).lhs;
        prop_assert!(l2 > l1);
    }

    #[test]
    fn i1_lhs_is_scale_free_for_linear_f(k in 0.01f64..2.0, rho in 0.01f64..100.0) {
        let spec = common::example_with(&format!("{k:?}*u"), "x/2");
        let ch = Checker::new(&spec, FAssertions::default()).unwrap();
        let a = ch.check_i1(rho).unwrap().lhs;
        let b = ch.check_i1(2.0 * rho).unwrap().lhs;
        prop_assert!((a - b).abs() <= 1e-9 * a.abs());
    }

    #[test]
    fn operator_preserves_positivity_and_the_cone(seed in any::<u64>()) {
        let spec = common::example_spec();
        let g = spec.default_grid().unwrap();
        let ny = Nystrom::new(&spec, Arc::clone(&g)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_cone_element(&g, &spec.cone, &mut rng).unwrap();
        let tu = ny.apply(&u).unwrap();
        prop_assert!(tu.min_value() >= -1e-12);
        prop_assert!(tu.min_on(0.25, 0.75).unwrap() >= spec.cone.c * tu.sup_norm() - 1e-10);
        let jump = tu.jump(0);
        let left = u.values()[g.left_index(0)];
        prop_assert!((jump - left / 2.0).abs() <= 1e-12 * (1.0 + jump.abs()));
    }

    #[test]
    fn larger_data_gives_larger_image(seed in any::<u64>(), bump in 0.0f64..2.0) {
        let spec = common::example_spec();
        let bigger = common::example_with("u^2 + t*(1-t)", "x/2");
        let g = spec.default_grid().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_cone_element(&g, &spec.cone, &mut rng).unwrap();
        let tu = Nystrom::new(&spec, Arc::clone(&g)).unwrap().apply(&u).unwrap();
        let tf = Nystrom::new(&bigger, Arc::clone(&g)).unwrap().apply(&u).unwrap();
        let v = u.map(|x| x + bump);
        let tv = Nystrom::new(&spec, Arc::clone(&g)).unwrap().apply(&v).unwrap();
        for i in 0..g.len() {
            prop_assert!(tf.values()[i] >= tu.values()[i] - 1e-12);
            prop_assert!(tv.values()[i] >= tu.values()[i] - 1e-12);
        }
    }
}
