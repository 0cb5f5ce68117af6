use hermitian_ma::capacity::{
    bt_capacity, check_e0_membership, check_local_domination, closed_ball_nodes, flat_mass, hessian_energy,
    relative_extremal, DominationOptions,
};
use hermitian_ma::forms::is_omega_psh;
use hermitian_ma::masolver::{ball_cover, RhsFunction};
use hermitian_ma::verify::{
    ball_average_gap, energy_inequality_test, local_cp_certificate, manufactured_problem, SmoothBump,
};
use hermitian_ma::{build_ball_domain, GridDomain, GridFunction, HermitianMetricField, MeasureField, Point};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn r2(p: &Point, dim: usize) -> f64 {
    p[..dim].iter().map(|x| x * x).sum()
}

fn disc(h: f64) -> GridDomain {
    build_ball_domain(1.0, h, 1).unwrap()
}

fn ball_set(d: &GridDomain, c: (f64, f64), r: f64) -> Vec<usize> {
    closed_ball_nodes(d, &[c.0, c.1, 0.0, 0.0], r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn capacity_is_monotone_under_inclusion(
        cx in -0.4f64..0.4, cy in -0.4f64..0.4, r_out in 0.15f64..0.45, shrink in 0.2f64..1.0,
    ) {
        let d = disc(1.0 / 16.0);
        let outer = ball_set(&d, (cx, cy), r_out);
        let inner = ball_set(&d, (cx, cy), shrink * r_out);
        prop_assume!(!outer.is_empty());
        let cf = bt_capacity(&outer, &d).unwrap().value;
        let ce = bt_capacity(&inner, &d).unwrap().value;
        prop_assert!(ce <= cf + 1e-6 * (1.0 + cf));
    }

    #[test]
    fn extremal_function_is_bounded_and_pinned(cx in -0.3f64..0.3, r in 0.1f64..0.4) {
        let d = disc(1.0 / 16.0);
        let set = ball_set(&d, (cx, 0.0), r);
        prop_assume!(!set.is_empty());
        let v = relative_extremal(&set, &d).unwrap();
        for i in d.active() {
            prop_assert!((-1.0..=0.0).contains(&v[i]));
        }
        for &i in &set {
            prop_assert_eq!(v[i], -1.0);
        }
    }

    #[test]
    fn capacity_is_subadditive(a in 0.1f64..0.25, b in 0.1f64..0.25) {
        let d = disc(1.0 / 16.0);
        let e1 = ball_set(&d, (-0.45, 0.0), a);
        let e2 = ball_set(&d, (0.45, 0.0), b);
        let union: Vec<usize> = e1.iter().chain(&e2).copied().collect();
        let c1 = bt_capacity(&e1, &d).unwrap().value;
        let c2 = bt_capacity(&e2, &d).unwrap().value;
        let cu = bt_capacity(&union, &d).unwrap().value;
        prop_assert!(cu <= c1 + c2 + 2e-6 * (1.0 + cu));
    }
}

#[test]
fn radial_extremal_function_and_capacity() {
    // v = max(log|z| / log(1/r), −1); dd^c log|z| has mass π/2 at 0 under
    // i∂∂̄, so the density 2·det gives cap = π / log(1/r)
    let h = 1.0 / 64.0;
    let d = disc(h);
    for r in [0.25, 0.5] {
        let est = bt_capacity(&closed_ball_nodes(&d, &[0.0; 4], r), &d).unwrap();
        let err = d
            .active()
            .map(|i| {
                let s = r2(&d.point(i), 2).sqrt().max(1e-300);
                (est.extremal[i] - (s.ln() / (1.0 / r).ln()).max(-1.0)).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 4.0 * h / r, "r = {r}: sup error {err}");
        let oracle = PI / (1.0 / r).ln();
        assert!((est.value - oracle).abs() <= 0.05 * oracle, "r = {r}: {} vs {oracle}", est.value);
    }
}

#[test]
fn extremal_function_cannot_be_raised() {
    let d = disc(1.0 / 16.0);
    let set = ball_set(&d, (0.1, 0.0), 0.3);
    let v = relative_extremal(&set, &d).unwrap();
    let flat = HermitianMetricField::zero(&d);
    for (k, &i) in d.interior().iter().enumerate().filter(|(k, _)| k % 7 == 0) {
        if set.contains(&i) {
            continue;
        }
        let mut w = v.clone();
        w[i] += 1e-3;
        let raised_past_zero = w[i] > 0.0;
        let cone = is_omega_psh(&w, &flat, &d, 1e-8);
        assert!(raised_past_zero || !cone.is_psh, "raising node {i} (#{k}) kept w admissible");
    }
}

#[test]
fn single_point_capacity_decreases_under_refinement_in_c2() {
    let mut caps = Vec::new();
    for h in [0.2, 1.0 / 6.0, 1.0 / 7.0] {
        let d = build_ball_domain(1.0, h, 2).unwrap();
        let origin = d.nearest_node(&[0.0; 4]);
        caps.push(bt_capacity(&[origin], &d).unwrap().value);
    }
    assert!(caps.windows(2).all(|w| w[1] < w[0]), "{caps:?}");
}

#[test]
fn defining_function_is_in_the_cegrell_class() {
    for (n, h) in [(1usize, 0.05), (2, 0.2)] {
        let d = build_ball_domain(1.0, h, n).unwrap();
        let v = GridFunction::from_fn(&d, |p| r2(p, 2 * n) - 1.0).with_boundary_of(&GridFunction::zeros(&d), &d);
        let report = check_e0_membership(&v, &d);
        assert!(report.member, "{report:?}");
        // 2^n n! on interior nodes whose stencil avoids the boundary layer
        let factor = if n == 1 { 2.0 } else { 8.0 };
        let deep = d.interior().iter().filter(|&&i| d.stencil_neighbors(i).iter().all(|&j| d.is_interior(j))).count();
        let lo = factor * d.cell_volume() * deep as f64;
        assert!(report.total_mass >= lo * (1.0 - 1e-12), "{} < {lo}", report.total_mass);
        assert_eq!(flat_mass(&v, &d), report.total_mass);
    }
}

#[test]
fn constant_density_is_dominated_with_the_arithmetic_coefficient() {
    let d = build_ball_domain(1.0, 0.2, 2).unwrap();
    let mu = MeasureField::from_fn(&d, |_| 32.0).unwrap();
    let report = check_local_domination(&mu, &d, &ball_cover(&d, 0.5, 0.5), DominationOptions::default());
    assert!(report.holds);
    for w in &report.witnesses {
        assert!((w.a - 2.0).abs() < 1e-12, "A = {}", w.a);
    }
}

#[test]
fn atom_beyond_the_cell_budget_needs_a_larger_witness() {
    let d = build_ball_domain(1.0, 0.1, 1).unwrap();
    let node = d.nearest_node(&[0.0; 4]);
    let cover = [([0.0; 4], 0.3)];
    let small = MeasureField::from_fn(&d, |_| 2.0).unwrap().with_atom(&d, node, 1e-3).unwrap();
    let large = MeasureField::from_fn(&d, |_| 2.0).unwrap().with_atom(&d, node, 1.0).unwrap();
    let opts = DominationOptions::default();
    let a_small = check_local_domination(&small, &d, &cover, opts).witnesses[0].a;
    let a_large = check_local_domination(&large, &d, &cover, opts).witnesses[0].a;
    assert!(a_large > a_small);
    let capped = check_local_domination(&large, &d, &cover, DominationOptions { a_max: 1.5 * a_small, ..opts });
    assert!(!capped.holds);
}

#[test]
fn top_hessian_energy_of_the_norm_square() {
    // n = 1: 4 ∫_D |z|² dV₂ = 4 · 2π ∫₀¹ r³ dr = 2π
    let d = disc(1.0 / 128.0);
    let g = HermitianMetricField::identity(&d);
    let u = GridFunction::from_fn(&d, |p| r2(p, 2));
    let e = hessian_energy(&u, &GridFunction::zeros(&d), 1, &g, &d).unwrap();
    assert!((e - 2.0 * PI).abs() < 0.05 * 2.0 * PI, "{e}");
    // n = 2: 32 ∫_B |z|² dV₄ = 32 · 2π² ∫₀¹ r⁵ dr = 32π²/3, approached from
    // below as the interior grows toward the ball
    let oracle = 32.0 * PI * PI / 3.0;
    let mut errors = Vec::new();
    for h in [0.2, 0.1, 0.05] {
        let d = build_ball_domain(1.0, h, 2).unwrap();
        let g = HermitianMetricField::identity(&d);
        let u = GridFunction::from_fn(&d, |p| r2(p, 4));
        let e = hessian_energy(&u, &GridFunction::zeros(&d), 2, &g, &d).unwrap();
        assert!(e < oracle);
        errors.push(oracle - e);
    }
    assert!(errors.windows(2).all(|w| w[1] < 0.75 * w[0]), "{errors:?}");
}

#[test]
fn manufactured_exponential_density() {
    let d = build_ball_domain(1.0, 0.2, 2).unwrap();
    let g = HermitianMetricField::identity(&d);
    for lambda in [0.5, 1.0] {
        let p = manufactured_problem(&|p| r2(p, 4), RhsFunction::exponential(lambda, 3.0).unwrap(), &g, &d).unwrap();
        for &i in d.interior() {
            let want = 32.0 * (-lambda * r2(&d.point(i), 4)).exp();
            assert!((p.mu.density()[i] - want).abs() < 1e-9 * want);
        }
    }
}

#[test]
fn certificate_constant_weakens_as_theta_grows() {
    let d = build_ball_domain(1.0, 0.2, 2).unwrap();
    let g = HermitianMetricField::conformal_exp(&d, 1.0).unwrap();
    let v = GridFunction::from_fn(&d, |p| r2(p, 4));
    let u = GridFunction::from_fn(&d, |p| r2(p, 4) + 0.3 * ((p[0] + 0.05).powi(2) + r2(&[0.0, p[1], p[2], p[3]], 4) - 0.25));
    let mut last = f64::INFINITY;
    for theta in [0.25, 0.5, 1.0] {
        let cert = local_cp_certificate(&u, &v, theta, &g, &d, 8);
        assert!(cert.precondition.is_none() && !cert.alarm);
        assert!(cert.fitted_cn <= last);
        last = cert.fitted_cn;
    }
}

#[test]
fn energy_inequality_holds_with_zero_constant_for_bumps() {
    let d = build_ball_domain(1.0, 0.1, 2).unwrap();
    let g = HermitianMetricField::identity(&d);
    let rho = GridFunction::from_fn(&d, |p| r2(p, 4) - 1.0);
    let u = GridFunction::from_fn(&d, |p| 0.5 * (r2(p, 4) - 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let b = SmoothBump::random(&mut rng, 4, 0.3, (0.2, 0.4), (0.5, 1.5));
        let v = GridFunction::from_fn(&d, |p| 0.5 * (r2(p, 4) - 1.0) + b.value(p, 4).powi(2));
        let rep = energy_inequality_test(&u, &v, &rho, &g, &d, 0.0).unwrap();
        assert!(rep.holds, "{rep:?}");
    }
    let above = u.map(&d, |x| x + 0.1);
    assert!(energy_inequality_test(&above, &u, &rho, &g, &d, 0.0).is_err());
}

#[test]
fn ball_averages_of_identical_fields_vanish() {
    let d = disc(1.0 / 16.0);
    let a: Vec<f64> = (0..d.len()).map(|i| (i as f64).sin()).collect();
    assert_eq!(ball_average_gap(&a, &a, &d, 0.2), 0.0);
    let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
    assert!((ball_average_gap(&a, &b, &d, 0.2) - 0.5).abs() < 1e-12);
}

