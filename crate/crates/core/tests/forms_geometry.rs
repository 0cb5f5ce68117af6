use hermitian_ma::forms::{ddc_hessian, is_omega_psh, ma_density, psh_envelope, EnvelopeOptions};
use hermitian_ma::geometry::{metric_bound_b, standard_defining_function};
use hermitian_ma::{build_ball_domain, build_shell_domain, GridDomain, GridFunction, HermitianMetricField, Point};
use num_complex::Complex64;
use proptest::prelude::*;

fn quad(q: &[[f64; 4]; 4], b: &[f64; 4], p: &Point) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        s += b[a] * p[a];
        for c in 0..4 {
            s += q[a][c] * p[a] * p[c];
        }
    }
    s
}

fn sym(entries: &[f64]) -> [[f64; 4]; 4] {
    let mut q = [[0.0; 4]; 4];
    let mut k = 0;
    for a in 0..4 {
        for c in a..4 {
            q[a][c] = entries[k];
            q[c][a] = entries[k];
            k += 1;
        }
    }
    q
}

/// `∂_j ∂̄_k u = ¼ (u_{x_j x_k} + u_{y_j y_k} + i (u_{x_j y_k} − u_{y_j x_k}))`
/// for the real Hessian `2Q` of `xᵀQx`.
fn expected_entry(q: &[[f64; 4]; 4], j: usize, k: usize) -> Complex64 {
    let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
    let d = |a: usize, c: usize| 2.0 * q[a][c];
    Complex64::new(0.25 * (d(xj, xk) + d(yj, yk)), 0.25 * (d(xj, yk) - d(yj, xk)))
}

fn domain2() -> GridDomain {
    build_ball_domain(1.0, 0.2, 2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn complex_hessian_is_exact_on_quadratics(
        entries in prop::collection::vec(-2.0f64..2.0, 10),
        linear in prop::array::uniform4(-1.0f64..1.0),
    ) {
        let d = domain2();
        let q = sym(&entries);
        let u = GridFunction::from_fn(&d, |p| quad(&q, &linear, p));
        let hess = ddc_hessian(&u, &d).unwrap();
        for &i in d.interior() {
            let m = hess.entries[i].unwrap();
            for j in 0..2 {
                for k in 0..2 {
                    let diff = m.entry(j, k) - expected_entry(&q, j, k);
                    prop_assert!(diff.norm() < 1e-9, "node {i} entry ({j},{k}) off by {}", diff.norm());
                }
            }
        }
    }

    #[test]
    fn density_ignores_pluriharmonic_terms(
        coeffs in prop::array::uniform6(-1.0f64..1.0),
        c in 0.0f64..0.8,
    ) {
        let d = domain2();
        let g = HermitianMetricField::conformal_exp(&d, c).unwrap();
        // Re(a z₁² + b z₁ z₂ + e z₂²) with complex a, b, e
        let ph = |p: &Point| {
            let z1 = Complex64::new(p[0], p[1]);
            let z2 = Complex64::new(p[2], p[3]);
            let a = Complex64::new(coeffs[0], coeffs[1]);
            let b = Complex64::new(coeffs[2], coeffs[3]);
            let e = Complex64::new(coeffs[4], coeffs[5]);
            (a * z1 * z1 + b * z1 * z2 + e * z2 * z2).re
        };
        let base = GridFunction::from_fn(&d, |p| p.iter().map(|x| x * x).sum::<f64>());
        let shifted = GridFunction::from_fn(&d, |p| p.iter().map(|x| x * x).sum::<f64>() + ph(p));
        let a = ma_density(&base, &g, &d);
        let b = ma_density(&shifted, &g, &d);
        for &i in d.interior() {
            prop_assert!((a.measure.density()[i] - b.measure.density()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn density_is_monotone_in_the_hessian(
        entries in prop::collection::vec(-0.3f64..0.3, 10),
        s in 0.0f64..2.0,
    ) {
        let d = domain2();
        let g = HermitianMetricField::identity(&d);
        let q = sym(&entries);
        let zero = [0.0; 4];
        let low = GridFunction::from_fn(&d, |p| quad(&q, &zero, p));
        let high = GridFunction::from_fn(&d, |p| quad(&q, &zero, p) + s * p.iter().map(|x| x * x).sum::<f64>());
        let cone_low = is_omega_psh(&low, &g, &d, 0.0);
        prop_assume!(cone_low.is_psh);
        let a = ma_density(&low, &g, &d).measure;
        let b = ma_density(&high, &g, &d).measure;
        for &i in d.interior() {
            prop_assert!(b.density()[i] >= a.density()[i] - 1e-10);
        }
    }

    #[test]
    fn envelope_is_a_monotone_psh_minorant(
        waves in prop::array::uniform3(-1.0f64..1.0),
        lift in 0.0f64..0.5,
    ) {
        let d = build_ball_domain(1.0, 0.125, 1).unwrap();
        let g = HermitianMetricField::identity(&d);
        let f = |p: &Point| waves[0] * (3.0 * p[0]).sin() + waves[1] * (2.0 * p[1]).cos() + waves[2] * p[0] * p[1];
        let lower = GridFunction::from_fn(&d, f);
        let upper = GridFunction::from_fn(&d, |p| f(p) + lift * (1.0 + p[0]) * (1.0 - p[0] * p[0] - p[1] * p[1]).max(0.0));
        let opts = EnvelopeOptions::for_function(&upper, &d);
        let env_lo = psh_envelope(&lower, &g, &d).unwrap();
        let env_hi = psh_envelope(&upper, &g, &d).unwrap();
        let slack = 100.0 * opts.tol_env;
        for i in d.active() {
            prop_assert!(env_lo[i] <= lower[i] + 1e-15);
            prop_assert!(env_hi[i] <= upper[i] + 1e-15);
            prop_assert!(env_lo[i] <= env_hi[i] + slack, "node {i}: {} > {}", env_lo[i], env_hi[i]);
        }
        let cone = is_omega_psh(&env_hi, &g, &d, 10.0 * opts.tol_env / (d.h() * d.h()));
        prop_assert!(cone.is_psh, "worst eigenvalue {}", cone.worst_eigenvalue);
    }
}

#[test]
fn disc_node_count_matches_area() {
    let h = 0.01;
    let d = build_ball_domain(1.0, h, 1).unwrap();
    let ratio = d.interior().len() as f64 / (std::f64::consts::PI / (h * h));
    assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
    // brute-force count of lattice points strictly inside the unit circle
    let m = (1.0 / h).ceil() as i64 + 1;
    let mut inside = 0usize;
    for a in -m..=m {
        for b in -m..=m {
            let (x, y) = (a as f64 * h, b as f64 * h);
            if x * x + y * y < 1.0 {
                inside += 1;
            }
        }
    }
    let active = d.interior().len() + d.boundary().len();
    assert!(d.interior().len() <= inside && inside <= active, "{} {inside} {active}", d.interior().len());
}

#[test]
fn thick_shell_in_c2_is_connected() {
    let d = build_shell_domain(0.5, 1.0, 0.1, 2).unwrap();
    assert!(d.interior_connected());
    assert_eq!(d.boundary_components(), 2);
}

#[test]
fn ball_defining_function_is_exact() {
    for (n, h) in [(1, 0.05), (2, 0.2)] {
        let d = build_ball_domain(1.0, h, n).unwrap();
        let rho = standard_defining_function(&d).unwrap();
        assert_eq!(rho.strict_psh_margin, 1.0);
        let hess = ddc_hessian(&rho.values, &d).unwrap();
        for &i in d.interior() {
            let m = hess.entries[i].unwrap();
            assert!(m.max_abs_diff(&hermitian_ma::Herm::identity(n)) < 1e-10);
            assert!(rho.values[i] < 0.0);
        }
    }
}

#[test]
fn torsion_constant_is_scale_free_for_kaehler_and_stable_for_conformal() {
    let coarse = build_ball_domain(1.0, 0.2, 2).unwrap();
    for s in [0.5, 1.0, 3.0] {
        let g = HermitianMetricField::scaled_identity(&coarse, s);
        assert_eq!(metric_bound_b(&g, &coarse).unwrap(), 0.0);
    }
    let (d1, d2) = (build_ball_domain(1.0, 0.1, 2).unwrap(), build_ball_domain(1.0, 0.05, 2).unwrap());
    let b1 = metric_bound_b(&HermitianMetricField::conformal_exp(&d1, 1.0).unwrap(), &d1).unwrap();
    let b2 = metric_bound_b(&HermitianMetricField::conformal_exp(&d2, 1.0).unwrap(), &d2).unwrap();
    assert!(b1.is_finite() && b1 > 0.0);
    assert!((b2 - b1).abs() <= 0.1 * b1, "B = {b1} then {b2}");
}
