use hermitian_ma::laplace::{global_barrier, perron_laplace, solve_laplace, solve_trace_equation, BarrierOptions};
use hermitian_ma::masolver::{
    ball_cover, check_subsolution, defining_function_subsolution, lambda_limit_study, perron_solve, picard_solve,
    solve_fixed_rhs, solve_maximal, DirichletProblem, RhsFunction,
};
use hermitian_ma::verify::{manufactured_problem, random_smooth_measure};
use hermitian_ma::{build_ball_domain, GridDomain, GridFunction, HermitianMetricField, MeasureField, Point};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn r2(p: &Point, dim: usize) -> f64 {
    p[..dim].iter().map(|x| x * x).sum()
}

fn disc(h: f64) -> GridDomain {
    build_ball_domain(1.0, h, 1).unwrap()
}

fn sup_err(u: &GridFunction, d: &GridDomain, f: impl Fn(&Point) -> f64) -> f64 {
    d.active().map(|i| (u[i] - f(&d.point(i))).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn laplace_solution_obeys_the_maximum_principle(
        a in prop::array::uniform3(-1.0f64..1.0),
        c in 0.0f64..1.0,
    ) {
        let d = disc(1.0 / 16.0);
        let g = HermitianMetricField::conformal_exp(&d, c).unwrap();
        let phi = GridFunction::from_fn_projected(&d, |p| a[0] * p[0] + a[1] * (3.0 * p[1]).sin() + a[2] * p[0] * p[1]);
        let u = solve_laplace(&g, &d, &phi).unwrap();
        let (lo, hi) = (phi.min_over(d.boundary()), phi.max_over(d.boundary()));
        let slack = 1e-8 * (1.0 + hi - lo);
        for &i in d.interior() {
            prop_assert!(u[i] <= hi + slack && u[i] >= lo - slack);
        }
    }

    #[test]
    fn larger_measure_gives_smaller_solution(seed in 0u64..1000, factor in 1.0f64..3.0) {
        let d = disc(1.0 / 16.0);
        let g = HermitianMetricField::identity(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_smooth_measure(&mut rng, &d, 2).unwrap();
        let nu = mu.scaled_by(|_| factor);
        let phi = GridFunction::from_fn_projected(&d, |p| 0.3 * p[0]);
        let rhs = RhsFunction::constant(1.0).unwrap();
        let pm = DirichletProblem::new(d.clone(), g.clone(), mu, rhs.clone(), phi.clone()).unwrap();
        let pn = DirichletProblem::new(d.clone(), g, nu, rhs, phi).unwrap();
        let (u, _) = picard_solve(&pm).unwrap();
        let (v, _) = picard_solve(&pn).unwrap();
        let tol = pm.tol.tol_cmp.max(pn.tol.tol_cmp);
        for i in d.active() {
            prop_assert!(u[i] >= v[i] - tol, "node {i}: {} < {}", u[i], v[i]);
        }
    }
}

#[test]
fn doubling_the_measure_opens_an_interior_gap() {
    let d = disc(1.0 / 32.0);
    let g = HermitianMetricField::identity(&d);
    let p = manufactured_problem(&|p| r2(p, 2) - 1.0, RhsFunction::constant(1.0).unwrap(), &g, &d).unwrap();
    let doubled = DirichletProblem::new(d.clone(), g.clone(), p.mu.scaled_by(|_| 2.0), p.rhs.clone(), p.phi.clone()).unwrap();
    let (u, _) = picard_solve(&p).unwrap();
    let (v, _) = picard_solve(&doubled).unwrap();
    let centre = d.nearest_node(&[0.0; 4]);
    assert!(u[centre] - v[centre] > 0.05, "gap {}", u[centre] - v[centre]);
    assert!(d.active().all(|i| u[i] >= v[i] - p.tol.tol_cmp));
}

#[test]
fn trace_equation_dominates_solutions() {
    let d = disc(1.0 / 32.0);
    let g = HermitianMetricField::conformal_exp(&d, 0.5).unwrap();
    let phi = GridFunction::from_fn_projected(&d, |p| 0.2 * p[1]);
    let u0 = solve_trace_equation(&g, &d, &phi).unwrap();
    let mu = MeasureField::from_fn(&d, |p| 1.0 + p[0] * p[0]).unwrap();
    let (u, _) = solve_fixed_rhs(&g, &d, &mu, &phi, &hermitian_ma::Tolerances::for_problem(&d, &g, &phi, 2.0)).unwrap();
    let h = solve_maximal(&g, &d, &phi).unwrap();
    for i in d.active() {
        assert!(u[i] <= u0[i] + 1e-8 && u[i] <= h[i] + 1e-8);
    }
}

#[test]
fn harmonic_lifts_converge_to_the_laplace_solution() {
    let d = disc(1.0 / 16.0);
    let g = HermitianMetricField::identity(&d);
    let phi = GridFunction::from_fn_projected(&d, |p| p[0] * p[0] - p[1] * p[1] + 0.5 * p[1]);
    let direct = solve_laplace(&g, &d, &phi).unwrap();
    let start = GridFunction::constant(&d, phi.min_over(d.boundary())).with_boundary_of(&phi, &d);
    let (lifted, rounds) = perron_laplace(&g, &d, &start, &ball_cover(&d, 0.4, 0.25), 1e-9, 10_000).unwrap();
    assert!(rounds > 1);
    assert!(lifted.max_abs_diff_on(&direct, d.active()) < 1e-6);
}

#[test]
fn barriers_sandwich_the_harmonic_extension_of_linear_data() {
    let d = disc(1.0 / 32.0);
    let g = HermitianMetricField::identity(&d);
    let phi = GridFunction::from_fn_projected(&d, |p| p[0]);
    let u = solve_laplace(&g, &d, &phi).unwrap();
    for alpha in [0.3, 0.5, 0.8] {
        let b = global_barrier(&phi, alpha, &d, &g, &BarrierOptions::default()).unwrap();
        for i in d.active() {
            assert!(b.lower[i] <= u[i] + 1e-6 && u[i] <= b.upper[i] + 1e-6, "alpha {alpha} node {i}");
        }
    }
}

#[test]
fn exponential_manufactured_solution_is_recovered() {
    let h = 1.0 / 32.0;
    let d = disc(h);
    let g = HermitianMetricField::identity(&d);
    let exact = |p: &Point| r2(p, 2) - 1.0;
    let p = manufactured_problem(&exact, RhsFunction::exponential(1.0, 2.0).unwrap(), &g, &d).unwrap();
    // μ = e^{−u*} (ω + dd^c u*) = e^{1 − |z|²} · 2 · det(1 + 1)
    for &i in d.interior() {
        let want = 4.0 * (-exact(&d.point(i))).exp();
        assert!((p.mu.density()[i] - want).abs() < 1e-9 * want);
    }
    let (u, _) = picard_solve(&p).unwrap();
    assert!(sup_err(&u, &d, exact) <= 5.0 * h);
}

#[test]
fn perron_and_picard_agree_on_the_ball() {
    let d = disc(1.0 / 32.0);
    let g = HermitianMetricField::conformal_exp(&d, 0.3).unwrap();
    let p = manufactured_problem(&|p| r2(p, 2) - 1.0 + 0.2 * p[0], RhsFunction::exponential(0.5, 2.0).unwrap(), &g, &d).unwrap();
    let (a, _) = picard_solve(&p).unwrap();
    let (b, _) = perron_solve(&p, &ball_cover(&d, 0.4, 0.25)).unwrap();
    assert!(a.max_abs_diff_on(&b, d.active()) <= 2.0 * p.tol.tol_cmp);
}

#[test]
fn zero_data_short_circuit_to_the_maximal_function() {
    let d = disc(1.0 / 16.0);
    let g = HermitianMetricField::identity(&d);
    let phi = GridFunction::from_fn_projected(&d, |p| p[0] * p[1]);
    let h = solve_maximal(&g, &d, &phi).unwrap();
    let zero_mu = DirichletProblem::new(d.clone(), g.clone(), MeasureField::zero(&d), RhsFunction::constant(1.0).unwrap(), phi.clone()).unwrap();
    let mu = MeasureField::from_fn(&d, |_| 1.0).unwrap();
    let zero_f = DirichletProblem::new(d.clone(), g, mu, RhsFunction::constant(0.0).unwrap(), phi).unwrap();
    assert_eq!(picard_solve(&zero_mu).unwrap().0, h);
    assert_eq!(picard_solve(&zero_f).unwrap().0, h);
}

#[test]
fn defining_function_subsolution_is_certified() {
    let d = build_ball_domain(1.0, 0.2, 2).unwrap();
    let g = HermitianMetricField::conformal_exp(&d, 0.3).unwrap();
    let mu = MeasureField::from_fn(&d, |p| 10.0 + p[0]).unwrap();
    let phi = GridFunction::from_fn_projected(&d, |p| p[2]);
    let p = DirichletProblem::new(d, g, mu, RhsFunction::exponential(0.5, 3.0).unwrap(), phi).unwrap();
    let sub = defining_function_subsolution(&p).unwrap();
    assert!(check_subsolution(&sub, &p).holds);
}

#[test]
fn exponential_family_increases_with_lambda() {
    let d = disc(1.0 / 16.0);
    let g = HermitianMetricField::identity(&d);
    let p = manufactured_problem(&|p| r2(p, 2) - 1.0, RhsFunction::constant(1.0).unwrap(), &g, &d).unwrap();
    let study = lambda_limit_study(&p.mu, &p.phi, &g, &d, &[1.0, 0.5, 0.25, 0.1], p.subsolution.as_ref().unwrap()).unwrap();
    assert!(study.monotonicity_violation <= 100.0 * p.tol.tol_fix);
    for w in study.members.windows(2) {
        // members are ordered by decreasing λ
        assert!(d.active().all(|i| w[1][i] <= w[0][i] + 100.0 * p.tol.tol_fix));
    }
    assert!(study.limit_gap <= 2.0 * p.tol.tol_cmp);
}
