//! Executable certificates: quantitative local comparison, global comparison
//! and uniqueness, stability under weak convergence of the right-hand side,
//! the energy inequality in ℂ², and manufactured-problem generation.
//!
//! Every check recomputes densities from the functions it is handed.

use crate::capacity::{capacity_convergence, hessian_energy};
use crate::error::{Error, Result};
use crate::forms::{ma_density, ma_density_with_tol, mixed_density, GridFunction, MeasureField};
use crate::geometry::{GridDomain, HermitianMetricField, Point, Shape};
use crate::linalg::pairwise_sum;
use crate::masolver::{
    check_subsolution, exponential_cap, perron_solve, picard_solve, solve_coupled, DirichletProblem, RhsFunction,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Smooth compactly supported bump `a · exp(1 − 1/(1 − s²))`, `s = |z − c|/r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothBump {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
}

impl SmoothBump {
    pub fn value(&self, p: &Point, dim: usize) -> f64 {
        let s2: f64 = p[..dim].iter().zip(&self.center[..dim]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            / (self.radius * self.radius);
        if s2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - s2)).exp()
        }
    }

    /// Draws a bump with `|center| ≤ center_max` (uniform in a cube, then
    /// rejected), radius and amplitude uniform in the given ranges.
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, center_max: f64, radius: (f64, f64), amplitude: (f64, f64)) -> Self {
        let mut center = [0.0; 4];
        loop {
            for c in center.iter_mut().take(dim) {
                *c = rng.gen_range(-center_max..=center_max);
            }
            if center[..dim].iter().map(|x| x * x).sum::<f64>() <= center_max * center_max {
                break;
            }
        }
        SmoothBump {
            center,
            radius: rng.gen_range(radius.0..=radius.1),
            amplitude: rng.gen_range(amplitude.0..=amplitude.1),
        }
    }
}

/// Smooth positive density `c₀ + Σ bumps` on interior nodes.
pub fn random_smooth_measure(rng: &mut ChaCha8Rng, domain: &GridDomain, bumps: usize) -> Result<MeasureField> {
    let dim = domain.dim();
    let base = rng.gen_range(0.5..=2.0);
    let list: Vec<SmoothBump> = (0..bumps).map(|_| SmoothBump::random(rng, dim, 0.5, (0.2, 0.5), (0.5, 2.0))).collect();
    MeasureField::from_fn(domain, |p| base + list.iter().map(|b| b.value(p, dim)).sum::<f64>())
}

/// `ν = μ + Σ bumps`, so that `μ ≤ ν` node-wise.
pub fn random_dominating_measure(rng: &mut ChaCha8Rng, mu: &MeasureField, domain: &GridDomain, bumps: usize) -> Result<MeasureField> {
    let dim = domain.dim();
    let list: Vec<SmoothBump> = (0..bumps).map(|_| SmoothBump::random(rng, dim, 0.5, (0.2, 0.5), (0.5, 2.0))).collect();
    let extra = MeasureField::from_fn(domain, |p| list.iter().map(|b| b.value(p, dim)).sum::<f64>())?;
    Ok(mu.add(&extra))
}

/// Smooth boundary data `Σ aₖ xₖ + b sin(π x₁)` evaluated at projected points.
pub fn random_boundary_data(rng: &mut ChaCha8Rng, domain: &GridDomain) -> GridFunction {
    let dim = domain.dim();
    let mut coef = [0.0; 4];
    for c in coef.iter_mut().take(dim) {
        *c = rng.gen_range(-0.5..=0.5);
    }
    let wave = rng.gen_range(-0.3..=0.3);
    GridFunction::from_fn_projected(domain, |p| {
        (0..dim).map(|k| coef[k] * p[k]).sum::<f64>() + wave * (std::f64::consts::PI * p[0]).sin()
    })
}

/// A comparison pair sharing `φ`, `F` and the metric: `μ` smooth and random,
/// `ν = μ` when `equal`, otherwise `μ` plus extra bumps. `F` is constant one
/// when `lambda` is `None`, otherwise `e^{λt}` capped above the maximal function.
pub fn random_comparison_pair(
    rng: &mut ChaCha8Rng,
    domain: &GridDomain,
    g: &HermitianMetricField,
    lambda: Option<f64>,
    equal: bool,
) -> Result<(DirichletProblem, DirichletProblem)> {
    let mu = random_smooth_measure(rng, domain, 3)?;
    let nu = if equal { mu.clone() } else { random_dominating_measure(rng, &mu, domain, 2)? };
    let phi = random_boundary_data(rng, domain);
    let rhs = match lambda {
        None => RhsFunction::constant(1.0)?,
        Some(l) => {
            let base = DirichletProblem::new(domain.clone(), g.clone(), mu.clone(), RhsFunction::constant(1.0)?, phi.clone())?;
            RhsFunction::exponential(l, exponential_cap(g, domain, &phi, &base.tol)?)?
        }
    };
    let a = DirichletProblem::new(domain.clone(), g.clone(), mu, rhs.clone(), phi.clone())?;
    let b = DirichletProblem::new(domain.clone(), g.clone(), nu, rhs, phi)?;
    Ok((a, b))
}

/// A psh function vanishing on the whole analytic boundary with `H ⪰ I`:
/// `|z|² − R²` on balls, `|z|² + a log|z| + b` on planar shells.
pub fn zero_trace_psh(domain: &GridDomain) -> Option<GridFunction> {
    let dim = domain.dim();
    match domain.shape() {
        Shape::Ball { radius } => {
            Some(GridFunction::from_fn(domain, |p| p[..dim].iter().map(|x| x * x).sum::<f64>() - radius * radius))
        }
        Shape::Shell { r_in, r_out } if domain.n() == 1 => {
            let a = -(r_out * r_out - r_in * r_in) / (r_out / r_in).ln();
            let b = -r_out * r_out - a * r_out.ln();
            Some(GridFunction::from_fn(domain, |p| {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                r * r + a * r.ln() + b
            }))
        }
        _ => None,
    }
}

/// Manufactured data for an exact `u*`: `μ = ma(u*) / F(u*)` (0/0 read as 0),
/// `φ = u*` at projected boundary points, and a subsolution `u* + Aψ` with
/// [`zero_trace_psh`] `ψ` when one can be certified.
pub fn manufactured_problem(
    u_star: &dyn Fn(&Point) -> f64,
    rhs: RhsFunction,
    g: &HermitianMetricField,
    domain: &GridDomain,
) -> Result<DirichletProblem> {
    let exact = GridFunction::from_fn(domain, u_star);
    let ma = ma_density(&exact, g, domain);
    if let Some(&node) = ma.non_psh.first() {
        return Err(Error::Generation { node, reason: "u* is not ω-psh here".into() });
    }
    let tol_f = 1e-12;
    let floor = 1e-10 * (1.0 + ma.measure.sup_density());
    let mut density = vec![0.0; domain.len()];
    for &i in domain.interior() {
        let d = ma.measure.density()[i];
        let f = rhs.evaluate(exact[i], i);
        if d > floor {
            if f < tol_f {
                return Err(Error::Generation { node: i, reason: format!("F(u*) = {f:e} with density {d:e}") });
            }
            density[i] = d / f;
        }
    }
    let mu = MeasureField::from_density(domain, density)?;
    let phi = GridFunction::from_fn_projected(domain, u_star);
    let problem = DirichletProblem::new(domain.clone(), g.clone(), mu, rhs, phi)?;
    Ok(match manufactured_subsolution(&problem, u_star) {
        Some(sub) => problem.with_subsolution(sub),
        None => problem,
    })
}

/// `u* + Aψ` with boundary nodes set to `φ`; `A` starts at twice the ratio of
/// boundary slopes of `u*` and `ψ` and doubles until the check passes.
pub fn manufactured_subsolution(problem: &DirichletProblem, u_star: &dyn Fn(&Point) -> f64) -> Option<GridFunction> {
    let domain = &problem.domain;
    let psi = zero_trace_psh(domain)?;
    let mut slope_u: f64 = 0.0;
    let mut slope_psi = f64::INFINITY;
    for &b in domain.boundary() {
        let p = domain.point(b);
        let q = domain.project_to_boundary(&p);
        let d = domain.distance(&p, &q);
        if d > 1e-12 {
            slope_u = slope_u.max((u_star(&q) - u_star(&p)).abs() / d);
            slope_psi = slope_psi.min(-psi[b] / d);
        }
    }
    let mut a = if slope_psi.is_finite() && slope_psi > 0.0 { 2.0 * slope_u / slope_psi } else { 0.0 } + 1e-3;
    for _ in 0..16 {
        let mut sub = GridFunction::from_fn(domain, u_star);
        for i in domain.active() {
            sub[i] += a * psi[i];
        }
        for &b in domain.boundary() {
            sub[b] = problem.phi[b];
        }
        if check_subsolution(&sub, problem).holds {
            return Some(sub);
        }
        a *= 2.0;
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonOutcome {
    pub passed: bool,
    /// `max (v − u)` over active nodes, `u` solving with `μ ≤ ν` and `v` with `ν`.
    pub max_violation: f64,
    pub tol: f64,
    #[serde(skip)]
    pub u: GridFunction,
    #[serde(skip)]
    pub v: GridFunction,
}

/// Solves the `μ`- and `ν`-problems (same `φ`, `F`, metric) and checks
/// `u ≥ v − tol_cmp` node-wise.
pub fn comparison_test(mu_problem: &DirichletProblem, nu_problem: &DirichletProblem) -> Result<ComparisonOutcome> {
    let domain = &mu_problem.domain;
    if !mu_problem.mu.dominated_by(&nu_problem.mu) {
        return Err(Error::Precondition("comparison needs μ ≤ ν node-wise".into()));
    }
    let gap = mu_problem.phi.max_abs_diff_on(&nu_problem.phi, domain.boundary().iter().copied());
    if gap > 0.0 || mu_problem.rhs != nu_problem.rhs {
        return Err(Error::Precondition("comparison needs equal boundary data and F".into()));
    }
    let (u, _) = picard_solve(mu_problem)?;
    let (v, _) = picard_solve(nu_problem)?;
    let max_violation = domain.active().map(|i| v[i] - u[i]).fold(f64::NEG_INFINITY, f64::max);
    let tol = mu_problem.tol.tol_cmp.max(nu_problem.tol.tol_cmp);
    Ok(ComparisonOutcome { passed: max_violation <= tol, max_violation, tol, u, v })
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessOutcome {
    pub passed: bool,
    pub gap: f64,
    pub tol: f64,
}

/// Picard from above against Perron from the subsolution on the same problem.
pub fn uniqueness_test(problem: &DirichletProblem, cover: &[(Point, f64)]) -> Result<UniquenessOutcome> {
    let (a, _) = picard_solve(problem)?;
    let (b, _) = perron_solve(problem, cover)?;
    let gap = a.max_abs_diff_on(&b, problem.domain.active());
    let tol = problem.tol.tol_cmp;
    Ok(UniquenessOutcome { passed: gap <= tol, gap, tol })
}

/// Largest `|mean_B (a − b)|` over balls of radius `r` centered at interior
/// nodes whose ball stays in the interior; the grid stand-in for testing
/// against continuous compactly supported functions.
pub fn ball_average_gap(a: &[f64], b: &[f64], domain: &GridDomain, r: f64) -> f64 {
    let h = domain.h();
    let reach = (r / h).floor() as isize;
    let dim = domain.dim();
    let side = domain.side() as isize;
    let span = (2 * reach + 1) as usize;
    let mut offsets: Vec<[isize; 4]> = Vec::new();
    for code in 0..span.pow(dim as u32) {
        let mut c = code;
        let mut k = [0isize; 4];
        for slot in k.iter_mut().take(dim) {
            *slot = (c % span) as isize - reach;
            c /= span;
        }
        let r2: isize = k.iter().map(|x| x * x).sum();
        if (r2 as f64) * h * h <= r * r * (1.0 + 1e-12) {
            offsets.push(k);
        }
    }
    let mut worst: f64 = 0.0;
    let mut diff = Vec::with_capacity(offsets.len());
    'node: for &i in domain.interior() {
        let mi = domain.multi_index(i);
        diff.clear();
        for k in &offsets {
            let mut j = 0isize;
            for axis in 0..dim {
                let m = mi[axis] as isize + k[axis];
                if m < 0 || m >= side {
                    continue 'node;
                }
                j += m * domain.stride(axis) as isize;
            }
            let j = j as usize;
            if !domain.is_interior(j) {
                continue 'node;
            }
            diff.push(a[j] - b[j]);
        }
        worst = worst.max((pairwise_sum(&diff) / diff.len() as f64).abs());
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    /// `sup |u_j − u|` against the solution `u` for the limit multiplier.
    pub sup_to_limit: Vec<f64>,
    /// `sup |u_{j+1} − u_j|`.
    pub cauchy: Vec<f64>,
    /// Ball-averaged gap between `ma(u_j)` and `f μ`.
    pub averaged_residual: Vec<f64>,
    /// Node-wise density residual of the limit solution.
    pub limit_residual: f64,
    pub capacities: Vec<f64>,
    /// `energies[j][k]`: the `k`-th Hessian energy of `(u_j, u)`.
    pub energies: Vec<Vec<f64>>,
    pub epsilon: f64,
}

/// Solves `(ω + dd^c u_j)^n = f_j μ` and `(ω + dd^c u)^n = f μ` with common
/// data and records how `u_j → u` shows up in sup-norm, averaged densities,
/// capacity of `{|u_j − u| > ε}` and the Hessian energies. `ε` defaults to half
/// of `sup |u_1 − u|`.
pub fn stability_test(
    f_seq: &[GridFunction],
    f_limit: &GridFunction,
    mu_base: &MeasureField,
    phi: &GridFunction,
    g: &HermitianMetricField,
    domain: &GridDomain,
    epsilon: Option<f64>,
) -> Result<StabilityReport> {
    let check = |f: &GridFunction| -> Result<()> {
        if domain.interior().iter().any(|&i| !(f[i] >= 0.0 && f[i] <= 1.0)) {
            return Err(Error::Precondition("stability multipliers must lie in [0, 1]".into()));
        }
        Ok(())
    };
    check(f_limit)?;
    let scaled = |f: &GridFunction| -> Result<MeasureField> {
        let d: Vec<f64> = (0..domain.len()).map(|i| if domain.is_interior(i) { f[i] * mu_base.density()[i] } else { 0.0 }).collect();
        MeasureField::from_density(domain, d)
    };
    let solve = |mu: MeasureField| -> Result<GridFunction> {
        let p = DirichletProblem::new(domain.clone(), g.clone(), mu, RhsFunction::constant(1.0)?, phi.clone())?;
        solve_coupled(&p, None).map(|r| r.0)
    };
    let limit_mu = scaled(f_limit)?;
    let u = solve(limit_mu.clone())?;
    let mut sols = Vec::with_capacity(f_seq.len());
    for f in f_seq {
        check(f)?;
        sols.push(solve(scaled(f)?)?);
    }
    let sup_to_limit: Vec<f64> = sols.iter().map(|s| s.max_abs_diff_on(&u, domain.active())).collect();
    let cauchy = sols.windows(2).map(|w| w[1].max_abs_diff_on(&w[0], domain.active())).collect();
    let r = 4.0 * domain.h();
    let averaged_residual = sols
        .iter()
        .map(|s| ball_average_gap(ma_density(s, g, domain).measure.density(), limit_mu.density(), domain, r))
        .collect();
    let lim_density = ma_density(&u, g, domain).measure;
    let limit_residual = domain
        .interior()
        .iter()
        .map(|&i| (lim_density.density()[i] - limit_mu.density()[i]).abs())
        .fold(0.0, f64::max);
    let epsilon = epsilon.unwrap_or(0.5 * sup_to_limit.first().copied().unwrap_or(0.0));
    let capacities = capacity_convergence(&sols, &u, epsilon, domain)?;
    let mut energies = Vec::with_capacity(sols.len());
    for s in &sols {
        let row: Result<Vec<f64>> = (0..=domain.n()).map(|k| hessian_energy(s, &u, k, g, domain)).collect();
        energies.push(row?);
    }
    Ok(StabilityReport { sup_to_limit, cauchy, averaged_residual, limit_residual, capacities, energies, epsilon })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyTerms {
    /// `∫ (v − u)³ (dd^c ρ)²`.
    pub lhs: f64,
    /// `∫ (v − u) ω_u²`.
    pub t1: f64,
    /// `∫ (v − u)² ω²`.
    pub t2: f64,
    /// `(∫ (v − u) ω_u ∧ ω)^{1/2} (∫ (v − u)² ω²)^{1/2}`.
    pub e: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub terms: EnergyTerms,
    pub c: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

/// The four integrals of the ℂ² energy inequality. Requires `n = 2`,
/// `u ≤ v`, `u = v` on a collar of width `3h` at the boundary, and a psh
/// `−1 ≤ ρ ≤ 0`.
pub fn energy_terms(u: &GridFunction, v: &GridFunction, rho: &GridFunction, g: &HermitianMetricField, domain: &GridDomain) -> Result<EnergyTerms> {
    if domain.n() != 2 {
        return Err(Error::Precondition("the energy inequality is stated in complex dimension 2".into()));
    }
    let tol = 1e-12 * (1.0 + u.sup_norm(domain));
    for i in domain.active() {
        if u[i] > v[i] + tol {
            return Err(Error::Precondition(format!("u > v at node {i}")));
        }
        if domain.boundary_distance(i) <= 3.0 * domain.h() && (u[i] - v[i]).abs() > tol {
            return Err(Error::Precondition(format!("u ≠ v in the boundary collar at node {i}")));
        }
        if !(rho[i] >= -1.0 - 1e-12 && rho[i] <= 1e-12) {
            return Err(Error::Precondition(format!("ρ outside [−1, 0] at node {i}")));
        }
    }
    let flat = HermitianMetricField::zero(domain);
    let rho_ma = ma_density_with_tol(rho, &flat, domain, 1e-8);
    if !rho_ma.non_psh.is_empty() {
        return Err(Error::Precondition("ρ is not psh".into()));
    }
    let omega_u = ma_density(u, g, domain).measure;
    let mixed = mixed_density(u, 1, g, domain)?;
    let volume = mixed_density(u, 0, g, domain)?;
    let integral = |f: &dyn Fn(usize) -> f64| -> f64 {
        let terms: Vec<f64> = domain.interior().iter().map(|&i| f(i)).collect();
        domain.cell_volume() * pairwise_sum(&terms)
    };
    let w = |i: usize| v[i] - u[i];
    let lhs = integral(&|i| w(i).powi(3) * rho_ma.measure.density()[i]);
    let t1 = integral(&|i| w(i) * omega_u.density()[i]);
    let t2 = integral(&|i| w(i).powi(2) * volume.density()[i]);
    let m1 = integral(&|i| w(i) * mixed.density()[i]);
    Ok(EnergyTerms { lhs, t1, t2, e: m1.max(0.0).sqrt() * t2.max(0.0).sqrt() })
}

/// Checks `lhs ≤ 6 t1 + C t2 + C e` for a frozen `C`.
pub fn energy_inequality_test(
    u: &GridFunction,
    v: &GridFunction,
    rho: &GridFunction,
    g: &HermitianMetricField,
    domain: &GridDomain,
    c: f64,
) -> Result<EnergyReport> {
    let terms = energy_terms(u, v, rho, g, domain)?;
    let rhs = 6.0 * terms.t1 + c * terms.t2 + c * terms.e;
    let margin = rhs - terms.lhs;
    Ok(EnergyReport { terms, c, rhs, margin, holds: margin >= 0.0 })
}

/// Smallest `C ≥ 0` making every calibration pair satisfy the inequality,
/// doubled so that the frozen constant keeps a margin.
pub fn calibrate_energy_constant(
    pairs: &[(GridFunction, GridFunction)],
    rho: &GridFunction,
    g: &HermitianMetricField,
    domain: &GridDomain,
) -> Result<f64> {
    let mut c: f64 = 0.0;
    for (u, v) in pairs {
        let t = energy_terms(u, v, rho, g, domain)?;
        let denom = t.t2 + t.e;
        if denom > 0.0 {
            c = c.max((t.lhs - 6.0 * t.t1) / denom);
        }
    }
    Ok(2.0 * c.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateLevel {
    pub s: f64,
    pub nodes: usize,
    /// Mass of `ω_v^n` on `U(s)`.
    pub mass_v: f64,
    /// Mass of `ω_u^n` on `U(s)`.
    pub mass_u: f64,
    /// Smallest `C_n` for which this level passes (`∞` if none does).
    pub required_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonCertificate {
    pub theta: f64,
    pub s0: f64,
    pub theta0: f64,
    pub torsion_bound: f64,
    pub levels: Vec<CertificateLevel>,
    pub fitted_cn: f64,
    /// Some level needs `C_n > 10⁶` (or no finite value).
    pub alarm: bool,
    /// Why the hypotheses fail, when they do; the certificate is then empty.
    pub precondition: Option<String>,
}

/// Probes `∫_{U(s)} ω_v^n ≤ (1 + s B C_n / θ^n) ∫_{U(s)} ω_u^n` on
/// `U(s) = {u < v + s₀ + s}`, `s₀ = −sup(v − u)`, at `levels` evenly spaced
/// `s ∈ (0, θ₀)`, `θ₀ = min(θ^n / 16B, |s₀|)`, and fits the smallest `C_n`.
pub fn local_cp_certificate(
    u: &GridFunction,
    v: &GridFunction,
    theta: f64,
    g: &HermitianMetricField,
    domain: &GridDomain,
    levels: usize,
) -> ComparisonCertificate {
    let n = domain.n() as i32;
    let b = g.torsion_bound();
    let sup = domain.active().map(|i| v[i] - u[i]).fold(f64::NEG_INFINITY, f64::max);
    let s0 = -sup;
    let mut cert = ComparisonCertificate {
        theta,
        s0,
        theta0: 0.0,
        torsion_bound: b,
        levels: Vec::new(),
        fitted_cn: 0.0,
        alarm: false,
        precondition: None,
    };
    let tol = 1e-10 * (1.0 + u.sup_norm(domain) + v.sup_norm(domain));
    if let Some(&bnode) = domain.boundary().iter().find(|&&i| u[i] < v[i] - tol) {
        cert.precondition = Some(format!("u < v at boundary node {bnode}"));
        return cert;
    }
    if !(sup > 0.0) {
        cert.precondition = Some("sup(v − u) ≤ 0: nothing to compare".into());
        return cert;
    }
    for &i in domain.interior() {
        let m = g.at(i) + crate::forms::hessian_at(domain, v, i);
        if m.lambda_min_relative(&g.at(i)) < theta - 1e-9 {
            cert.precondition = Some(format!("ω + dd^c v ⪰ θω fails at node {i}"));
            return cert;
        }
    }
    let theta_n = theta.powi(n);
    let theta0 = if b > 0.0 { (theta_n / (16.0 * b)).min(s0.abs()) } else { s0.abs() };
    cert.theta0 = theta0;
    let ma_u = ma_density(u, g, domain).measure;
    let ma_v = ma_density(v, g, domain).measure;
    let mut fitted: f64 = 0.0;
    for k in 1..=levels {
        let s = theta0 * k as f64 / (levels + 1) as f64;
        let set: Vec<usize> = domain.interior().iter().copied().filter(|&i| u[i] < v[i] + s0 + s).collect();
        let mass_v = ma_v.mass_on(&set);
        let mass_u = ma_u.mass_on(&set);
        let slack = 1e-12 * mass_u.max(mass_v).max(1e-300);
        let required_c = if mass_v <= mass_u + slack {
            0.0
        } else if b > 0.0 && mass_u > 0.0 {
            (mass_v / mass_u - 1.0) * theta_n / (s * b)
        } else {
            f64::INFINITY
        };
        fitted = fitted.max(required_c);
        cert.levels.push(CertificateLevel { s, nodes: set.len(), mass_v, mass_u, required_c });
    }
    cert.fitted_cn = fitted;
    cert.alarm = !(fitted <= 1e6);
    cert
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_ball_domain;
    use rand::SeedableRng;

    fn r2(p: &Point, dim: usize) -> f64 {
        p[..dim].iter().map(|x| x * x).sum()
    }

    #[test]
    fn manufactured_density_of_norm_squared() {
        let d = build_ball_domain(1.0, 0.2, 2).unwrap();
        let g = HermitianMetricField::identity(&d);
        let p = manufactured_problem(&|p| r2(p, 4), RhsFunction::constant(1.0).unwrap(), &g, &d).unwrap();
        for &i in d.interior() {
            assert!((p.mu.density()[i] - 32.0).abs() < 1e-9);
        }
        let lambda = 0.5;
        let p = manufactured_problem(&|p| r2(p, 4), RhsFunction::exponential(lambda, 10.0).unwrap(), &g, &d).unwrap();
        for &i in d.interior() {
            let expected = 32.0 * (-lambda * r2(&d.point(i), 4)).exp();
            assert!((p.mu.density()[i] - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn maximal_u_star_with_zero_rhs_gives_zero_measure() {
        let d = build_ball_domain(1.0, 0.1, 1).unwrap();
        let g = HermitianMetricField::identity(&d);
        let p = manufactured_problem(&|p| 1.0 - r2(p, 2), RhsFunction::constant(0.0).unwrap(), &g, &d).unwrap();
        assert_eq!(p.mu.total_mass(&d), 0.0);
    }

    #[test]
    fn vacuous_certificate_when_u_dominates() {
        let d = build_ball_domain(1.0, 0.2, 2).unwrap();
        let g = HermitianMetricField::identity(&d);
        let v = GridFunction::from_fn(&d, |p| r2(p, 4));
        let u = v.map(&d, |x| x + 1.0);
        let cert = local_cp_certificate(&u, &v, 0.5, &g, &d, 8);
        assert!(cert.levels.is_empty() && cert.precondition.is_some());
    }

    #[test]
    fn smooth_bump_vanishes_outside_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = SmoothBump::random(&mut rng, 4, 0.3, (0.2, 0.4), (0.5, 1.0));
        let far = [2.0, 0.0, 0.0, 0.0];
        assert_eq!(b.value(&far, 4), 0.0);
        assert!((b.value(&b.center, 4) - b.amplitude).abs() < 1e-15);
    }
}
