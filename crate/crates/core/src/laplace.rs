//! The linear problem `Δ_g u = f` with Dirichlet data, its splitting into the
//! trace equation `(ω + dd^c u) ∧ ω^{n−1} = 0`, Hölder barriers at boundary
//! points and Hölder-modulus estimation.
//!
//! `Δ_g u = tr(g⁻¹ H(u))` uses the Hessian stencils of [`crate::forms`], so the
//! linearization of the Monge-Ampère operator and this operator agree.

use crate::error::{Error, Result};
use crate::forms::{hessian_at, GridFunction};
use crate::geometry::{GridDomain, HermitianMetricField, Point};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug)]
pub struct LinearOptions {
    /// Stop when no sweep moves a value by more than
    /// `tol_lin · (osc φ + sup |f|)` plus a rounding floor.
    pub tol_lin: f64,
    pub max_sweeps: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { tol_lin: 1e-8, max_sweeps: 500_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearStats {
    pub sweeps: usize,
    pub last_update: f64,
}

/// Over-relaxation factor tuned to the number of interior nodes per axis.
pub(crate) fn sor_factor(domain: &GridDomain) -> f64 {
    let m = domain.interior_nodes_on_axis().max(2) as f64;
    2.0 / (1.0 + (std::f64::consts::PI / m).sin())
}

/// `Δ_g u` at an interior node.
pub fn laplacian_at(domain: &GridDomain, g: &HermitianMetricField, u: &GridFunction, idx: usize) -> f64 {
    let gi = g.at(idx);
    let hess = hessian_at(domain, u, idx);
    gi.trace_against(&hess).unwrap_or(f64::NAN)
}

/// Solves `Δ_g u = f` at interior nodes with `u = φ` on boundary nodes by
/// lexicographic SOR.
pub fn solve_poisson(
    g: &HermitianMetricField,
    domain: &GridDomain,
    phi: &GridFunction,
    f: impl Fn(usize) -> f64,
    opts: LinearOptions,
) -> Result<(GridFunction, LinearStats)> {
    let h2 = domain.h() * domain.h();
    let mut u = GridFunction::zeros(domain);
    for &b in domain.boundary() {
        if !phi[b].is_finite() {
            return Err(Error::Config(format!("boundary datum at node {b} is not finite")));
        }
        u[b] = phi[b];
    }
    let start = if domain.boundary().is_empty() {
        0.0
    } else {
        domain.boundary().iter().map(|&b| phi[b]).sum::<f64>() / domain.boundary().len() as f64
    };
    let mut inv_trace = Vec::with_capacity(domain.interior().len());
    let mut rhs = Vec::with_capacity(domain.interior().len());
    let mut sup_f: f64 = 0.0;
    for &i in domain.interior() {
        u[i] = start;
        let gi = g.at(i);
        let inv = gi.inverse().ok_or(Error::InvalidMetric { node: i, lambda_min: gi.lambda_min() })?;
        inv_trace.push(1.0 / inv.trace());
        let fi = f(i);
        sup_f = sup_f.max(fi.abs());
        rhs.push(fi);
    }
    let sup_phi = domain.boundary().iter().map(|&b| phi[b].abs()).fold(0.0, f64::max);
    let tol = opts.tol_lin * (phi.boundary_osc(domain) + sup_f) + 1e-14 * (1.0 + sup_phi);
    let omega = sor_factor(domain);
    let mut last = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        last = 0.0;
        for (k, &i) in domain.interior().iter().enumerate() {
            let lap = laplacian_at(domain, g, &u, i);
            // Δ_g is affine in the center value with slope −tr(g⁻¹)/h²
            let delta = h2 * (lap - rhs[k]) * inv_trace[k];
            u[i] += omega * delta;
            last = last.max(delta.abs());
        }
        if !last.is_finite() {
            break;
        }
        if last <= tol {
            return Ok((u, LinearStats { sweeps: sweep, last_update: last }));
        }
    }
    Err(Error::IterationLimit { solver: "solve_poisson", iterations: opts.max_sweeps, residual: last })
}

/// `Δ_g u = 0` in the interior, `u = φ` on the boundary.
pub fn solve_laplace(g: &HermitianMetricField, domain: &GridDomain, phi: &GridFunction) -> Result<GridFunction> {
    solve_poisson(g, domain, phi, |_| 0.0, LinearOptions::default()).map(|r| r.0)
}

/// Solution of `(ω + dd^c u) ∧ ω^{n−1} = 0`, i.e. `Δ_g u = −n`, with trace
/// `φ`, assembled as `u₁ + u₂` from `Δ_g u₁ = 0` (trace `φ`) and
/// `Δ_g u₂ = −n` (trace 0).
pub fn solve_trace_equation(g: &HermitianMetricField, domain: &GridDomain, phi: &GridFunction) -> Result<GridFunction> {
    solve_trace_equation_with(g, domain, phi, LinearOptions::default())
}

pub fn solve_trace_equation_with(
    g: &HermitianMetricField,
    domain: &GridDomain,
    phi: &GridFunction,
    opts: LinearOptions,
) -> Result<GridFunction> {
    let n = domain.n() as f64;
    let (u1, _) = solve_poisson(g, domain, phi, |_| 0.0, opts)?;
    let zero = GridFunction::zeros(domain);
    let (u2, _) = solve_poisson(g, domain, &zero, |_| -n, opts)?;
    Ok(u1.zip_with(&u2, domain, |a, b| a + b))
}

/// Largest `|Δ_g u|` over interior nodes after subtracting `f`.
pub fn poisson_residual(u: &GridFunction, g: &HermitianMetricField, domain: &GridDomain, f: impl Fn(usize) -> f64) -> f64 {
    domain.interior().iter().map(|&i| (laplacian_at(domain, g, u, i) - f(i)).abs()).fold(0.0, f64::max)
}

/// Iterated harmonic lifts over a ball cover, starting from `start` (whose
/// boundary values must already equal `φ`). Each lift solves `Δ_g = 0` on the
/// sub-ball with the current values as Dirichlet data.
pub fn perron_laplace(
    g: &HermitianMetricField,
    domain: &GridDomain,
    start: &GridFunction,
    cover: &[(Point, f64)],
    tol: f64,
    max_rounds: usize,
) -> Result<(GridFunction, usize)> {
    let subs: Vec<GridDomain> = cover.iter().map(|&(c, r)| domain.sub_ball(c, r)).collect();
    let mut u = start.clone();
    let opts = LinearOptions { tol_lin: 1e-10, max_sweeps: 500_000 };
    for round in 1..=max_rounds {
        let mut change: f64 = 0.0;
        for sub in subs.iter().filter(|s| !s.interior().is_empty()) {
            let (lift, _) = solve_poisson(g, sub, &u, |_| 0.0, opts)?;
            for &i in sub.interior() {
                change = change.max((lift[i] - u[i]).abs());
                u[i] = lift[i];
            }
        }
        if change <= tol {
            return Ok((u, round));
        }
    }
    Err(Error::IterationLimit { solver: "perron_laplace", iterations: max_rounds, residual: f64::NAN })
}

/// Hölder-α seminorm of boundary data over pairs of projected boundary points.
pub fn boundary_hoelder_norm(phi: &GridFunction, alpha: f64, domain: &GridDomain) -> f64 {
    let pts: Vec<(Point, f64)> = domain
        .boundary()
        .iter()
        .map(|&b| (domain.project_to_boundary(&domain.point(b)), phi[b]))
        .collect();
    let mut best: f64 = 0.0;
    for (i, (p, a)) in pts.iter().enumerate() {
        for (q, b) in &pts[i + 1..] {
            let d = domain.distance(p, q);
            if d > 1e-12 {
                best = best.max((a - b).abs() / d.powf(alpha));
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug)]
pub struct BarrierOptions {
    /// Validity radius `R`; superharmonicity is checked on `B(ξ, R/2)`.
    pub radius: f64,
    /// Gradient threshold `ε₀` for `|∇ρ|_g`; `None` means `10⁻³ λ_min(g)^{1/2}`.
    pub eps0: Option<f64>,
    /// Hölder seminorm `c₁` of the data; `None` estimates it from the boundary.
    pub c1: Option<f64>,
    /// First nonzero rung of the doubling ladder for `k`.
    pub k_start: f64,
    /// Global cap on `k`, shared by every boundary point.
    pub k_max: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions { radius: 0.5, eps0: None, c1: None, k_start: 1.0 / 1024.0, k_max: (1u64 << 40) as f64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub base_node: usize,
    pub base_point: Point,
    pub alpha: f64,
    pub tau: f64,
    pub k: f64,
    pub c1: f64,
    pub radius: f64,
    /// Interior nodes of `B(ξ, R/2)` where superharmonicity was checked.
    pub neighborhood: Vec<usize>,
    /// Largest `Δ_g v` over the neighbourhood (≤ 0 up to rounding).
    pub max_laplacian: f64,
}

fn barrier_value(domain: &GridDomain, xi: &Point, phi_xi: f64, k: f64, c1: f64, alpha: f64, tau: f64, p: &Point) -> f64 {
    let rho = domain.local_defining_value(xi, p);
    k * rho.abs().powf(tau) + c1 * domain.distance(p, xi).powf(alpha) + phi_xi
}

fn gradient_norm(domain: &GridDomain, xi: &Point, g: &HermitianMetricField, node: usize) -> f64 {
    let eps = 1e-6;
    let mut sq = 0.0;
    for a in 0..domain.dim() {
        let mut p = *xi;
        let mut q = *xi;
        p[a] += eps;
        q[a] -= eps;
        let d = (domain.local_defining_value(xi, &p) - domain.local_defining_value(xi, &q)) / (2.0 * eps);
        sq += d * d;
    }
    // |∇ρ|_g ≥ |∇ρ| / λ_max(g)^{1/2}
    sq.sqrt() / g.at(node).lambda_max().sqrt()
}

/// Barrier `v = k|ρ|^τ + c₁|z − ξ|^α + φ(ξ)` at the boundary node `xi`, with the
/// smallest `k` on the doubling ladder `0, k_start, 2k_start, …` making
/// `Δ_g v ≤ 0` on the interior nodes of `B(ξ, R/2)`. Boundary nodes carry `φ`.
pub fn hoelder_barrier(
    xi: usize,
    phi: &GridFunction,
    alpha: f64,
    tau: f64,
    domain: &GridDomain,
    g: &HermitianMetricField,
    opts: &BarrierOptions,
) -> Result<(BarrierSpec, GridFunction)> {
    if !domain.is_boundary(xi) {
        return Err(Error::Barrier { node: xi, reason: "base node is not a boundary node".into() });
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(tau > 0.0 && tau <= alpha) {
        return Err(Error::Config(format!("barrier exponents need 0 < τ ≤ α < 1, got α = {alpha}, τ = {tau}")));
    }
    let c1 = match opts.c1 {
        Some(c) => c,
        None => boundary_hoelder_norm(phi, alpha, domain),
    };
    let xi_pt = domain.project_to_boundary(&domain.point(xi));
    let eps0 = opts.eps0.unwrap_or(1e-3 * g.lambda_min().max(0.0).sqrt());
    let grad = gradient_norm(domain, &xi_pt, g, xi);
    if grad < eps0 {
        return Err(Error::Barrier { node: xi, reason: format!("|∇ρ|_g = {grad:e} below ε₀ = {eps0:e}") });
    }
    let neighborhood: Vec<usize> = domain
        .interior()
        .iter()
        .copied()
        .filter(|&i| domain.distance(&domain.point(i), &xi_pt) < 0.5 * opts.radius)
        .collect();
    let phi_xi = phi[xi];
    let build = |k: f64| -> GridFunction {
        let mut v = GridFunction::from_fn(domain, |p| barrier_value(domain, &xi_pt, phi_xi, k, c1, alpha, tau, p));
        for &b in domain.boundary() {
            v[b] = phi[b];
        }
        v
    };
    let worst = |v: &GridFunction| -> f64 {
        neighborhood.iter().map(|&i| laplacian_at(domain, g, v, i)).fold(f64::NEG_INFINITY, f64::max)
    };
    let slack = |v: &GridFunction| 1e-10 * (1.0 + v.sup_norm(domain)) / (domain.h() * domain.h());
    let mut k = 0.0;
    loop {
        let v = build(k);
        let w = worst(&v);
        if w <= slack(&v) {
            let spec = BarrierSpec {
                base_node: xi,
                base_point: xi_pt,
                alpha,
                tau,
                k,
                c1,
                radius: opts.radius,
                neighborhood,
                max_laplacian: w.max(f64::NEG_INFINITY),
            };
            return Ok((spec, v));
        }
        k = if k == 0.0 { opts.k_start } else { 2.0 * k };
        if k > opts.k_max {
            return Err(Error::Barrier { node: xi, reason: format!("no k ≤ {:e} makes the barrier superharmonic", opts.k_max) });
        }
    }
}

#[derive(Clone, Debug)]
pub struct GlobalBarriers {
    pub upper: GridFunction,
    pub lower: GridFunction,
    /// The uniform `k` shared by all boundary points.
    pub k: f64,
    pub c1: f64,
}

fn upper_barrier(
    phi: &GridFunction,
    alpha: f64,
    domain: &GridDomain,
    g: &HermitianMetricField,
    opts: &BarrierOptions,
) -> Result<(GridFunction, f64, f64)> {
    let c1 = opts.c1.unwrap_or_else(|| boundary_hoelder_norm(phi, alpha, domain));
    let osc = phi.boundary_osc(domain);
    if osc == 0.0 {
        let c = domain.boundary().first().map(|&b| phi[b]).unwrap_or(0.0);
        return Ok((GridFunction::constant(domain, c), 0.0, c1));
    }
    let local = BarrierOptions { c1: Some(c1), ..*opts };
    let mut k: f64 = 0.0;
    for &xi in domain.boundary() {
        let (spec, _) = hoelder_barrier(xi, phi, alpha, alpha, domain, g, &local)?;
        k = k.max(spec.k);
    }
    let k1 = osc + 1.0;
    let half_r = 0.5 * opts.radius;
    let k2 = if c1 > 0.0 { (k1 / (c1 * half_r.powf(alpha))).max(1.0) } else { 1.0 };
    let top = phi.max_over(domain.boundary()) + 1.0;
    let mut ubar = GridFunction::constant(domain, top);
    for &xi in domain.boundary() {
        let xi_pt = domain.project_to_boundary(&domain.point(xi));
        let phi_xi = phi[xi];
        for &i in domain.interior() {
            let p = domain.point(i);
            if domain.distance(&p, &xi_pt) >= half_r {
                continue;
            }
            let v = barrier_value(domain, &xi_pt, phi_xi, k, c1, alpha, alpha, &p) - phi_xi;
            let cand = phi_xi + (k2 * v).min(k1);
            if cand < ubar[i] {
                ubar[i] = cand;
            }
        }
    }
    for &b in domain.boundary() {
        ubar[b] = phi[b];
    }
    Ok((ubar, k, c1))
}

/// Upper barrier `inf_ξ (φ(ξ) + min(K₁, k₂ (v_ξ − φ(ξ))))` with one uniform
/// `k`, and the lower barrier obtained from the upper barrier of `−φ`.
pub fn global_barrier(
    phi: &GridFunction,
    alpha: f64,
    domain: &GridDomain,
    g: &HermitianMetricField,
    opts: &BarrierOptions,
) -> Result<GlobalBarriers> {
    let (upper, k_up, c1) = upper_barrier(phi, alpha, domain, g, opts)?;
    let neg = phi.map(domain, |x| -x);
    let (neg_upper, k_lo, _) = upper_barrier(&neg, alpha, domain, g, opts)?;
    let lower = neg_upper.map(domain, |x| -x);
    Ok(GlobalBarriers { upper, lower, k: k_up.max(k_lo), c1 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoelderModulus {
    /// `max |u(x) − u(y)| / |x − y|^α` over the sampled pairs.
    pub interior: f64,
    /// Same, restricted to pairs with one endpoint on the boundary.
    pub boundary: f64,
    pub pairs: usize,
}

/// Hölder quotient of `u`. All pairs of active nodes are used when there are
/// at most 10⁵ of them; otherwise pairs along every axis at dyadic offsets
/// `2^j h`, which covers both the near-diagonal and the far regime.
pub fn hoelder_modulus(u: &GridFunction, alpha: f64, domain: &GridDomain) -> HoelderModulus {
    let active: Vec<usize> = domain.active().collect();
    let mut out = HoelderModulus { interior: 0.0, boundary: 0.0, pairs: 0 };
    let record = |i: usize, j: usize, out: &mut HoelderModulus| {
        let d = domain.distance(&domain.point(i), &domain.point(j));
        let q = (u[i] - u[j]).abs() / d.powf(alpha);
        out.interior = out.interior.max(q);
        if domain.is_boundary(i) || domain.is_boundary(j) {
            out.boundary = out.boundary.max(q);
        }
        out.pairs += 1;
    };
    if active.len() * (active.len() - 1) / 2 <= 100_000 {
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a + 1..] {
                record(i, j, &mut out);
            }
        }
        return out;
    }
    let max_steps = 2 * domain.interior_nodes_on_axis() + 4;
    for &i in &active {
        let mi = domain.multi_index(i);
        for a in 0..domain.dim() {
            let mut step = 1usize;
            while step <= max_steps {
                if mi[a] + step < domain.side() {
                    let j = domain.shifted(i, a, step as isize);
                    if domain.is_interior(j) || domain.is_boundary(j) {
                        record(i, j, &mut out);
                    }
                }
                step *= 2;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_ball_domain;

    #[test]
    fn harmonic_trace_is_reproduced() {
        let d = build_ball_domain(1.0, 0.05, 1).unwrap();
        let g = HermitianMetricField::identity(&d);
        let phi = GridFunction::from_fn_projected(&d, |p| p[0]);
        let u = solve_laplace(&g, &d, &phi).unwrap();
        let err = d.interior().iter().map(|&i| (u[i] - d.point(i)[0]).abs()).fold(0.0, f64::max);
        // boundary data sit at projected points, an O(h) offset from the nodes
        assert!(err < 0.05, "err {err}");
    }

    #[test]
    fn constant_data_give_constant_solution() {
        let d = build_ball_domain(1.0, 0.1, 1).unwrap();
        let g = HermitianMetricField::conformal_exp(&d, 0.7).unwrap();
        let phi = GridFunction::constant(&d, 1.0);
        let u = solve_laplace(&g, &d, &phi).unwrap();
        for i in d.active() {
            assert_eq!(u[i], 1.0);
        }
    }

    #[test]
    fn trace_equation_radial_solution() {
        // Δ u = 4 ∂∂̄ u in real terms; tr H(1 − |z|²) = −1 = −n
        let d = build_ball_domain(1.0, 0.05, 1).unwrap();
        let g = HermitianMetricField::identity(&d);
        let zero = GridFunction::zeros(&d);
        let u = solve_trace_equation(&g, &d, &zero).unwrap();
        let err = d
            .interior()
            .iter()
            .map(|&i| {
                let p = d.point(i);
                (u[i] - (1.0 - p[0] * p[0] - p[1] * p[1])).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 2.0 * 0.05 * 2.0_f64.sqrt(), "err {err}");
        assert!(poisson_residual(&u, &g, &d, |_| -1.0) < 1e-4);
    }

    #[test]
    fn maximum_principle() {
        let d = build_ball_domain(1.0, 0.1, 1).unwrap();
        let g = HermitianMetricField::conformal_exp(&d, 1.0).unwrap();
        let phi = GridFunction::from_fn_projected(&d, |p| (3.0 * p[1]).sin() + p[0] * p[0]);
        let u = solve_laplace(&g, &d, &phi).unwrap();
        let hi = phi.max_over(d.boundary());
        let lo = phi.min_over(d.boundary());
        for &i in d.interior() {
            assert!(u[i] <= hi + 1e-9 && u[i] >= lo - 1e-9);
        }
    }

    #[test]
    fn barrier_pins_base_value_and_is_superharmonic() {
        let d = build_ball_domain(1.0, 0.05, 1).unwrap();
        let g = HermitianMetricField::identity(&d);
        let phi = GridFunction::zeros(&d);
        let xi = d.boundary()[0];
        let (spec, v) = hoelder_barrier(xi, &phi, 0.5, 0.5, &d, &g, &BarrierOptions::default()).unwrap();
        assert_eq!(v[xi], phi[xi]);
        assert!(spec.max_laplacian <= 1e-6);
        assert_eq!(spec.k, 0.0);
    }

    #[test]
    fn modulus_of_constants_and_lipschitz_functions() {
        let d = build_ball_domain(1.0, 0.1, 1).unwrap();
        let c = GridFunction::constant(&d, 3.0);
        assert_eq!(hoelder_modulus(&c, 0.5, &d).interior, 0.0);
        let r = GridFunction::from_fn(&d, |p| (p[0] * p[0] + p[1] * p[1]).sqrt());
        let m = hoelder_modulus(&r, 1.0, &d).interior;
        assert!((m - 1.0).abs() < 0.1 + 1e-12, "{m}");
    }
}
