//! Monge-Ampère Dirichlet solvers.
//!
//! Every solver is built on one kernel: nonlinear Gauss-Seidel over the
//! interior nodes in lexicographic order, where each center value is the
//! unique root of the scalar monotone map
//! `c ↦ 2^n n! det(g + H(u)) − F(c) μ` on the cone side `c ≤ c + h² λ_min`.
//! For a frozen right-hand side the root has a closed form; for `F(u, z) μ`
//! it is found by a safeguarded Illinois iteration inside an explicit bracket.

use crate::error::{Error, Result};
use crate::forms::{form_at, is_omega_psh, ma_density_with_tol, GridFunction, MeasureField};
use crate::geometry::{GridDomain, HermitianMetricField, Point, Shape};
use crate::laplace::{solve_trace_equation_with, sor_factor, LinearOptions};
use crate::linalg::{volume_factor, Herm};
use crate::tolerances::Tolerances;
use serde::{Deserialize, Serialize};

/// Shape of the nonlinearity `F(t, z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RhsKind {
    Constant { value: f64 },
    /// `e^{λ min(t, t_max)}`: the cap keeps `F` bounded.
    Exponential { lambda: f64, t_max: f64 },
    /// Piecewise-linear in `t` through `(knots[i], values[i])`, constant
    /// outside the knot range.
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

/// Bounded, nonnegative, non-decreasing and continuous nonlinearity `F(t, z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhsFunction {
    kind: RhsKind,
    bound: f64,
}

impl RhsFunction {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::Config(format!("constant F must be finite and nonnegative, got {value}")));
        }
        Ok(RhsFunction { kind: RhsKind::Constant { value }, bound: value })
    }

    pub fn exponential(lambda: f64, t_max: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() || !t_max.is_finite() {
            return Err(Error::Config(format!("exponential F needs λ ≥ 0 and finite cap, got λ = {lambda}")));
        }
        Ok(RhsFunction { kind: RhsKind::Exponential { lambda, t_max }, bound: (lambda * t_max).exp() })
    }

    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::Config("tabulated F needs equally many knots and values".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("tabulated F knots must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("tabulated F values must be finite, nonnegative and non-decreasing".into()));
        }
        let bound = *values.last().unwrap();
        Ok(RhsFunction { kind: RhsKind::Tabulated { knots, values }, bound })
    }

    pub fn kind(&self) -> &RhsKind {
        &self.kind
    }

    /// `M_F = sup F`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        self.bound == 0.0
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, RhsKind::Constant { .. })
    }

    pub fn evaluate(&self, t: f64, _node: usize) -> f64 {
        match &self.kind {
            RhsKind::Constant { value } => *value,
            RhsKind::Exponential { lambda, t_max } => (lambda * t.min(*t_max)).exp(),
            RhsKind::Tabulated { knots, values } => {
                if t <= knots[0] {
                    return values[0];
                }
                let last = knots.len() - 1;
                if t >= knots[last] {
                    return values[last];
                }
                let j = knots.partition_point(|&k| k <= t);
                let (t0, t1) = (knots[j - 1], knots[j]);
                let s = (t - t0) / (t1 - t0);
                values[j - 1] + s * (values[j] - values[j - 1])
            }
        }
    }

    /// Samples at least 100 ordered pairs `t₁ < t₂` on `[lo, hi]` and checks
    /// `0 ≤ F(t₁) ≤ F(t₂) ≤ M_F`.
    pub fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        let m = 101;
        let ts: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
        for w in ts.windows(2) {
            let (a, b) = (self.evaluate(w[0], 0), self.evaluate(w[1], 0));
            if !(a >= 0.0) || b < a || b > self.bound * (1.0 + 1e-12) {
                return Err(Error::Config(format!("F fails monotonicity or bounds between t = {} and {}", w[0], w[1])));
            }
        }
        Ok(())
    }
}

/// `(ω + dd^c u)^n = F(u, z) μ` in the interior, `u = φ` on boundary nodes.
#[derive(Clone, Debug)]
pub struct DirichletProblem {
    pub domain: GridDomain,
    pub g: HermitianMetricField,
    pub mu: MeasureField,
    pub rhs: RhsFunction,
    pub phi: GridFunction,
    pub subsolution: Option<GridFunction>,
    pub tol: Tolerances,
}

impl DirichletProblem {
    pub fn new(
        domain: GridDomain,
        g: HermitianMetricField,
        mu: MeasureField,
        rhs: RhsFunction,
        phi: GridFunction,
    ) -> Result<Self> {
        for &b in domain.boundary() {
            if !phi[b].is_finite() {
                return Err(Error::Config(format!("boundary datum at node {b} is not finite")));
            }
        }
        let sup_density = rhs.bound() * mu.effective_density().iter().copied().fold(0.0, f64::max);
        let tol = Tolerances::for_problem(&domain, &g, &phi, sup_density);
        Ok(DirichletProblem { domain, g, mu, rhs, phi, subsolution: None, tol })
    }

    pub fn with_subsolution(mut self, sub: GridFunction) -> Self {
        self.subsolution = Some(sub);
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// `F(u, ·) μ` as a density, atoms smeared over their cells.
    pub fn target_density(&self, u: &GridFunction) -> Vec<f64> {
        let eff = self.mu.effective_density();
        let mut out = vec![0.0; eff.len()];
        for &i in self.domain.interior() {
            if eff[i] > 0.0 {
                out[i] = self.rhs.evaluate(u[i], i) * eff[i];
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_update: f64,
    /// `|mass(ω_u^n) − mass(F(u)μ)|`, recomputed from the returned function.
    pub mass_residual: f64,
    /// Node-wise sup of the density residual at atom-free interior nodes.
    pub sup_residual: f64,
    pub sandwich_violations: usize,
    pub converged: bool,
    /// Outer update sizes (Picard steps or Perron rounds).
    pub history: Vec<f64>,
    /// Mann damping factor in effect when the Picard iteration stopped.
    pub damping: f64,
}

/// Root `t ≤ λ_min(m)` of `det(m − tI) = q` for `q ≥ 0`.
pub(crate) fn center_shift(m: &Herm, q: f64) -> f64 {
    if m.dim() == 1 {
        return m.a - q;
    }
    let mid = 0.5 * (m.a + m.d);
    let delta2 = 0.25 * (m.a - m.d).powi(2) + m.b.norm_sqr();
    mid - (delta2 + q).sqrt()
}

fn det_shifted(m: &Herm, t: f64) -> f64 {
    m.shift(-t).det()
}

pub(crate) enum Target<'a> {
    Density(&'a [f64]),
    Coupled { rhs: &'a RhsFunction, mu: &'a [f64] },
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct SweepOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct SweepStats {
    pub sweeps: usize,
    pub last_update: f64,
}

/// Illinois iteration on a decreasing `f` with `f(lo) ≥ 0 ≥ f(hi)`.
fn illinois(mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut side = 0i8;
    for _ in 0..200 {
        if fa == 0.0 {
            return a;
        }
        if fb == 0.0 {
            return b;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        if (b - a).abs() <= 4.0 * f64::EPSILON * (1.0 + a.abs() + b.abs()) || !c.is_finite() {
            return 0.5 * (a + b);
        }
        let fc = f(c);
        if fc < 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else if fc > 0.0 {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            return c;
        }
    }
    0.5 * (a + b)
}

/// New center value at `idx` solving the node equation exactly.
fn node_solve(domain: &GridDomain, g: &HermitianMetricField, u: &GridFunction, idx: usize, target: &Target, h2: f64) -> Result<(f64, f64)> {
    let factor = volume_factor(domain.n());
    let c = u[idx];
    let m0 = form_at(domain, g, u, idx);
    let c_hi = c + h2 * m0.lambda_min();
    let new = match target {
        Target::Density(nu) => c + h2 * center_shift(&m0, nu[idx] / factor),
        Target::Coupled { rhs, mu } => {
            let mi = mu[idx];
            if mi == 0.0 {
                c_hi
            } else {
                let q_max = rhs.bound() * mi / factor;
                let c_lo = c + h2 * center_shift(&m0, q_max);
                let f = |x: f64| factor * det_shifted(&m0, (x - c) / h2) - rhs.evaluate(x, idx) * mi;
                let (f_lo, f_hi) = (f(c_lo), f(c_hi));
                let scale = q_max + m0.eigenvalues().1.abs().powi(domain.n() as i32);
                if !(f_lo >= -1e-9 * factor * scale) || !(f_hi <= 0.0) {
                    return Err(Error::BracketFailure {
                        node: idx,
                        reason: format!("f(lo) = {f_lo:e}, f(hi) = {f_hi:e}"),
                    });
                }
                illinois(c_lo, f_lo.max(0.0), c_hi, f_hi, f)
            }
        }
    };
    if !new.is_finite() {
        return Err(Error::BracketFailure { node: idx, reason: "non-finite center value".into() });
    }
    Ok((new, c_hi))
}

/// Relaxed nonlinear Gauss-Seidel on the interior of `domain`; boundary values
/// of `u` are left untouched.
pub(crate) fn gauss_seidel(
    domain: &GridDomain,
    g: &HermitianMetricField,
    u: &mut GridFunction,
    target: &Target,
    opts: SweepOptions,
    solver: &'static str,
) -> Result<SweepStats> {
    let h2 = domain.h() * domain.h();
    let mut last = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        last = 0.0;
        for &i in domain.interior() {
            let c = u[i];
            let (exact, cone) = node_solve(domain, g, u, i, target, h2)?;
            let relaxed = (c + opts.omega * (exact - c)).min(cone.max(exact));
            u[i] = relaxed;
            last = last.max((exact - c).abs());
        }
        if last <= opts.tol {
            return Ok(SweepStats { sweeps: sweep, last_update: last });
        }
    }
    Err(Error::IterationLimit { solver, iterations: opts.max_sweeps, residual: last })
}

pub(crate) fn sweep_options(domain: &GridDomain, tol: &Tolerances) -> SweepOptions {
    let opt = sor_factor(domain);
    SweepOptions { tol: tol.tol_sweep(), max_sweeps: tol.max_sweeps, omega: 1.0 + 0.9 * (opt - 1.0) }
}

fn linear_options(tol: &Tolerances) -> LinearOptions {
    LinearOptions { tol_lin: tol.tol_lin.min(1e-9), max_sweeps: tol.max_sweeps.max(1000) }
}

/// Density residuals of `u` against `target` (atom nodes excluded from the
/// node-wise sup, included in the mass comparison).
pub fn ma_residuals(u: &GridFunction, g: &HermitianMetricField, domain: &GridDomain, target: &[f64], atoms: &[(usize, f64)], tol_cone: f64) -> (f64, f64) {
    let ma = ma_density_with_tol(u, g, domain, tol_cone).measure;
    let dens = ma.density();
    let mut sup: f64 = 0.0;
    let mut diff = Vec::with_capacity(domain.interior().len());
    for &i in domain.interior() {
        diff.push(dens[i] - target[i]);
        if !atoms.iter().any(|a| a.0 == i) {
            sup = sup.max((dens[i] - target[i]).abs());
        }
    }
    let mass = domain.cell_volume() * crate::linalg::pairwise_sum(&diff);
    (mass.abs(), sup)
}

fn with_boundary(domain: &GridDomain, start: &GridFunction, phi: &GridFunction) -> GridFunction {
    let mut u = start.clone();
    for &b in domain.boundary() {
        u[b] = phi[b];
    }
    u
}

/// Solution of `(ω + dd^c w)^n = ν`, `w = φ` on the boundary, for a fixed
/// measure `ν` (atoms enter as `mass / h^{2n}`).
pub fn solve_fixed_rhs(
    g: &HermitianMetricField,
    domain: &GridDomain,
    nu: &MeasureField,
    phi: &GridFunction,
    tol: &Tolerances,
) -> Result<(GridFunction, SolveReport)> {
    let start = solve_trace_equation_with(g, domain, phi, linear_options(tol))?;
    solve_fixed_rhs_from(g, domain, nu, phi, tol, &start)
}

/// As [`solve_fixed_rhs`], warm-started from `start`.
pub fn solve_fixed_rhs_from(
    g: &HermitianMetricField,
    domain: &GridDomain,
    nu: &MeasureField,
    phi: &GridFunction,
    tol: &Tolerances,
    start: &GridFunction,
) -> Result<(GridFunction, SolveReport)> {
    let density = nu.effective_density();
    let mut u = with_boundary(domain, start, phi);
    let stats = gauss_seidel(domain, g, &mut u, &Target::Density(&density), sweep_options(domain, tol), "solve_fixed_rhs")?;
    let (mass_residual, sup_residual) = ma_residuals(&u, g, domain, &density, nu.atoms(), tol.tol_cone);
    Ok((
        u,
        SolveReport {
            iterations: stats.sweeps,
            final_update: stats.last_update,
            mass_residual,
            sup_residual,
            converged: true,
            damping: 1.0,
            ..Default::default()
        },
    ))
}

/// Maximal ω-psh function with trace `φ`: `(ω + dd^c h)^n = 0`.
pub fn solve_maximal(g: &HermitianMetricField, domain: &GridDomain, phi: &GridFunction) -> Result<GridFunction> {
    let tol = Tolerances::for_problem(domain, g, phi, 0.0);
    solve_maximal_with(g, domain, phi, &tol)
}

pub fn solve_maximal_with(g: &HermitianMetricField, domain: &GridDomain, phi: &GridFunction, tol: &Tolerances) -> Result<GridFunction> {
    let zero = MeasureField::zero(domain);
    solve_fixed_rhs(g, domain, &zero, phi, tol).map(|r| r.0)
}

/// Direct solve of the coupled equation `(ω + dd^c u)^n = F(u) μ` by
/// Gauss-Seidel with the per-node root of the nonlinear scalar equation.
pub fn solve_coupled(problem: &DirichletProblem, start: Option<&GridFunction>) -> Result<(GridFunction, SolveReport)> {
    let DirichletProblem { domain, g, phi, tol, .. } = problem;
    let mut u = match start {
        Some(s) => with_boundary(domain, s, phi),
        None => solve_trace_equation_with(g, domain, phi, linear_options(tol))?,
    };
    let eff = problem.mu.effective_density();
    let target = Target::Coupled { rhs: &problem.rhs, mu: &eff };
    let stats = gauss_seidel(domain, g, &mut u, &target, sweep_options(domain, tol), "solve_coupled")?;
    let report = finish_report(problem, &u, stats.sweeps, stats.last_update, Vec::new(), 1.0);
    Ok((u, report))
}

fn finish_report(problem: &DirichletProblem, u: &GridFunction, iterations: usize, final_update: f64, history: Vec<f64>, damping: f64) -> SolveReport {
    let target = problem.target_density(u);
    let (mass_residual, sup_residual) =
        ma_residuals(u, &problem.g, &problem.domain, &target, problem.mu.atoms(), problem.tol.tol_cone);
    SolveReport {
        iterations,
        final_update,
        mass_residual,
        sup_residual,
        sandwich_violations: 0,
        converged: true,
        history,
        damping,
    }
}

/// Counts nodes where `lower − tol ≤ u ≤ upper + tol` fails.
pub fn sandwich_violations(u: &GridFunction, lower: Option<&GridFunction>, upper: Option<&GridFunction>, domain: &GridDomain, tol: f64) -> usize {
    domain
        .active()
        .filter(|&i| lower.is_some_and(|l| u[i] < l[i] - tol) || upper.is_some_and(|h| u[i] > h[i] + tol))
        .count()
}

/// Iterates the map `T`: `u₀ = h` (maximal), `u_{k+1}` solves
/// `(ω + dd^c u_{k+1})^n = F(u_k) μ`.
///
/// `T` is order-reversing, so with no damping the iterates bracket the
/// solution: `u₀ ≥ u₂ ≥ … ≥ u ≥ … ≥ u₃ ≥ u₁`, which is asserted at every step.
/// If a step fails to shrink, the iteration switches to Mann averaging
/// `u ← (1 − β) u + β T(u)`, halving `β`, and the bracket check is dropped.
pub fn picard_solve(problem: &DirichletProblem) -> Result<(GridFunction, SolveReport)> {
    let DirichletProblem { domain, g, phi, tol, .. } = problem;
    let h = solve_maximal_with(g, domain, phi, tol)?;
    if problem.rhs.is_zero() || problem.mu.total_mass(domain) == 0.0 {
        let report = finish_report(problem, &h, 1, 0.0, vec![0.0], 1.0);
        return Ok((h, report));
    }
    let sweep = sweep_options(domain, tol);
    let mut iterates: Vec<GridFunction> = vec![h.clone()];
    let mut history = Vec::new();
    let mut beta: f64 = 1.0;
    let mut current = h.clone();
    let mut prev_step = f64::INFINITY;
    for k in 0..tol.max_outer {
        let nu = problem.target_density(&current);
        let mut next = current.clone();
        gauss_seidel(domain, g, &mut next, &Target::Density(&nu), sweep, "picard_solve")?;
        let step = next.max_abs_diff_on(&current, domain.interior().iter().copied());
        if beta < 1.0 {
            next = current.zip_with(&next, domain, |a, b| (1.0 - beta) * a + beta * b);
        }
        history.push(step);
        if beta == 1.0 {
            iterates.push(next.clone());
            check_bracket(&iterates, domain, tol.tol_cmp.min(100.0 * tol.tol_fix))?;
        }
        if step <= tol.tol_fix {
            let mut report = finish_report(problem, &next, k + 1, step, history, beta);
            report.sandwich_violations =
                sandwich_violations(&next, problem.subsolution.as_ref(), Some(&h), domain, tol.tol_cmp);
            return Ok((next, report));
        }
        if step >= 0.95 * prev_step && k >= 2 {
            beta = (beta * 0.5).max(1.0 / 64.0);
            iterates.clear();
        }
        prev_step = step;
        current = next;
    }
    Err(Error::IterationLimit { solver: "picard_solve", iterations: tol.max_outer, residual: prev_step })
}

fn check_bracket(iterates: &[GridFunction], domain: &GridDomain, tol: f64) -> Result<()> {
    let k = iterates.len() - 1;
    if k < 2 {
        if k == 1 {
            // u₁ ≤ u₀
            check_le(&iterates[1], &iterates[0], domain, tol, "picard odd/even order")?;
        }
        return Ok(());
    }
    let (new, older) = (&iterates[k], &iterates[k - 2]);
    if k.is_multiple_of(2) {
        check_le(new, older, domain, tol, "picard even iterates non-increasing")?;
        check_le(&iterates[k - 1], new, domain, tol, "picard odd/even order")
    } else {
        check_le(older, new, domain, tol, "picard odd iterates non-decreasing")?;
        check_le(new, &iterates[k - 1], domain, tol, "picard odd/even order")
    }
}

fn check_le(a: &GridFunction, b: &GridFunction, domain: &GridDomain, tol: f64, what: &'static str) -> Result<()> {
    for &i in domain.interior() {
        if a[i] > b[i] + tol {
            return Err(Error::Monotonicity { what, node: i, amount: a[i] - b[i] });
        }
    }
    Ok(())
}

/// Coordinate balls of the given radius with centers on a cubic lattice of
/// the given spacing, kept when they contain at least one interior node.
pub fn ball_cover(domain: &GridDomain, radius: f64, spacing: f64) -> Vec<(Point, f64)> {
    let dim = domain.dim();
    let extent = domain.point(domain.len() - 1)[0];
    let m = (extent / spacing).ceil() as i64;
    let count = (2 * m + 1) as usize;
    let mut out = Vec::new();
    let total = count.pow(dim as u32);
    for code in 0..total {
        let mut c = code;
        let mut center = [0.0; 4];
        for slot in center.iter_mut().take(dim) {
            *slot = ((c % count) as i64 - m) as f64 * spacing;
            c /= count;
        }
        if domain.interior().iter().any(|&i| domain.distance(&domain.point(i), &center) < radius) {
            out.push((center, radius));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsolutionReport {
    pub holds: bool,
    pub is_psh: bool,
    pub worst_eigenvalue: f64,
    pub boundary_defect: f64,
    /// `max (F(ū)μ − ma(ū))` over interior nodes.
    pub density_defect: f64,
    pub worst_node: Option<usize>,
}

/// `ū` is ω-psh, matches `φ` on the boundary within `tol_b` and satisfies
/// `ma(ū) ≥ F(ū) μ − tol_ma` node-wise.
pub fn check_subsolution(sub: &GridFunction, problem: &DirichletProblem) -> SubsolutionReport {
    let DirichletProblem { domain, g, phi, tol, .. } = problem;
    let cone = is_omega_psh(sub, g, domain, tol.tol_cone);
    let boundary_defect = sub.max_abs_diff_on(phi, domain.boundary().iter().copied());
    let ma = ma_density_with_tol(sub, g, domain, tol.tol_cone).measure;
    let target = problem.target_density(sub);
    let mut density_defect = f64::NEG_INFINITY;
    let mut worst_node = cone.worst_node;
    for &i in domain.interior() {
        let d = target[i] - ma.density()[i];
        if d > density_defect {
            density_defect = d;
            if d > tol.tol_ma {
                worst_node = Some(i);
            }
        }
    }
    let holds = cone.is_psh && boundary_defect <= tol.tol_b && density_defect <= tol.tol_ma;
    SubsolutionReport {
        holds,
        is_psh: cone.is_psh,
        worst_eigenvalue: cone.worst_eigenvalue,
        boundary_defect,
        density_defect,
        worst_node,
    }
}

/// `ū = h + A (|z|² − R²)` on a ball, with `A` just above
/// `(M_F sup μ / 2^n n!)^{1/n}`, doubled until [`check_subsolution`] passes.
pub fn defining_function_subsolution(problem: &DirichletProblem) -> Result<GridFunction> {
    let DirichletProblem { domain, g, phi, tol, .. } = problem;
    let Shape::Ball { radius } = domain.shape() else {
        return Err(Error::Unsupported("defining-function subsolutions need a ball domain".into()));
    };
    let h = solve_maximal_with(g, domain, phi, tol)?;
    let sup_mu = problem.mu.effective_density().iter().copied().fold(0.0, f64::max);
    let n = domain.n() as f64;
    let mut a = 1.01 * (problem.rhs.bound() * sup_mu / volume_factor(domain.n())).powf(1.0 / n) + 1e-6;
    for _ in 0..20 {
        let mut sub = GridFunction::from_fn(domain, |p| {
            a * (p[..domain.dim()].iter().map(|x| x * x).sum::<f64>() - radius * radius)
        });
        for i in domain.active() {
            sub[i] += h[i];
        }
        for &b in domain.boundary() {
            sub[b] = phi[b];
        }
        if check_subsolution(&sub, problem).holds {
            return Ok(sub);
        }
        a *= 2.0;
    }
    Err(Error::Precondition("no defining-function subsolution found".into()))
}

/// Perron envelope by local lifts: start at the subsolution and replace `u`
/// on each ball of the cover by the exact local solution with the current
/// values as ball-boundary data, sweeping the cover until a round moves no
/// node by more than `10⁻² tol_cmp`; a global sweep from that iterate then
/// settles the last digits.
///
/// Lifts are solved to `10⁻²` of the hand-off threshold and the iterate is
/// the node-wise max of the old values and the lift, so it never decreases.
/// A lift that would lower a node by more than ten times its tolerance plus
/// `100 tol_fix` (plus `h²` for `n = 2`, whose mixed stencil is not monotone)
/// is an error.
pub fn perron_solve(problem: &DirichletProblem, cover: &[(Point, f64)]) -> Result<(GridFunction, SolveReport)> {
    let DirichletProblem { domain, g, phi, tol, .. } = problem;
    let Some(sub) = problem.subsolution.as_ref() else {
        return Err(Error::Precondition("perron_solve needs a subsolution".into()));
    };
    let check = check_subsolution(sub, problem);
    if !check.holds {
        return Err(Error::Precondition(format!(
            "supplied function is not a subsolution (psh: {}, boundary defect {:e}, density defect {:e} at {:?})",
            check.is_psh, check.boundary_defect, check.density_defect, check.worst_node
        )));
    }
    let subs: Vec<GridDomain> = cover
        .iter()
        .map(|&(c, r)| domain.sub_ball(c, r))
        .filter(|s| !s.interior().is_empty())
        .collect();
    let mut covered = vec![false; domain.len()];
    for s in &subs {
        for &i in s.interior() {
            covered[i] = true;
        }
    }
    if let Some(&i) = domain.interior().iter().find(|&&i| !covered[i]) {
        return Err(Error::Precondition(format!("ball cover misses interior node {i}")));
    }
    let eff = problem.mu.effective_density();
    let target = Target::Coupled { rhs: &problem.rhs, mu: &eff };
    let mut u = with_boundary(domain, sub, phi);
    let mut history = Vec::new();
    let h = domain.h();
    let handoff = 1e-2 * tol.tol_cmp;
    let lift_tol = tol.tol_sweep().max(1e-2 * handoff);
    let decrease_tol = 100.0 * tol.tol_fix + 10.0 * lift_tol + if domain.n() == 2 { h * h } else { 0.0 };
    for round in 1..=tol.max_outer {
        let mut change: f64 = 0.0;
        for s in &subs {
            let before: Vec<f64> = s.interior().iter().map(|&i| u[i]).collect();
            let mut opts = sweep_options(s, tol);
            opts.tol = lift_tol;
            gauss_seidel(s, g, &mut u, &target, opts, "perron_solve")?;
            for (k, &i) in s.interior().iter().enumerate() {
                let d = u[i] - before[k];
                if d < -decrease_tol {
                    return Err(Error::Monotonicity { what: "perron lift decreased u", node: i, amount: -d });
                }
                if d < 0.0 {
                    u[i] = before[k];
                }
                change = change.max(d);
            }
        }
        history.push(change);
        if change <= handoff.max(tol.tol_fix) {
            let stats = gauss_seidel(domain, g, &mut u, &target, sweep_options(domain, tol), "perron_solve")?;
            history.push(stats.last_update);
            let mut report = finish_report(problem, &u, round, change, history, 1.0);
            report.sandwich_violations = sandwich_violations(&u, Some(sub), None, domain, tol.tol_cmp);
            return Ok((u, report));
        }
    }
    Err(Error::IterationLimit { solver: "perron_solve", iterations: tol.max_outer, residual: *history.last().unwrap_or(&f64::NAN) })
}

#[derive(Clone, Debug)]
pub struct ExponentialSolution {
    pub solution: GridFunction,
    pub report: SolveReport,
    /// Sup-distance between the Picard and the Perron answers.
    pub uniqueness_gap: f64,
}

/// Cap for the exponential nonlinearity: the sup of the maximal function
/// (which bounds every solution from above) plus one.
pub fn exponential_cap(g: &HermitianMetricField, domain: &GridDomain, phi: &GridFunction, tol: &Tolerances) -> Result<f64> {
    let h = solve_maximal_with(g, domain, phi, tol)?;
    let top = domain.active().map(|i| h[i]).fold(f64::NEG_INFINITY, f64::max);
    Ok(top + 1.0)
}

/// `(ω + dd^c u)^n = e^{λu} μ`, solved by [`picard_solve`] from above and by
/// [`perron_solve`] from a subsolution; the two must agree within `tol_cmp`.
pub fn solve_exponential(
    lambda: f64,
    mu: &MeasureField,
    phi: &GridFunction,
    g: &HermitianMetricField,
    domain: &GridDomain,
    subsolution: Option<&GridFunction>,
    cover: &[(Point, f64)],
) -> Result<ExponentialSolution> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("λ must be positive, got {lambda}")));
    }
    let base = DirichletProblem::new(domain.clone(), g.clone(), mu.clone(), RhsFunction::constant(1.0)?, phi.clone())?;
    let cap = exponential_cap(g, domain, phi, &base.tol)?;
    let mut problem = DirichletProblem::new(domain.clone(), g.clone(), mu.clone(), RhsFunction::exponential(lambda, cap)?, phi.clone())?;
    let (above, report) = picard_solve(&problem)?;
    if mu.total_mass(domain) == 0.0 {
        return Ok(ExponentialSolution { solution: above, report, uniqueness_gap: 0.0 });
    }
    let sub = match subsolution {
        Some(s) => s.clone(),
        None => defining_function_subsolution(&problem)?,
    };
    problem = problem.with_subsolution(sub);
    let (below, _) = perron_solve(&problem, cover)?;
    let gap = above.max_abs_diff_on(&below, domain.active());
    if gap > problem.tol.tol_cmp {
        return Err(Error::Disagreement { what: "exponential: picard vs perron", gap, tol: problem.tol.tol_cmp });
    }
    Ok(ExponentialSolution { solution: above, report, uniqueness_gap: gap })
}

#[derive(Clone, Debug)]
pub struct LambdaStudy {
    /// Shift `b = sup ū`; every member has boundary data `φ − b`.
    pub shift: f64,
    pub lambdas: Vec<f64>,
    pub members: Vec<GridFunction>,
    /// Largest violation of `u_{λ} ≤ u_{λ'}` for `λ < λ'`.
    pub monotonicity_violation: f64,
    /// Richardson extrapolation to `λ = 0` from the two smallest `λ`.
    pub limit: GridFunction,
    /// Solution of `(ω + dd^c u)^n = μ` with data `φ − b`.
    pub reference: GridFunction,
    pub limit_gap: f64,
    pub reference_residual: f64,
}

/// The family `(ω + dd^c u_λ)^n = e^{λ u_λ} μ`, `u_λ = φ − b` on the boundary,
/// for a decreasing sequence of `λ`, together with its `λ → 0` limit.
pub fn lambda_limit_study(
    mu: &MeasureField,
    phi: &GridFunction,
    g: &HermitianMetricField,
    domain: &GridDomain,
    lambdas: &[f64],
    subsolution: &GridFunction,
) -> Result<LambdaStudy> {
    if lambdas.len() < 2 || lambdas.windows(2).any(|w| !(w[1] < w[0])) || lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Config("λ sequence must be positive and strictly decreasing with ≥ 2 entries".into()));
    }
    let shift = domain.active().map(|i| subsolution[i]).fold(f64::NEG_INFINITY, f64::max);
    let data = phi.map(domain, |x| x - shift);
    let base = DirichletProblem::new(domain.clone(), g.clone(), mu.clone(), RhsFunction::constant(1.0)?, data.clone())?;
    let tol = base.tol;
    let cap = exponential_cap(g, domain, &data, &tol)?;
    let mut members = Vec::with_capacity(lambdas.len());
    let mut warm: Option<GridFunction> = None;
    for &lambda in lambdas {
        let problem = DirichletProblem::new(domain.clone(), g.clone(), mu.clone(), RhsFunction::exponential(lambda, cap)?, data.clone())?
            .with_tolerances(tol);
        let (u, _) = solve_coupled(&problem, warm.as_ref())?;
        warm = Some(u.clone());
        members.push(u);
    }
    let mut violation: f64 = 0.0;
    for w in members.windows(2) {
        // w[0] has the larger λ and should dominate
        for &i in domain.interior() {
            violation = violation.max(w[1][i] - w[0][i]);
        }
    }
    let k = lambdas.len();
    let (l1, l2) = (lambdas[k - 2], lambdas[k - 1]);
    let (u1, u2) = (&members[k - 2], &members[k - 1]);
    let limit = u1.zip_with(u2, domain, |a, b| (l1 * b - l2 * a) / (l1 - l2));
    let (reference, rep) = solve_fixed_rhs(g, domain, mu, &data, &tol)?;
    let limit_gap = limit.max_abs_diff_on(&reference, domain.active());
    Ok(LambdaStudy {
        shift,
        lambdas: lambdas.to_vec(),
        members,
        monotonicity_violation: violation.max(0.0),
        limit,
        reference,
        limit_gap,
        reference_residual: rep.sup_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_ball_domain;

    #[test]
    fn center_shift_solves_the_node_equation() {
        let m = Herm::new2(2.0, num_complex::Complex64::new(0.3, -0.2), 1.2);
        for q in [0.0, 0.5, 3.0] {
            let t = center_shift(&m, q);
            assert!((m.shift(-t).det() - q).abs() < 1e-12);
            assert!(t <= m.lambda_min() + 1e-15);
        }
        let m1 = Herm::new1(0.7);
        assert!((center_shift(&m1, 0.2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tabulated_rhs_interpolates_and_validates() {
        let f = RhsFunction::tabulated(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(f.evaluate(-5.0, 0), 0.0);
        assert!((f.evaluate(0.5, 0) - 2.0).abs() < 1e-15);
        assert_eq!(f.evaluate(9.0, 0), 3.0);
        f.validate(-2.0, 2.0).unwrap();
        assert!(RhsFunction::tabulated(vec![0.0, 1.0], vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn maximal_function_of_zero_data_in_the_disc() {
        let d = build_ball_domain(1.0, 0.05, 1).unwrap();
        let g = HermitianMetricField::identity(&d);
        let h = solve_maximal(&g, &d, &GridFunction::zeros(&d)).unwrap();
        let err = d
            .active()
            .map(|i| {
                let p = d.point(i);
                (h[i] - (1.0 - p[0] * p[0] - p[1] * p[1])).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 3.0 * 0.05, "err {err}");
    }

    #[test]
    fn maximal_function_of_the_norm_square_trace() {
        // the trace is 1 on the unit circle, so h = 1 + (1 − |z|²)
        let d = build_ball_domain(1.0, 0.05, 1).unwrap();
        let g = HermitianMetricField::identity(&d);
        let phi = GridFunction::from_fn_projected(&d, |p| p[0] * p[0] + p[1] * p[1]);
        let h = solve_maximal(&g, &d, &phi).unwrap();
        let err = d
            .active()
            .map(|i| {
                let p = d.point(i);
                (h[i] - (2.0 - p[0] * p[0] - p[1] * p[1])).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 3.0 * 0.05, "err {err}");
    }
}
