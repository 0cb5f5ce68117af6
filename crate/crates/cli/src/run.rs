//! `hma run <config>`: build the problem on every grid of the refinement
//! list, solve it with the configured method and grade the result.

use crate::config::*;
use crate::error::{CliError, Result};
use crate::output::{to_json, write_report_dir, Table, Verdict};
use crate::suites::{run_suite, SuiteName, SuiteOptions, SuiteReport};
use hermitian_ma::masolver::{
    ball_cover, defining_function_subsolution, exponential_cap, lambda_limit_study, perron_solve, picard_solve,
    solve_exponential, solve_fixed_rhs, solve_maximal_with, DirichletProblem, RhsFunction, SolveReport,
};
use hermitian_ma::geometry::Shape;
use hermitian_ma::laplace::solve_laplace;
use hermitian_ma::verify::{manufactured_problem, manufactured_subsolution, random_smooth_measure};
use hermitian_ma::{
    build_ball_domain, build_shell_domain, GridDomain, GridFunction, HermitianMetricField, MeasureField, Point, Tolerances,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Debug, Serialize)]
pub struct GridStats {
    pub h: f64,
    pub n: usize,
    pub side: usize,
    pub nodes: usize,
    pub interior: usize,
    pub boundary: usize,
    pub torsion_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveRecord {
    pub h: f64,
    pub label: String,
    pub report: Option<SolveReport>,
    pub error_vs_exact: Option<f64>,
    /// Error variant name when the solve failed.
    pub error_kind: Option<String>,
    pub message: Option<String>,
    pub extra: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub tolerances: Vec<Tolerances>,
    pub grids: Vec<GridStats>,
    pub solves: Vec<SolveRecord>,
    pub verdicts: Vec<Verdict>,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunTimings {
    pub total_seconds: f64,
    pub grids: Vec<(f64, f64)>,
    pub suites: Vec<(String, f64)>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub timings: RunTimings,
    pub tables: Vec<Table>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.report.passed
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_report_dir(dir, &to_json(&self.report)?, &to_json(&self.timings)?, &self.tables)
    }
}

/// Everything needed to solve on one grid.
struct Setup {
    domain: GridDomain,
    g: HermitianMetricField,
    phi: GridFunction,
    mu: MeasureField,
    rhs: RhsFunction,
    tol: Tolerances,
    exact: Option<GridFunction>,
}

fn error_kind(e: &hermitian_ma::Error) -> &'static str {
    use hermitian_ma::Error as E;
    match e {
        E::Config(_) => "config",
        E::Unsupported(_) => "unsupported",
        E::DomainInvariant { .. } => "domain_invariant",
        E::InvalidMetric { .. } => "invalid_metric",
        E::IterationLimit { .. } => "iteration_limit",
        E::BracketFailure { .. } => "bracket_failure",
        E::Monotonicity { .. } => "monotonicity",
        E::Barrier { .. } => "barrier",
        E::Precondition(_) => "precondition",
        E::Generation { .. } => "generation",
        E::Disagreement { .. } => "disagreement",
    }
}

pub fn build_domain(spec: &DomainSpec, h: f64) -> Result<GridDomain> {
    let d = match spec.kind {
        DomainKind::Ball => build_ball_domain(spec.radius.unwrap_or(1.0), h, spec.n),
        DomainKind::Shell => build_shell_domain(spec.r_in.unwrap_or(0.0), spec.r_out.unwrap_or(0.0), h, spec.n),
    };
    d.map_err(CliError::from_setup)
}

pub fn build_metric(spec: &MetricSpec, d: &GridDomain) -> Result<HermitianMetricField> {
    match spec.kind {
        MetricKind::Identity => Ok(HermitianMetricField::identity(d)),
        MetricKind::Scaled => Ok(HermitianMetricField::scaled_identity(d, spec.scale.unwrap_or(1.0))),
        MetricKind::ConformalExp => HermitianMetricField::conformal_exp(d, spec.c.unwrap_or(0.0)).map_err(CliError::from_setup),
    }
}

fn build_boundary(spec: &BoundarySpec, exact: Option<&ExactSpec>, d: &GridDomain) -> GridFunction {
    let dim = d.dim();
    let value = spec.value;
    match spec.kind {
        BoundaryKind::Zero => GridFunction::zeros(d),
        BoundaryKind::Constant => GridFunction::constant(d, value.unwrap_or(0.0)),
        BoundaryKind::Linear => GridFunction::from_fn_projected(d, |p| {
            value.unwrap_or(0.0) + spec.coefficients.iter().zip(p.iter()).map(|(c, x)| c * x).sum::<f64>()
        }),
        BoundaryKind::Hoelder => {
            let (a, off, alpha) = (value.unwrap_or(1.0), spec.offset.unwrap_or(0.0), spec.alpha.unwrap_or(0.5));
            GridFunction::from_fn_projected(d, |p| a * (p[0] - off).abs().powf(alpha))
        }
        BoundaryKind::Manufactured => {
            let e = exact.expect("validated");
            GridFunction::from_fn_projected(d, |p| e.eval(p, dim))
        }
    }
}

fn build_rhs(spec: &RhsSpec, lambda: Option<f64>, t_max: impl FnOnce() -> Result<f64>) -> Result<RhsFunction> {
    let r = match spec.kind {
        RhsKind::Constant => RhsFunction::constant(spec.value.unwrap_or(1.0)),
        RhsKind::Exponential => {
            let l = lambda.or(spec.lambda).unwrap_or(1.0);
            let cap = match spec.t_max {
                Some(t) => t,
                None => t_max()?,
            };
            RhsFunction::exponential(l, cap)
        }
        RhsKind::Tabulated => RhsFunction::tabulated(spec.knots.clone(), spec.values.clone()),
    };
    r.map_err(CliError::from_setup)
}

fn default_tolerances(d: &GridDomain, g: &HermitianMetricField, phi: &GridFunction, sup_density: f64) -> Tolerances {
    Tolerances::for_problem(d, g, phi, sup_density)
}

/// Builds the problem pieces on one grid. With an `[exact]` solution and a
/// manufactured measure, `μ = ma(u*)/F(u*)`.
fn setup(cfg: &RunConfig, h: f64, lambda: Option<f64>, overrides: &ToleranceOverrides) -> Result<Setup> {
    let domain = build_domain(&cfg.domain, h)?;
    let g = build_metric(&cfg.metric, &domain)?;
    let dim = domain.dim();
    let phi = build_boundary(&cfg.boundary, cfg.exact.as_ref(), &domain);
    let base_tol = default_tolerances(&domain, &g, &phi, 0.0);
    let rhs = build_rhs(&cfg.rhs, lambda, || exponential_cap(&g, &domain, &phi, &base_tol).map_err(CliError::from_setup))?;
    let exact = cfg.exact.as_ref().map(|e| GridFunction::from_fn(&domain, |p| e.eval(p, dim)));
    let mut mu = match cfg.measure.kind {
        MeasureKind::Zero => MeasureField::zero(&domain),
        MeasureKind::Constant => {
            let v = cfg.measure.value.unwrap_or(0.0);
            MeasureField::from_fn(&domain, |_| v).map_err(CliError::from_setup)?
        }
        MeasureKind::Bumps => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            random_smooth_measure(&mut rng, &domain, cfg.measure.bumps.unwrap_or(3)).map_err(CliError::from_setup)?
        }
        MeasureKind::Manufactured => {
            let e = cfg.exact.clone().expect("validated");
            let p = manufactured_problem(&move |p: &Point| e.eval(p, dim), rhs.clone(), &g, &domain)
                .map_err(CliError::from_setup)?;
            p.mu
        }
    };
    for a in &cfg.measure.atoms {
        let mut p = [0.0; 4];
        p[..dim].copy_from_slice(&a.point);
        let node = domain.nearest_node(&p);
        mu = mu.with_atom(&domain, node, a.mass).map_err(CliError::from_setup)?;
    }
    let env = ToleranceOverrides::from_env()?;
    let tol = overrides.or(&env).apply(default_tolerances(&domain, &g, &phi, mu.effective_density().iter().copied().fold(0.0, f64::max)))?;
    Ok(Setup { domain, g, phi, mu, rhs, tol, exact })
}

fn sup_error(u: &GridFunction, exact: Option<&GridFunction>, d: &GridDomain) -> Option<f64> {
    exact.map(|e| u.max_abs_diff_on(e, d.active()))
}

fn subsolution(cfg: &RunConfig, problem: &DirichletProblem) -> std::result::Result<Option<GridFunction>, hermitian_ma::Error> {
    let d = &problem.domain;
    let dim = d.dim();
    match cfg.subsolution.kind {
        SubsolutionKind::None => Ok(None),
        SubsolutionKind::Constant => Ok(Some(GridFunction::constant(d, cfg.subsolution.value.unwrap_or(0.0)))),
        SubsolutionKind::DefiningFunction => defining_function_subsolution(problem).map(Some),
        SubsolutionKind::Manufactured => {
            let e = cfg.exact.as_ref().expect("validated");
            manufactured_subsolution(problem, &|p: &Point| e.eval(p, dim))
                .map(Some)
                .ok_or_else(|| hermitian_ma::Error::Precondition("no certified manufactured subsolution".into()))
        }
    }
}

fn cover(cfg: &RunConfig, d: &GridDomain) -> Vec<(Point, f64)> {
    let size = match d.shape() {
        Shape::Ball { radius } => radius,
        Shape::Shell { r_out, .. } => r_out,
        _ => 1.0,
    };
    let (r0, s0) = if d.n() == 1 { (0.4, 0.25) } else { (0.5, 0.35) };
    let radius = cfg.solver.cover_radius.unwrap_or(r0 * size);
    let spacing = cfg.solver.cover_spacing.unwrap_or(s0 * size);
    ball_cover(d, radius, spacing)
}

struct GridResult {
    stats: GridStats,
    tol: Tolerances,
    records: Vec<SolveRecord>,
    verdicts: Vec<Verdict>,
    solution: Option<(GridDomain, GridFunction, Option<GridFunction>)>,
    tables: Vec<Table>,
}

fn failed(h: f64, label: &str, e: &hermitian_ma::Error) -> (SolveRecord, Verdict) {
    let record = SolveRecord {
        h,
        label: label.to_string(),
        report: None,
        error_vs_exact: None,
        error_kind: Some(error_kind(e).to_string()),
        message: Some(e.to_string()),
        extra: None,
    };
    let verdict = Verdict::flag(format!("h={h} {label}: solve"), false, format!("{}: {e}", error_kind(e)));
    (record, verdict)
}

fn record(h: f64, label: &str, report: Option<SolveReport>, err: Option<f64>) -> SolveRecord {
    SolveRecord { h, label: label.to_string(), report, error_vs_exact: err, error_kind: None, message: None, extra: None }
}

fn run_grid(cfg: &RunConfig, h: f64) -> Result<GridResult> {
    let overrides = &cfg.tolerances;
    let s = setup(cfg, h, None, overrides)?;
    let d = s.domain.clone();
    let stats = GridStats {
        h,
        n: d.n(),
        side: d.side(),
        nodes: d.len(),
        interior: d.interior().len(),
        boundary: d.boundary().len(),
        torsion_bound: s.g.torsion_bound(),
    };
    let mut out = GridResult { stats, tol: s.tol, records: Vec::new(), verdicts: Vec::new(), solution: None, tables: Vec::new() };
    let factor = cfg.verify.error_factor;
    let problem = || -> Result<DirichletProblem> {
        Ok(DirichletProblem::new(d.clone(), s.g.clone(), s.mu.clone(), s.rhs.clone(), s.phi.clone())
            .map_err(CliError::from_setup)?
            .with_tolerances(s.tol))
    };
    let finish = |out: &mut GridResult, label: &str, res: std::result::Result<(GridFunction, Option<SolveReport>), hermitian_ma::Error>| {
        match res {
            Ok((u, report)) => {
                let err = sup_error(&u, s.exact.as_ref(), &d);
                out.verdicts.push(Verdict::flag(format!("h={h} {label}: solve"), true, ""));
                if let Some(r) = &report {
                    out.verdicts.push(Verdict::flag(format!("h={h} {label}: converged"), r.converged, format!("{} iterations", r.iterations)));
                }
                if let Some(e) = err {
                    out.verdicts.push(Verdict::at_most(format!("h={h} {label}: sup error vs exact"), e, factor * h));
                }
                out.records.push(record(h, label, report, err));
                out.solution = Some((d.clone(), u, s.exact.clone()));
            }
            Err(e) => {
                let (r, v) = failed(h, label, &e);
                out.records.push(r);
                out.verdicts.push(v);
            }
        }
    };
    match cfg.solver.method {
        Method::Maximal => {
            let res = solve_maximal_with(&s.g, &d, &s.phi, &s.tol).map(|u| (u, None));
            finish(&mut out, "maximal", res);
        }
        Method::Laplace => {
            let res = solve_laplace(&s.g, &d, &s.phi).map(|u| (u, None));
            finish(&mut out, "laplace", res);
        }
        Method::FixedRhs => {
            let res = solve_fixed_rhs(&s.g, &d, &s.mu, &s.phi, &s.tol).map(|(u, r)| (u, Some(r)));
            finish(&mut out, "fixed_rhs", res);
        }
        Method::Picard => {
            let res = picard_solve(&problem()?).map(|(u, r)| (u, Some(r)));
            finish(&mut out, "picard", res);
        }
        Method::Perron => {
            let p = problem()?;
            let res = subsolution(cfg, &p).and_then(|sub| {
                let p = match sub {
                    Some(sub) => p.with_subsolution(sub),
                    None => p,
                };
                perron_solve(&p, &cover(cfg, &d)).map(|(u, r)| (u, Some(r)))
            });
            finish(&mut out, "perron", res);
        }
        Method::Exponential => {
            let lambdas = if cfg.solver.lambdas.is_empty() { vec![cfg.rhs.lambda.unwrap_or(1.0)] } else { cfg.solver.lambdas.clone() };
            let mut table = Table::new("exponential", &["h", "lambda", "sup_error", "uniqueness_gap", "iterations", "damping"]);
            for &lambda in &lambdas {
                let sl = setup(cfg, h, Some(lambda), overrides)?;
                let label = format!("exponential lambda={lambda}");
                let p = DirichletProblem::new(d.clone(), sl.g.clone(), sl.mu.clone(), sl.rhs.clone(), sl.phi.clone())
                    .map_err(CliError::from_setup)?
                    .with_tolerances(sl.tol);
                let res = subsolution(cfg, &p)
                    .and_then(|sub| solve_exponential(lambda, &sl.mu, &sl.phi, &sl.g, &d, sub.as_ref(), &cover(cfg, &d)));
                match res {
                    Ok(sol) => {
                        let err = sup_error(&sol.solution, sl.exact.as_ref(), &d);
                        table.push(vec![
                            h.into(),
                            lambda.into(),
                            err.unwrap_or(f64::NAN).into(),
                            sol.uniqueness_gap.into(),
                            sol.report.iterations.into(),
                            sol.report.damping.into(),
                        ]);
                        out.verdicts.push(Verdict::at_most(format!("h={h} {label}: picard vs perron"), sol.uniqueness_gap, sl.tol.tol_cmp));
                        out.verdicts.push(Verdict::flag(format!("h={h} {label}: converged"), sol.report.converged, ""));
                        if let Some(e) = err {
                            out.verdicts.push(Verdict::at_most(format!("h={h} {label}: sup error vs exact"), e, factor * h));
                        }
                        let mut r = record(h, &label, Some(sol.report), err);
                        r.extra = Some(serde_json::json!({ "lambda": lambda, "uniqueness_gap": sol.uniqueness_gap }));
                        out.records.push(r);
                        out.solution = Some((d.clone(), sol.solution, sl.exact.clone()));
                    }
                    Err(e) => {
                        let (r, v) = failed(h, &label, &e);
                        out.records.push(r);
                        out.verdicts.push(v);
                    }
                }
            }
            out.tables.push(table);
        }
        Method::LambdaStudy => {
            let p = problem()?;
            let res = subsolution(cfg, &p).and_then(|sub| {
                let sub = sub.ok_or_else(|| hermitian_ma::Error::Precondition("lambda study needs a subsolution".into()))?;
                lambda_limit_study(&s.mu, &s.phi, &s.g, &d, &cfg.solver.lambdas, &sub)
            });
            match res {
                Ok(study) => {
                    let mono_tol = 100.0 * s.tol.tol_fix;
                    out.verdicts.push(Verdict::at_most(format!("h={h} lambda_study: monotone in lambda"), study.monotonicity_violation, mono_tol));
                    out.verdicts.push(Verdict::at_most(format!("h={h} lambda_study: limit vs fixed-rhs solution"), study.limit_gap, 2.0 * s.tol.tol_cmp));
                    let mut table = Table::new("lambda_study", &["h", "lambda", "sup_to_reference", "sup_error"]);
                    let shifted_exact = s.exact.as_ref().map(|e| e.map(&d, |x| x - study.shift));
                    for (l, m) in study.lambdas.iter().zip(&study.members) {
                        let err = sup_error(m, shifted_exact.as_ref(), &d).unwrap_or(f64::NAN);
                        table.push(vec![h.into(), (*l).into(), m.max_abs_diff_on(&study.reference, d.active()).into(), err.into()]);
                    }
                    let ref_err = sup_error(&study.reference, shifted_exact.as_ref(), &d);
                    let limit_err = sup_error(&study.limit, shifted_exact.as_ref(), &d).unwrap_or(f64::NAN);
                    table.push(vec![h.into(), 0.0.into(), study.limit_gap.into(), limit_err.into()]);
                    if let Some(e) = ref_err {
                        out.verdicts.push(Verdict::at_most(format!("h={h} lambda_study: reference sup error vs exact"), e, factor * h));
                    }
                    let mut r = record(h, "lambda_study", None, ref_err);
                    r.extra = Some(serde_json::json!({
                        "shift": study.shift,
                        "lambdas": study.lambdas,
                        "monotonicity_violation": study.monotonicity_violation,
                        "limit_gap": study.limit_gap,
                        "reference_residual": study.reference_residual,
                    }));
                    out.records.push(r);
                    out.tables.push(table);
                    out.solution = Some((d.clone(), study.limit, shifted_exact));
                }
                Err(e) => {
                    let (r, v) = failed(h, "lambda_study", &e);
                    out.records.push(r);
                    out.verdicts.push(v);
                }
            }
        }
    }
    Ok(out)
}

/// Rows of `(x₁, y₁, u, exact)` on the plane `z₂ = 0` (the whole grid for `n = 1`).
fn slice_rows(table: &mut Table, h: f64, d: &GridDomain, u: &GridFunction, exact: Option<&GridFunction>) {
    let half = d.side() / 2;
    for i in d.active() {
        let mi = d.multi_index(i);
        if d.n() == 2 && (mi[2] != half || mi[3] != half) {
            continue;
        }
        let p = d.point(i);
        let e = exact.map(|e| e[i]).unwrap_or(f64::NAN);
        table.push(vec![h.into(), p[0].into(), p[1].into(), u[i].into(), e.into()]);
    }
}

fn profile_rows(table: &mut Table, h: f64, d: &GridDomain, u: &GridFunction, exact: Option<&GridFunction>) {
    let half = d.side() / 2;
    for i in d.active() {
        let mi = d.multi_index(i);
        if (1..d.dim()).any(|a| mi[a] != half) {
            continue;
        }
        let p = d.point(i);
        let e = exact.map(|e| e[i]).unwrap_or(f64::NAN);
        table.push(vec![h.into(), p[0].into(), u[i].into(), e.into()]);
    }
}

/// Runs the configuration entirely in memory.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let steps = cfg.domain.h.to_vec();
    let mut grids = Vec::new();
    let mut tolerances = Vec::new();
    let mut solves = Vec::new();
    let mut verdicts = Vec::new();
    let mut grid_times = Vec::new();
    let mut slice = Table::new("slice", &["h", "x1", "y1", "u", "exact"]);
    let mut profile = Table::new("profile", &["h", "x1", "u", "exact"]);
    let mut history = Table::new("history", &["h", "label", "step", "update"]);
    let mut dump = Table::new("solution", &["h", "node", "x1", "y1", "x2", "y2", "u"]);
    let mut extra_tables: Vec<Table> = Vec::new();
    let mut errors: Vec<(f64, f64)> = Vec::new();
    for &h in &steps {
        let t = Instant::now();
        let res = run_grid(cfg, h)?;
        grid_times.push((h, t.elapsed().as_secs_f64()));
        for r in &res.records {
            if let Some(rep) = &r.report {
                for (k, v) in rep.history.iter().enumerate() {
                    history.push(vec![h.into(), r.label.clone().into(), (k + 1).into(), (*v).into()]);
                }
            }
        }
        if let Some((d, u, exact)) = &res.solution {
            slice_rows(&mut slice, h, d, u, exact.as_ref());
            profile_rows(&mut profile, h, d, u, exact.as_ref());
            if cfg.output.full_dump {
                for i in d.active() {
                    let p = d.point(i);
                    dump.push(vec![h.into(), i.into(), p[0].into(), p[1].into(), p[2].into(), p[3].into(), u[i].into()]);
                }
            }
        }
        if let Some(e) = res.records.iter().rev().find_map(|r| r.error_vs_exact) {
            errors.push((h, e));
        }
        for t in res.tables {
            match extra_tables.iter_mut().find(|x| x.name == t.name) {
                Some(x) => x.rows.extend(t.rows),
                None => extra_tables.push(t),
            }
        }
        grids.push(res.stats);
        tolerances.push(res.tol);
        solves.extend(res.records);
        verdicts.extend(res.verdicts);
    }
    let mut tables = vec![slice, profile, history];
    if errors.len() == steps.len() && !errors.is_empty() {
        let mut conv = Table::new("convergence", &["h", "error", "error_over_h", "ratio"]);
        for (k, &(h, e)) in errors.iter().enumerate() {
            let ratio = if k == 0 { f64::NAN } else { errors[k - 1].1 / e };
            conv.push(vec![h.into(), e.into(), (e / h).into(), ratio.into()]);
            if k > 0 {
                verdicts.push(Verdict::at_least(format!("error ratio h={} -> h={h}", errors[k - 1].0), ratio, cfg.verify.min_ratio));
            }
        }
        tables.push(conv);
    }
    tables.extend(extra_tables);
    if cfg.output.full_dump {
        tables.push(dump);
    }
    let mut suites = Vec::new();
    let mut suite_times = Vec::new();
    for name in &cfg.verify.suites {
        let t = Instant::now();
        let suite = run_suite(SuiteName::parse(name)?, &SuiteOptions { seed: cfg.seed, dim: Some(cfg.domain.n) })?;
        suite_times.push((name.clone(), t.elapsed().as_secs_f64()));
        verdicts.extend(suite.report.all_verdicts().cloned());
        tables.extend(suite.tables);
        suites.push(suite.report);
    }
    let passed = !verdicts.is_empty() && verdicts.iter().all(|v| v.passed);
    let report = RunReport { config: cfg.clone(), tolerances, grids, solves, verdicts, suites, passed };
    let timings = RunTimings { total_seconds: start.elapsed().as_secs_f64(), grids: grid_times, suites: suite_times };
    Ok(RunOutput { report, timings, tables })
}

/// Loads, runs and writes. The output directory defaults to `output.dir`,
/// then to `out/<config stem>`.
pub fn run_file(path: &Path, out: Option<&Path>) -> Result<(RunOutput, PathBuf)> {
    let cfg = RunConfig::load(path)?;
    let dir = match (out, &cfg.output.dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
            PathBuf::from("out").join(stem)
        }
    };
    let output = execute(&cfg)?;
    output.write(&dir)?;
    Ok((output, dir))
}
