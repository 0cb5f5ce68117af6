//! Built-in verification batteries over a seeded problem corpus.
//!
//! Every case draws from its own ChaCha8 stream derived from the suite seed,
//! the battery and the case number, so results do not depend on the order in
//! which rayon schedules the cases. Reports never contain timings.

use crate::error::{CliError, Result};
use crate::output::{Table, Verdict};
use hermitian_ma::capacity::{
    bt_capacity, check_e0_membership, check_local_domination, closed_ball_nodes, DominationOptions,
};
use hermitian_ma::laplace::{global_barrier, hoelder_barrier, hoelder_modulus, solve_laplace, BarrierOptions};
use hermitian_ma::masolver::{ball_cover, defining_function_subsolution};
use hermitian_ma::verify::{
    calibrate_energy_constant, comparison_test, energy_inequality_test, local_cp_certificate, random_comparison_pair,
    random_smooth_measure, stability_test, uniqueness_test, SmoothBump,
};
use hermitian_ma::{build_ball_domain, GridDomain, GridFunction, HermitianMetricField, MeasureField, Point};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Comparison,
    Stability,
    Energy,
    Capacity,
    Holder,
    All,
}

impl SuiteName {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "comparison" => SuiteName::Comparison,
            "stability" => SuiteName::Stability,
            "energy" => SuiteName::Energy,
            "capacity" => SuiteName::Capacity,
            "holder" => SuiteName::Holder,
            "all" => SuiteName::All,
            other => {
                return Err(CliError::Config(format!(
                    "unknown suite {other:?} (expected comparison, stability, energy, capacity, holder or all)"
                )))
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteName::Comparison => "comparison",
            SuiteName::Stability => "stability",
            SuiteName::Energy => "energy",
            SuiteName::Capacity => "capacity",
            SuiteName::Holder => "holder",
            SuiteName::All => "all",
        }
    }

    fn tag(&self) -> u64 {
        *self as u64 + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Restrict the corpus to one complex dimension.
    pub dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Section {
    pub name: String,
    pub verdicts: Vec<Verdict>,
    pub data: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub dim: Option<usize>,
    pub sections: Vec<Section>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn all_verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.sections.iter().flat_map(|s| s.verdicts.iter())
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOutput {
    pub report: SuiteReport,
    pub tables: Vec<Table>,
    /// Wall-clock seconds per section; kept out of the report.
    pub timings: Vec<(String, f64)>,
}

#[derive(Default)]
struct Collector {
    sections: Vec<Section>,
    tables: Vec<Table>,
    timings: Vec<(String, f64)>,
}

impl Collector {
    fn section(&mut self, name: &str, f: impl FnOnce() -> Result<(Vec<Verdict>, serde_json::Value, Vec<Table>)>) -> Result<()> {
        let t = Instant::now();
        let (verdicts, data, tables) = f()?;
        self.timings.push((name.to_string(), t.elapsed().as_secs_f64()));
        self.sections.push(Section { name: name.to_string(), verdicts, data });
        self.tables.extend(tables);
        Ok(())
    }
}

fn case_rng(seed: u64, suite: SuiteName, section: u64, case: u64) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(suite.tag() << 48)
        .wrapping_add(section << 32)
        .wrapping_add(case);
    ChaCha8Rng::seed_from_u64(mixed)
}

fn wants(opts: &SuiteOptions, n: usize) -> bool {
    opts.dim.is_none_or(|d| d == n)
}

fn check_dim(opts: &SuiteOptions, suite: SuiteName) -> Result<()> {
    match (suite, opts.dim) {
        (_, Some(d)) if d != 1 && d != 2 => Err(CliError::Config(format!("--dim must be 1 or 2, got {d}"))),
        (SuiteName::Energy, Some(1)) => {
            Err(CliError::Config("the energy inequality is posed in complex dimension 2; --dim 1 is rejected".into()))
        }
        (SuiteName::Capacity | SuiteName::Holder, Some(2)) => Err(CliError::Config(format!(
            "the {} battery runs on the unit disc; --dim 2 is rejected",
            suite.as_str()
        ))),
        _ => Ok(()),
    }
}

fn setup_err(e: hermitian_ma::Error) -> CliError {
    CliError::from_setup(e)
}

fn err_verdict(name: String, e: &hermitian_ma::Error) -> Verdict {
    Verdict::flag(name, false, e.to_string())
}

/// Runs one battery (or all of them in order).
pub fn run_suite(name: SuiteName, opts: &SuiteOptions) -> Result<SuiteOutput> {
    let mut c = Collector::default();
    let list: Vec<SuiteName> = match name {
        SuiteName::All => vec![SuiteName::Comparison, SuiteName::Stability, SuiteName::Energy, SuiteName::Capacity, SuiteName::Holder],
        one => {
            check_dim(opts, one)?;
            vec![one]
        }
    };
    for suite in list {
        if check_dim(opts, suite).is_err() {
            let note = format!("skipped for --dim {}", opts.dim.unwrap_or(0));
            c.sections.push(Section { name: format!("{}/skipped", suite.as_str()), verdicts: Vec::new(), data: serde_json::json!(note) });
            continue;
        }
        match suite {
            SuiteName::Comparison => comparison_suite(opts, &mut c)?,
            SuiteName::Stability => stability_suite(opts, &mut c)?,
            SuiteName::Energy => energy_suite(opts, &mut c)?,
            SuiteName::Capacity => capacity_suite(opts, &mut c)?,
            SuiteName::Holder => holder_suite(opts, &mut c)?,
            SuiteName::All => unreachable!(),
        }
    }
    let passed = c.sections.iter().flat_map(|s| &s.verdicts).all(|v| v.passed);
    let report = SuiteReport { suite: name.as_str().to_string(), seed: opts.seed, dim: opts.dim, sections: c.sections, passed };
    Ok(SuiteOutput { report, tables: c.tables, timings: c.timings })
}

fn r2(p: &Point, dim: usize) -> f64 {
    p[..dim].iter().map(|x| x * x).sum()
}

// ---------------------------------------------------------------- comparison

#[derive(Clone, Debug, Serialize)]
struct PairOutcome {
    case: usize,
    n: usize,
    h: f64,
    lambda: Option<f64>,
    equal: bool,
    max_violation: f64,
    tol: f64,
    uniqueness_gap: Option<f64>,
    uniqueness_tol: Option<f64>,
    error: Option<String>,
}

fn comparison_case(case: usize, opts: &SuiteOptions, domains: &[(usize, f64, GridDomain, HermitianMetricField)]) -> PairOutcome {
    let n = if case < 10 { 1 } else { 2 };
    let (_, h, d, g) = domains.iter().find(|x| x.0 == n).expect("domain built");
    let mut rng = case_rng(opts.seed, SuiteName::Comparison, 0, case as u64);
    let lambda = if case.is_multiple_of(3) { None } else { Some(rng.gen_range(0.1..=0.5)) };
    let equal = case % 5 == 4;
    let mut out = PairOutcome {
        case,
        n,
        h: *h,
        lambda,
        equal,
        max_violation: f64::NAN,
        tol: f64::NAN,
        uniqueness_gap: None,
        uniqueness_tol: None,
        error: None,
    };
    let mut run = |out: &mut PairOutcome| -> hermitian_ma::Result<()> {
        let (a, b) = random_comparison_pair(&mut rng, d, g, lambda, equal)?;
        let cmp = comparison_test(&a, &b)?;
        out.max_violation = cmp.max_violation;
        out.tol = cmp.tol;
        if equal {
            let cover = ball_cover(d, 0.5, 0.35);
            let sub = defining_function_subsolution(&a)?;
            let u = uniqueness_test(&a.with_subsolution(sub), &cover)?;
            out.uniqueness_gap = Some(u.gap);
            out.uniqueness_tol = Some(u.tol);
        }
        Ok(())
    };
    if let Err(e) = run(&mut out) {
        out.error = Some(e.to_string());
    }
    out
}

fn certificate_pair(d: &GridDomain, shift: f64) -> (GridFunction, GridFunction) {
    let v = GridFunction::from_fn(d, |p| r2(p, 4));
    let u = GridFunction::from_fn(d, |p| {
        let q = (p[0] - shift).powi(2) + p[1] * p[1] + p[2] * p[2] + p[3] * p[3];
        r2(p, 4) + 0.3 * (q - 0.25)
    });
    (u, v)
}

fn comparison_suite(opts: &SuiteOptions, c: &mut Collector) -> Result<()> {
    c.section("comparison/pairs", || {
        let mut domains = Vec::new();
        for (n, h) in [(1usize, 1.0 / 64.0), (2, 0.2)] {
            if wants(opts, n) {
                let d = build_ball_domain(1.0, h, n).map_err(setup_err)?;
                let g = HermitianMetricField::conformal_exp(&d, 0.3).map_err(setup_err)?;
                domains.push((n, h, d, g));
            }
        }
        let cases: Vec<usize> = (0..20).filter(|&k| wants(opts, if k < 10 { 1 } else { 2 })).collect();
        let outcomes: Vec<PairOutcome> = cases.par_iter().map(|&k| comparison_case(k, opts, &domains)).collect();
        let mut verdicts = Vec::new();
        let mut table = Table::new(
            "comparison_pairs",
            &["case", "n", "h", "lambda", "equal", "max_violation", "tol", "uniqueness_gap", "uniqueness_tol", "error"],
        );
        for o in &outcomes {
            let f = match o.lambda {
                None => "F=1".to_string(),
                Some(l) => format!("F=exp({l:.4}t)"),
            };
            let name = format!("pair {} (n={}, {f}, {})", o.case, o.n, if o.equal { "mu=nu" } else { "mu<=nu" });
            match &o.error {
                Some(e) => verdicts.push(Verdict::flag(name, false, e.clone())),
                None => {
                    verdicts.push(Verdict::at_most(format!("{name}: u >= v - tol_cmp"), o.max_violation, o.tol));
                    if let (Some(gap), Some(tol)) = (o.uniqueness_gap, o.uniqueness_tol) {
                        verdicts.push(Verdict::at_most(format!("{name}: picard vs perron"), gap, tol));
                    }
                }
            }
            table.push(vec![
                o.case.into(),
                o.n.into(),
                o.h.into(),
                o.lambda.unwrap_or(0.0).into(),
                o.equal.into(),
                o.max_violation.into(),
                o.tol.into(),
                o.uniqueness_gap.unwrap_or(f64::NAN).into(),
                o.uniqueness_tol.unwrap_or(f64::NAN).into(),
                o.error.clone().unwrap_or_default().into(),
            ]);
        }
        Ok((verdicts, serde_json::to_value(&outcomes).unwrap_or_default(), vec![table]))
    })?;
    if !wants(opts, 2) {
        return Ok(());
    }
    c.section("comparison/local_certificate", || {
        let mut rng = case_rng(opts.seed, SuiteName::Comparison, 1, 0);
        let shift = rng.gen_range(-0.1..=0.1);
        let jobs: Vec<(f64, &str)> = vec![(0.2, "kahler"), (0.2, "conformal"), (0.1, "kahler"), (0.1, "conformal")];
        let results: Vec<Result<(f64, &str, f64, Vec<hermitian_ma::verify::ComparisonCertificate>)>> = jobs
            .par_iter()
            .map(|&(h, metric)| {
                let d = build_ball_domain(1.0, h, 2).map_err(setup_err)?;
                let g = match metric {
                    "kahler" => HermitianMetricField::identity(&d),
                    _ => HermitianMetricField::conformal_exp(&d, 1.0).map_err(setup_err)?,
                };
                let (u, v) = certificate_pair(&d, shift);
                let certs = [1.0, 0.5].iter().map(|&theta| local_cp_certificate(&u, &v, theta, &g, &d, 8)).collect();
                Ok((h, metric, g.torsion_bound(), certs))
            })
            .collect();
        let mut verdicts = Vec::new();
        let mut table = Table::new(
            "comparison_certificates",
            &["h", "metric", "theta", "torsion_bound", "s0", "theta0", "level", "s", "nodes", "mass_v", "mass_u", "required_c"],
        );
        let mut data = Vec::new();
        let mut fitted: Vec<(&str, f64, f64)> = Vec::new();
        for r in results {
            let (h, metric, b, certs) = r?;
            let main = &certs[0];
            let name = format!("certificate h={h} {metric}");
            let levels_ok = main.precondition.is_none() && main.levels.len() >= 8 && !main.alarm;
            verdicts.push(Verdict::flag(
                format!("{name}: all probe levels pass"),
                levels_ok,
                format!("{} levels, fitted C_n = {:e}, precondition {:?}", main.levels.len(), main.fitted_cn, main.precondition),
            ));
            if metric == "kahler" {
                let factor_one = b == 0.0 && main.levels.iter().all(|l| l.required_c == 0.0);
                verdicts.push(Verdict::flag(format!("{name}: B = 0 and mass(ω_v^n) ≤ mass(ω_u^n)"), factor_one, format!("B = {b:e}")));
            } else {
                verdicts.push(Verdict::flag(format!("{name}: torsion constant positive"), b > 0.0, format!("B = {b:e}")));
            }
            verdicts.push(Verdict::at_most(format!("{name}: fitted C_n non-increasing in θ"), certs[0].fitted_cn, certs[1].fitted_cn));
            fitted.push((metric, h, main.fitted_cn));
            for cert in &certs {
                for (k, l) in cert.levels.iter().enumerate() {
                    table.push(vec![
                        h.into(),
                        metric.into(),
                        cert.theta.into(),
                        b.into(),
                        cert.s0.into(),
                        cert.theta0.into(),
                        (k + 1).into(),
                        l.s.into(),
                        l.nodes.into(),
                        l.mass_v.into(),
                        l.mass_u.into(),
                        l.required_c.into(),
                    ]);
                }
            }
            data.push(serde_json::json!({ "h": h, "metric": metric, "certificates": certs }));
        }
        for metric in ["kahler", "conformal"] {
            let cs: Vec<f64> = fitted.iter().filter(|x| x.0 == metric).map(|x| x.2).collect();
            let (a, b) = (cs[0], cs[1]);
            let spread = (a - b).abs();
            let scale = a.max(b);
            verdicts.push(
                Verdict::at_most(format!("certificate {metric}: fitted C_n stable under h -> h/2"), spread, 0.5 * scale)
                    .with_detail(format!("C_n = {a:e} at h = 0.2, {b:e} at h = 0.1")),
            );
        }
        Ok((verdicts, serde_json::Value::Array(data), vec![table]))
    })
}

// ----------------------------------------------------------------- stability

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12)
}

fn decays(v: &[f64]) -> bool {
    non_increasing(v) && v.last() < v.first()
}

fn stability_suite(opts: &SuiteOptions, c: &mut Collector) -> Result<()> {
    c.section("stability/oscillating_densities", || {
        let jobs: Vec<(usize, f64, [f64; 3])> = [(1usize, 1.0 / 64.0, [16.0, 32.0, 64.0]), (2, 0.1, [4.0, 8.0, 16.0])]
            .into_iter()
            .filter(|j| wants(opts, j.0))
            .collect();
        let results: Vec<Result<(usize, f64, [f64; 3], f64, hermitian_ma::verify::StabilityReport, f64)>> = jobs
            .par_iter()
            .map(|&(n, h, js)| {
                let mut rng = case_rng(opts.seed, SuiteName::Stability, 0, n as u64);
                let phase = rng.gen_range(0.0..2.0 * PI);
                let d = build_ball_domain(1.0, h, n).map_err(setup_err)?;
                let g = if n == 1 { HermitianMetricField::identity(&d) } else { HermitianMetricField::conformal_exp(&d, 0.3).map_err(setup_err)? };
                let fs: Vec<GridFunction> =
                    js.iter().map(|&j| GridFunction::from_fn(&d, |p| 0.5 * (1.0 + (j * p[0] + phase).sin()))).collect();
                let f = GridFunction::constant(&d, 0.5);
                let mu = MeasureField::from_fn(&d, |_| 4.0).map_err(setup_err)?;
                let phi = GridFunction::zeros(&d);
                let report = stability_test(&fs, &f, &mu, &phi, &g, &d, None)?;
                let tol_ma = 1e-4 * (2.0 + 1.0);
                Ok((n, h, js, phase, report, tol_ma))
            })
            .collect();
        let mut verdicts = Vec::new();
        let mut table = Table::new(
            "stability",
            &["n", "h", "j", "sup_to_limit", "averaged_residual", "capacity", "energy_0", "energy_1", "energy_2"],
        );
        let mut data = Vec::new();
        for r in results {
            let (n, h, js, phase, rep, tol_ma) = r?;
            let name = format!("stability n={n} h={h}");
            verdicts.push(Verdict::flag(format!("{name}: sup |u_j - u| decays"), decays(&rep.sup_to_limit), format!("{:?}", rep.sup_to_limit)));
            verdicts.push(Verdict::flag(format!("{name}: Cauchy gaps decay"), decays(&rep.cauchy), format!("{:?}", rep.cauchy)));
            verdicts.push(Verdict::flag(
                format!("{name}: ball-averaged density residual decays"),
                decays(&rep.averaged_residual),
                format!("{:?}", rep.averaged_residual),
            ));
            verdicts.push(Verdict::at_most(format!("{name}: limit density residual"), rep.limit_residual, tol_ma));
            let cap_ok = decays(&rep.capacities);
            let energy_ok = (0..=n).all(|k| decays(&rep.energies.iter().map(|e| e[k]).collect::<Vec<_>>()));
            verdicts.push(Verdict::flag(format!("{name}: capacity of {{|u_j - u| > eps}} decays"), cap_ok, format!("{:?}", rep.capacities)));
            verdicts.push(Verdict::flag(format!("{name}: Hessian energies decay"), energy_ok, format!("{:?}", rep.energies)));
            verdicts.push(Verdict::flag(format!("{name}: capacity and energies decay together"), cap_ok && energy_ok, ""));
            for (k, &j) in js.iter().enumerate() {
                let e = &rep.energies[k];
                table.push(vec![
                    n.into(),
                    h.into(),
                    j.into(),
                    rep.sup_to_limit[k].into(),
                    rep.averaged_residual[k].into(),
                    rep.capacities[k].into(),
                    e[0].into(),
                    e[1].into(),
                    e.get(2).copied().unwrap_or(f64::NAN).into(),
                ]);
            }
            data.push(serde_json::json!({ "n": n, "h": h, "j": js, "phase": phase, "report": rep }));
        }
        Ok((verdicts, serde_json::Value::Array(data), vec![table]))
    })?;
    if !wants(opts, 1) {
        return Ok(());
    }
    c.section("stability/constant_sequence", || {
        let d = build_ball_domain(1.0, 1.0 / 16.0, 1).map_err(setup_err)?;
        let g = HermitianMetricField::identity(&d);
        let f = GridFunction::constant(&d, 0.5);
        let mu = MeasureField::from_fn(&d, |_| 4.0).map_err(setup_err)?;
        let rep = stability_test(&[f.clone(), f.clone()], &f, &mu, &GridFunction::zeros(&d), &g, &d, Some(1e-3))?;
        let worst = rep.sup_to_limit.iter().copied().fold(0.0, f64::max);
        let verdicts = vec![Verdict::at_most("stability f_j = f: solutions coincide", worst, 1e-12)];
        Ok((verdicts, serde_json::json!({ "sup_to_limit": rep.sup_to_limit }), Vec::new()))
    })
}

// -------------------------------------------------------------------- energy

fn energy_suite(opts: &SuiteOptions, c: &mut Collector) -> Result<()> {
    c.section("energy/inequality", || {
        let h = 0.1;
        let d = build_ball_domain(1.0, h, 2).map_err(setup_err)?;
        let g = HermitianMetricField::identity(&d);
        let rho = GridFunction::from_fn(&d, |p| r2(p, 4) - 1.0);
        let u = GridFunction::from_fn(&d, |p| 0.5 * (r2(p, 4) - 1.0));
        let mut rng = case_rng(opts.seed, SuiteName::Energy, 0, 0);
        let bumps: Vec<SmoothBump> = (0..25).map(|_| SmoothBump::random(&mut rng, 4, 0.3, (0.2, 0.4), (0.5, 1.5))).collect();
        let pair = |b: &SmoothBump, t: f64| -> GridFunction {
            let mut v = u.clone();
            for i in d.active() {
                let x = b.value(&d.point(i), 4);
                v[i] += t * x * x;
            }
            v
        };
        let calibration: Vec<(GridFunction, GridFunction)> = bumps[..5].iter().map(|b| (u.clone(), pair(b, 1.0))).collect();
        let c_frozen = calibrate_energy_constant(&calibration, &rho, &g, &d)?;
        let held: Vec<(usize, f64, hermitian_ma::Result<hermitian_ma::verify::EnergyReport>)> = (5..25)
            .flat_map(|k| [1.0, 0.5, 0.1].map(|t| (k, t)))
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(k, t)| (k, t, energy_inequality_test(&u, &pair(&bumps[k], t), &rho, &g, &d, c_frozen)))
            .collect();
        let mut verdicts = Vec::new();
        let mut table = Table::new("energy", &["case", "t", "lhs", "t1", "t2", "e", "c", "rhs", "margin", "holds"]);
        let mut reports = Vec::new();
        let trivial = energy_inequality_test(&u, &u, &rho, &g, &d, c_frozen)?;
        verdicts.push(Verdict::flag("energy u = v: 0 <= 0", trivial.holds && trivial.terms.lhs == 0.0, format!("margin {:e}", trivial.margin)));
        for (k, t, r) in held {
            match r {
                Ok(rep) => {
                    let name = if t == 1.0 { format!("energy held-out bump {k}: positive margin") } else { format!("energy bump {k} scaled by t={t}") };
                    verdicts.push(Verdict::flag(name, rep.margin > 0.0, format!("lhs {:e}, rhs {:e}, margin {:e}", rep.terms.lhs, rep.rhs, rep.margin)));
                    table.push(vec![
                        k.into(),
                        t.into(),
                        rep.terms.lhs.into(),
                        rep.terms.t1.into(),
                        rep.terms.t2.into(),
                        rep.terms.e.into(),
                        rep.c.into(),
                        rep.rhs.into(),
                        rep.margin.into(),
                        rep.holds.into(),
                    ]);
                    reports.push(serde_json::json!({ "case": k, "t": t, "report": rep }));
                }
                Err(e) => verdicts.push(err_verdict(format!("energy bump {k} t={t}"), &e)),
            }
        }
        let data = serde_json::json!({ "h": h, "frozen_c": c_frozen, "calibration_bumps": &bumps[..5], "held_out_bumps": &bumps[5..], "reports": reports });
        Ok((verdicts, data, vec![table]))
    })
}

// ------------------------------------------------------------------ capacity

fn random_set(rng: &mut ChaCha8Rng, d: &GridDomain) -> Vec<usize> {
    let balls: Vec<(Point, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let mut c = [0.0; 4];
            loop {
                c[0] = rng.gen_range(-0.5..=0.5);
                c[1] = rng.gen_range(-0.5..=0.5);
                if c[0] * c[0] + c[1] * c[1] <= 0.25 {
                    break;
                }
            }
            (c, rng.gen_range(0.1..=0.35))
        })
        .collect();
    d.interior()
        .iter()
        .copied()
        .filter(|&i| balls.iter().any(|(c, r)| d.distance(&d.point(i), c) <= *r))
        .collect()
}

fn capacity_suite(opts: &SuiteOptions, c: &mut Collector) -> Result<()> {
    c.section("capacity/radial_oracle", || {
        let h = 1.0 / 128.0;
        let d = build_ball_domain(1.0, h, 1).map_err(setup_err)?;
        let rs = [0.25, 0.5];
        let values: Vec<hermitian_ma::Result<f64>> =
            rs.par_iter().map(|&r| bt_capacity(&closed_ball_nodes(&d, &[0.0; 4], r), &d).map(|c| c.value)).collect();
        let mut verdicts = Vec::new();
        let mut table = Table::new("capacity_oracle", &["r", "h", "value", "oracle", "relative_error"]);
        let mut data = Vec::new();
        for (&r, v) in rs.iter().zip(values) {
            let v = v?;
            let oracle = PI / (1.0 / r).ln();
            let rel = (v - oracle).abs() / oracle;
            verdicts.push(Verdict::at_most(format!("cap(closed ball r={r}) vs pi/log(1/r)"), rel, 0.05).with_detail(format!("{v} vs {oracle}")));
            table.push(vec![r.into(), h.into(), v.into(), oracle.into(), rel.into()]);
            data.push(serde_json::json!({ "r": r, "value": v, "oracle": oracle }));
        }
        Ok((verdicts, serde_json::Value::Array(data), vec![table]))
    })?;
    c.section("capacity/nested_monotonicity", || {
        let d = build_ball_domain(1.0, 1.0 / 32.0, 1).map_err(setup_err)?;
        let results: Vec<hermitian_ma::Result<(usize, usize, usize, f64, f64, (bool, String))>> = (0..50u64)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&k| {
                let mut rng = case_rng(opts.seed, SuiteName::Capacity, 1, k);
                let outer = random_set(&mut rng, &d);
                let inner: Vec<usize> = if rng.gen_bool(0.5) {
                    outer.iter().copied().filter(|_| rng.gen_bool(0.5)).collect()
                } else {
                    let mut c = [0.0; 4];
                    c[0] = rng.gen_range(-0.5..=0.5);
                    c[1] = rng.gen_range(-0.5..=0.5);
                    let r = rng.gen_range(0.05..=0.4);
                    outer.iter().copied().filter(|&i| d.distance(&d.point(i), &c) <= r).collect()
                };
                let cf = bt_capacity(&outer, &d)?;
                let ce = bt_capacity(&inner, &d)?;
                let member = if k < 5 && !outer.is_empty() {
                    let r = check_e0_membership(&cf.extremal, &d);
                    (r.member, format!("psh {}, max {:e}, boundary defect {:e}, mass {:e}", r.is_psh, r.max_value, r.boundary_defect, r.total_mass))
                } else {
                    (true, String::new())
                };
                Ok((k as usize, inner.len(), outer.len(), ce.value, cf.value, member))
            })
            .collect();
        let mut verdicts = Vec::new();
        let mut table = Table::new("capacity_pairs", &["case", "inner_nodes", "outer_nodes", "cap_inner", "cap_outer"]);
        for r in results {
            let (k, ni, no, ce, cf, member) = r?;
            verdicts.push(Verdict::at_most(format!("nested pair {k}: cap(E) <= cap(F)"), ce, cf + 1e-6 * (1.0 + cf)));
            if k < 5 {
                verdicts.push(Verdict::flag(format!("nested pair {k}: extremal function of F lies in E0"), member.0, member.1));
            }
            table.push(vec![k.into(), ni.into(), no.into(), ce.into(), cf.into()]);
        }
        Ok((verdicts, serde_json::Value::Null, vec![table]))
    })?;
    c.section("capacity/local_domination", || {
        let d = build_ball_domain(1.0, 1.0 / 32.0, 1).map_err(setup_err)?;
        let mut rng = case_rng(opts.seed, SuiteName::Capacity, 2, 0);
        let mu = random_smooth_measure(&mut rng, &d, 3).map_err(setup_err)?;
        let node = d.nearest_node(&[0.1, -0.2, 0.0, 0.0]);
        let with_atom = mu.clone().with_atom(&d, node, 1e-3).map_err(setup_err)?;
        let cover = ball_cover(&d, 0.4, 0.25);
        let smooth = check_local_domination(&mu, &d, &cover, DominationOptions::default());
        let atomic = check_local_domination(&with_atom, &d, &cover, DominationOptions::default());
        let a_max = |r: &hermitian_ma::capacity::DominationReport| r.witnesses.iter().map(|w| w.a).fold(0.0, f64::max);
        let verdicts = vec![
            Verdict::flag("smooth measure locally dominated by capacity", smooth.holds, format!("largest A = {:e}", a_max(&smooth))),
            Verdict::flag("measure with an atom within the cell budget", atomic.holds, format!("largest A = {:e}", a_max(&atomic))),
        ];
        let data = serde_json::json!({ "smooth_max_a": a_max(&smooth), "atomic_max_a": a_max(&atomic), "balls": cover.len() });
        Ok((verdicts, data, Vec::new()))
    })
}

// -------------------------------------------------------------------- holder

fn nearest_boundary_node(d: &GridDomain, p: &Point) -> usize {
    let mut best = (f64::INFINITY, 0);
    for &b in d.boundary() {
        let dist = d.distance(&d.point(b), p);
        if dist < best.0 {
            best = (dist, b);
        }
    }
    best.1
}

struct HolderGrid {
    h: f64,
    barriers: Vec<(usize, Point, hermitian_ma::Result<hermitian_ma::laplace::BarrierSpec>, f64)>,
    sandwich: hermitian_ma::Result<(f64, f64, f64)>,
    modulus: Option<hermitian_ma::laplace::HoelderModulus>,
}

fn holder_suite(opts: &SuiteOptions, c: &mut Collector) -> Result<()> {
    c.section("holder/barriers", || {
        let mut rng = case_rng(opts.seed, SuiteName::Holder, 0, 0);
        let offset = rng.gen_range(-0.5..=0.5);
        let rotation = rng.gen_range(0.0..2.0 * PI / 8.0);
        let alpha = 0.5;
        let grids: Vec<Result<HolderGrid>> = [1.0 / 32.0, 1.0 / 64.0]
            .par_iter()
            .map(|&h| {
                let d = build_ball_domain(1.0, h, 1).map_err(setup_err)?;
                let g = HermitianMetricField::conformal_exp(&d, 0.5).map_err(setup_err)?;
                let phi = GridFunction::from_fn_projected(&d, |p| (p[0] - offset).abs().powf(alpha));
                let bopts = BarrierOptions::default();
                let barriers = (0..8)
                    .map(|k| {
                        let t = rotation + 2.0 * PI * k as f64 / 8.0;
                        let p = [t.cos(), t.sin(), 0.0, 0.0];
                        let xi = nearest_boundary_node(&d, &p);
                        let res = hoelder_barrier(xi, &phi, alpha, alpha, &d, &g, &bopts);
                        let pin = res.as_ref().map(|(_, v)| (v[xi] - phi[xi]).abs()).unwrap_or(f64::NAN);
                        (xi, p, res.map(|x| x.0), pin)
                    })
                    .collect();
                let u = solve_laplace(&g, &d, &phi);
                let sandwich = u.as_ref().map_err(Clone::clone).and_then(|u| {
                    let gb = global_barrier(&phi, alpha, &d, &g, &bopts)?;
                    let above = d.active().map(|i| gb.lower[i] - u[i]).fold(f64::NEG_INFINITY, f64::max);
                    let below = d.active().map(|i| u[i] - gb.upper[i]).fold(f64::NEG_INFINITY, f64::max);
                    Ok((above, below, gb.k))
                });
                let modulus = u.ok().map(|u| hoelder_modulus(&u, alpha, &d));
                Ok(HolderGrid { h, barriers, sandwich, modulus })
            })
            .collect();
        let mut verdicts = Vec::new();
        let mut table = Table::new("holder_barriers", &["h", "point_x", "point_y", "node", "k", "max_laplacian", "pin_error"]);
        let mut mod_table = Table::new("holder_modulus", &["h", "interior", "boundary", "pairs"]);
        let mut moduli = Vec::new();
        let mut data = Vec::new();
        for grid in grids {
            let grid = grid?;
            let h = grid.h;
            for (xi, p, res, pin) in &grid.barriers {
                let name = format!("barrier h={h} at ({:.3}, {:.3})", p[0], p[1]);
                match res {
                    Ok(spec) => {
                        let slack = 1e-10 * (1.0 + 2.0) / (h * h);
                        let ok = spec.k.is_finite() && spec.max_laplacian <= slack && *pin == 0.0;
                        verdicts.push(Verdict::flag(
                            format!("{name}: finite k, Δ_g v ≤ 0, v(ξ) = φ(ξ)"),
                            ok,
                            format!("k = {:e}, max Δ_g v = {:e}", spec.k, spec.max_laplacian),
                        ));
                        table.push(vec![
                            h.into(),
                            p[0].into(),
                            p[1].into(),
                            (*xi).into(),
                            spec.k.into(),
                            spec.max_laplacian.into(),
                            (*pin).into(),
                        ]);
                    }
                    Err(e) => verdicts.push(err_verdict(name, e)),
                }
            }
            match &grid.sandwich {
                Ok((lo, hi, k)) => {
                    let tol = 1e-6;
                    verdicts.push(Verdict::at_most(format!("global barrier h={h}: lower <= u"), *lo, tol));
                    verdicts.push(Verdict::at_most(format!("global barrier h={h}: u <= upper"), *hi, tol));
                    data.push(serde_json::json!({ "h": h, "lower_excess": lo, "upper_excess": hi, "uniform_k": k }));
                }
                Err(e) => verdicts.push(err_verdict(format!("global barrier h={h}"), e)),
            }
            if let Some(m) = grid.modulus {
                mod_table.push(vec![h.into(), m.interior.into(), m.boundary.into(), m.pairs.into()]);
                moduli.push(m.interior);
            }
        }
        if moduli.len() == 2 {
            let ratio = moduli[1] / moduli[0];
            verdicts.push(Verdict::flag(
                "Hölder-1/2 modulus of the Laplace solution stable under h -> h/2",
                (0.5..=2.0).contains(&ratio),
                format!("ratio {ratio}"),
            ));
        } else {
            verdicts.push(Verdict::flag("Hölder-1/2 modulus of the Laplace solution stable under h -> h/2", false, "laplace solve failed"));
        }
        let data = serde_json::json!({ "offset": offset, "rotation": rotation, "grids": data, "moduli": moduli });
        Ok((verdicts, data, vec![table, mod_table]))
    })
}
