//! Run configuration: TOML, every table closed to unknown keys.
//!
//! ```toml
//! seed = 7
//!
//! [domain]
//! kind = "ball"          # or "shell" (with r_in, r_out)
//! radius = 1.0
//! h = [0.2, 0.1]         # one step or a refinement list
//! n = 2
//!
//! [metric]
//! kind = "identity"      # "scaled" (scale), "conformal_exp" (c)
//!
//! [exact]                # optional manufactured solution a|z|² + Σ linear·x + offset
//! a = 1.0
//!
//! [measure]
//! kind = "manufactured"  # "zero", "constant" (value), "bumps" (bumps), atoms = [...]
//!
//! [rhs]
//! kind = "constant"      # "exponential" (lambda, t_max), "tabulated" (knots, values)
//! value = 1.0
//!
//! [boundary]
//! kind = "manufactured"  # "zero", "constant", "linear", "hoelder"
//!
//! [subsolution]
//! kind = "none"          # "manufactured", "defining_function", "constant" (value)
//!
//! [solver]
//! method = "fixed_rhs"   # picard, perron, maximal, laplace, exponential, lambda_study
//!
//! [tolerances]           # any of tol_cone tol_env tol_fix tol_cmp tol_ma tol_b tol_lin max_sweeps max_outer
//!
//! [verify]
//! error_factor = 5.0
//! min_ratio = 1.5
//!
//! [output]
//! dir = "out/manufactured"
//! full_dump = false
//! ```
//!
//! Tolerance defaults may also be overridden through `HMA_TOL_CONE`,
//! `HMA_TOL_ENV`, `HMA_TOL_FIX`, `HMA_TOL_CMP`, `HMA_TOL_MA`, `HMA_TOL_B`,
//! `HMA_TOL_LIN`, `HMA_MAX_SWEEPS` and `HMA_MAX_OUTER`; values in the file win.

use crate::error::{CliError, Result};
use hermitian_ma::Tolerances;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub exact: Option<ExactSpec>,
    #[serde(default)]
    pub measure: MeasureSpec,
    #[serde(default)]
    pub rhs: RhsSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub subsolution: SubsolutionSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Steps {
    One(f64),
    Many(Vec<f64>),
}

impl Steps {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Steps::One(h) => vec![*h],
            Steps::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Ball,
    Shell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub r_in: Option<f64>,
    #[serde(default)]
    pub r_out: Option<f64>,
    pub h: Steps,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Identity,
    Scaled,
    ConformalExp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default)]
    pub kind: MetricKind,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
}

/// `u* = a|z|² + Σ linear_k x_k + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactSpec {
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

impl ExactSpec {
    pub fn eval(&self, p: &[f64; 4], dim: usize) -> f64 {
        let r2: f64 = p[..dim].iter().map(|x| x * x).sum();
        let lin: f64 = self.linear.iter().zip(p.iter()).map(|(c, x)| c * x).sum();
        self.a * r2 + lin + self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    #[default]
    Zero,
    Constant,
    Bumps,
    Manufactured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub kind: MeasureKind,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub bumps: Option<usize>,
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    #[default]
    Constant,
    Exponential,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RhsSpec {
    #[serde(default)]
    pub kind: RhsKind,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub knots: Vec<f64>,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    #[default]
    Zero,
    Constant,
    Linear,
    Hoelder,
    Manufactured,
}

/// `constant`: `value`; `linear`: `value + Σ coefficients_k x_k`;
/// `hoelder`: `value · |x₁ − offset|^alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default)]
    pub kind: BoundaryKind,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub offset: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubsolutionKind {
    #[default]
    None,
    Manufactured,
    DefiningFunction,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SubsolutionSpec {
    #[serde(default)]
    pub kind: SubsolutionKind,
    #[serde(default)]
    pub value: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Picard,
    Perron,
    Maximal,
    Laplace,
    FixedRhs,
    Exponential,
    LambdaStudy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: Method,
    /// `exponential`: one solve per entry; `lambda_study`: the decreasing sequence.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub cover_radius: Option<f64>,
    #[serde(default)]
    pub cover_spacing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default)]
    pub tol_cone: Option<f64>,
    #[serde(default)]
    pub tol_env: Option<f64>,
    #[serde(default)]
    pub tol_fix: Option<f64>,
    #[serde(default)]
    pub tol_cmp: Option<f64>,
    #[serde(default)]
    pub tol_ma: Option<f64>,
    #[serde(default)]
    pub tol_b: Option<f64>,
    #[serde(default)]
    pub tol_lin: Option<f64>,
    #[serde(default)]
    pub max_sweeps: Option<usize>,
    #[serde(default)]
    pub max_outer: Option<usize>,
}

impl ToleranceOverrides {
    /// Overrides read from `HMA_TOL_*` / `HMA_MAX_*`.
    pub fn from_env() -> Result<Self> {
        fn real(name: &str) -> Result<Option<f64>> {
            match std::env::var(name) {
                Ok(s) => s
                    .trim()
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| CliError::Config(format!("{name} = {s:?} is not a number"))),
                Err(_) => Ok(None),
            }
        }
        fn count(name: &str) -> Result<Option<usize>> {
            match std::env::var(name) {
                Ok(s) => s
                    .trim()
                    .parse::<usize>()
                    .map(Some)
                    .map_err(|_| CliError::Config(format!("{name} = {s:?} is not a count"))),
                Err(_) => Ok(None),
            }
        }
        Ok(ToleranceOverrides {
            tol_cone: real("HMA_TOL_CONE")?,
            tol_env: real("HMA_TOL_ENV")?,
            tol_fix: real("HMA_TOL_FIX")?,
            tol_cmp: real("HMA_TOL_CMP")?,
            tol_ma: real("HMA_TOL_MA")?,
            tol_b: real("HMA_TOL_B")?,
            tol_lin: real("HMA_TOL_LIN")?,
            max_sweeps: count("HMA_MAX_SWEEPS")?,
            max_outer: count("HMA_MAX_OUTER")?,
        })
    }

    /// `self` entries win over `other`.
    pub fn or(&self, other: &Self) -> Self {
        ToleranceOverrides {
            tol_cone: self.tol_cone.or(other.tol_cone),
            tol_env: self.tol_env.or(other.tol_env),
            tol_fix: self.tol_fix.or(other.tol_fix),
            tol_cmp: self.tol_cmp.or(other.tol_cmp),
            tol_ma: self.tol_ma.or(other.tol_ma),
            tol_b: self.tol_b.or(other.tol_b),
            tol_lin: self.tol_lin.or(other.tol_lin),
            max_sweeps: self.max_sweeps.or(other.max_sweeps),
            max_outer: self.max_outer.or(other.max_outer),
        }
    }

    pub fn apply(&self, mut t: Tolerances) -> Result<Tolerances> {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { t.$f = v; })* };
        }
        set!(tol_cone, tol_env, tol_fix, tol_cmp, tol_ma, tol_b, tol_lin, max_sweeps, max_outer);
        t.validate().map_err(CliError::from_setup)?;
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Verdict threshold for `sup |u − u*| ≤ error_factor · h`.
    #[serde(default = "default_error_factor")]
    pub error_factor: f64,
    /// Smallest accepted error ratio between consecutive refinements.
    #[serde(default = "default_min_ratio")]
    pub min_ratio: f64,
    /// Suites to run after the solve, with the config seed.
    #[serde(default)]
    pub suites: Vec<String>,
}

fn default_error_factor() -> f64 {
    5.0
}

fn default_min_ratio() -> f64 {
    1.5
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec { error_factor: default_error_factor(), min_ratio: default_min_ratio(), suites: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<String>,
    /// Write every node of the solution, not only the plane slice.
    #[serde(default)]
    pub full_dump: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = &self.domain;
        if d.n != 1 && d.n != 2 {
            return bad(format!("domain.n must be 1 or 2, got {}", d.n));
        }
        let steps = d.h.to_vec();
        if steps.is_empty() || steps.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return bad("domain.h must be positive".into());
        }
        match d.kind {
            DomainKind::Ball => {
                if d.r_in.is_some() || d.r_out.is_some() {
                    return bad("ball domains take `radius`, not r_in/r_out".into());
                }
            }
            DomainKind::Shell => {
                if d.radius.is_some() {
                    return bad("shell domains take r_in/r_out, not `radius`".into());
                }
                if d.r_in.is_none() || d.r_out.is_none() {
                    return bad("shell domains need r_in and r_out".into());
                }
            }
        }
        let m = &self.metric;
        match m.kind {
            MetricKind::Scaled if !m.scale.is_some_and(|s| s > 0.0) => return bad("metric.scale must be positive".into()),
            MetricKind::ConformalExp if !m.c.is_some_and(f64::is_finite) => return bad("metric.c is required".into()),
            _ => {}
        }
        if let Some(e) = &self.exact {
            if e.linear.len() > 2 * d.n {
                return bad(format!("exact.linear has more than {} entries", 2 * d.n));
            }
        }
        let mu = &self.measure;
        match mu.kind {
            MeasureKind::Constant if !mu.value.is_some_and(|v| v >= 0.0) => {
                return bad("measure.value must be nonnegative".into())
            }
            MeasureKind::Manufactured if self.exact.is_none() => return bad("a manufactured measure needs [exact]".into()),
            _ => {}
        }
        for a in &mu.atoms {
            if a.point.len() != 2 * d.n || !(a.mass >= 0.0) {
                return bad("atoms need a point with 2n coordinates and a nonnegative mass".into());
            }
        }
        let r = &self.rhs;
        match r.kind {
            RhsKind::Constant if r.value.is_some_and(|v| v < 0.0) => return bad("rhs.value must be nonnegative".into()),
            RhsKind::Exponential if r.lambda.is_none() && self.solver.lambdas.is_empty() => {
                return bad("exponential rhs needs rhs.lambda or solver.lambdas".into())
            }
            RhsKind::Tabulated if r.knots.len() != r.values.len() || r.knots.is_empty() => {
                return bad("tabulated rhs needs matching, nonempty knots and values".into())
            }
            _ => {}
        }
        let b = &self.boundary;
        match b.kind {
            BoundaryKind::Manufactured if self.exact.is_none() => return bad("manufactured boundary data need [exact]".into()),
            BoundaryKind::Hoelder if !b.alpha.is_some_and(|a| a > 0.0 && a <= 1.0) => {
                return bad("boundary.alpha must lie in (0, 1]".into())
            }
            BoundaryKind::Linear if b.coefficients.len() > 2 * d.n => {
                return bad(format!("boundary.coefficients has more than {} entries", 2 * d.n))
            }
            _ => {}
        }
        match self.subsolution.kind {
            SubsolutionKind::Manufactured if self.exact.is_none() => {
                return bad("a manufactured subsolution needs [exact]".into())
            }
            SubsolutionKind::Constant if self.subsolution.value.is_none() => {
                return bad("subsolution.value is required".into())
            }
            _ => {}
        }
        let s = &self.solver;
        match s.method {
            Method::Exponential if r.kind != RhsKind::Exponential => {
                return bad("method = exponential needs rhs.kind = exponential".into())
            }
            Method::LambdaStudy => {
                if s.lambdas.len() < 2 {
                    return bad("lambda_study needs at least two lambdas".into());
                }
                if self.subsolution.kind == SubsolutionKind::None {
                    return bad("lambda_study needs a subsolution".into());
                }
            }
            _ => {}
        }
        if s.lambdas.iter().any(|l| !(*l > 0.0)) {
            return bad("lambdas must be positive".into());
        }
        if s.cover_radius.is_some_and(|r| !(r > 0.0)) || s.cover_spacing.is_some_and(|r| !(r > 0.0)) {
            return bad("cover radius and spacing must be positive".into());
        }
        if !(self.verify.error_factor > 0.0) || !(self.verify.min_ratio > 0.0) {
            return bad("verify thresholds must be positive".into());
        }
        for name in &self.verify.suites {
            crate::suites::SuiteName::parse(name)?;
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tol_cone", t.tol_cone),
            ("tol_env", t.tol_env),
            ("tol_fix", t.tol_fix),
            ("tol_cmp", t.tol_cmp),
            ("tol_ma", t.tol_ma),
            ("tol_b", t.tol_b),
            ("tol_lin", t.tol_lin),
        ] {
            if v.is_some_and(|x| !(x > 0.0 && x.is_finite())) {
                return bad(format!("tolerances.{name} must be positive"));
            }
        }
        if t.max_sweeps == Some(0) || t.max_outer == Some(0) {
            return bad("iteration limits must be positive".into());
        }
        Ok(())
    }
}
