//! Tolerance bundle shared by the solvers and the verification layer.

use crate::forms::GridFunction;
use crate::geometry::{GridDomain, HermitianMetricField};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Least-eigenvalue slack in the ω-psh cone test.
    pub tol_cone: f64,
    /// Sweep-change threshold for envelope projections.
    pub tol_env: f64,
    /// Fixed-point threshold for outer iterations (Picard, Perron).
    pub tol_fix: f64,
    /// Node-wise slack when comparing two computed solutions.
    pub tol_cmp: f64,
    /// Density slack for Monge-Ampère residuals.
    pub tol_ma: f64,
    /// Boundary trace slack.
    pub tol_b: f64,
    /// Relative residual target for the linear solves.
    pub tol_lin: f64,
    pub max_sweeps: usize,
    pub max_outer: usize,
}

impl Tolerances {
    /// Defaults scaled to a problem: `osc` is the oscillation of the
    /// boundary data and `sup_density` the largest target density.
    pub fn for_problem(domain: &GridDomain, g: &HermitianMetricField, phi: &GridFunction, sup_density: f64) -> Self {
        let osc = phi.boundary_osc(domain);
        let h = domain.h();
        let tol_fix = 1e-6 * osc + 1e-10;
        Tolerances {
            tol_cone: 1e-8 * g.lambda_max().max(1.0),
            tol_env: 1e-8 * osc.max(1e-4),
            tol_fix,
            tol_cmp: (10.0 * tol_fix).max(5.0 * h * osc.max(1.0)),
            tol_ma: 1e-4 * (sup_density + 1.0),
            tol_b: 2.0 * h,
            tol_lin: 1e-8,
            max_sweeps: 200_000,
            max_outer: 500,
        }
    }

    /// Inner (per-sweep) stopping threshold of the Gauss-Seidel solvers.
    pub fn tol_sweep(&self) -> f64 {
        0.1 * self.tol_fix
    }

    pub fn validate(&self) -> crate::Result<()> {
        let all = [
            ("tol_cone", self.tol_cone),
            ("tol_env", self.tol_env),
            ("tol_fix", self.tol_fix),
            ("tol_cmp", self.tol_cmp),
            ("tol_ma", self.tol_ma),
            ("tol_b", self.tol_b),
            ("tol_lin", self.tol_lin),
        ];
        for (name, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(crate::Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.max_sweeps == 0 || self.max_outer == 0 {
            return Err(crate::Error::Config("iteration limits must be positive".into()));
        }
        Ok(())
    }
}
