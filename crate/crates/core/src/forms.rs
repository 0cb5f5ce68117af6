//! Discrete form kernel: complex Hessians, Monge-Ampère and mixed densities,
//! ω-psh cone membership, envelopes and the maximum inequality.
//!
//! Convention: `dd^c = i∂∂̄`, so `(ω + dd^c u)^n` has Lebesgue density
//! `2^n n! det(g + H(u))` where `H(u)_{jk} = ∂²u/∂z_j∂z̄_k`.

use crate::error::{Error, Result};
use crate::geometry::{scalar_hessian, GridDomain, HermitianMetricField, Point};
use crate::linalg::{pairwise_sum, volume_factor, Herm};
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

/// Real scalar field on the lattice. Only interior and boundary entries are
/// meaningful; exterior entries are kept at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(domain: &GridDomain) -> Self {
        GridFunction { values: vec![0.0; domain.len()] }
    }

    pub fn constant(domain: &GridDomain, c: f64) -> Self {
        let mut out = Self::zeros(domain);
        for i in domain.active() {
            out.values[i] = c;
        }
        out
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        GridFunction { values }
    }

    /// Samples `f` at the node positions of interior and boundary nodes.
    pub fn from_fn(domain: &GridDomain, f: impl Fn(&Point) -> f64) -> Self {
        let mut out = Self::zeros(domain);
        for i in domain.active() {
            out.values[i] = f(&domain.point(i));
        }
        out
    }

    /// Samples `f` at interior nodes and at the projected boundary points for
    /// boundary nodes. This is how boundary data enters every solver.
    pub fn from_fn_projected(domain: &GridDomain, f: impl Fn(&Point) -> f64) -> Self {
        let mut out = Self::zeros(domain);
        for &i in domain.interior() {
            out.values[i] = f(&domain.point(i));
        }
        for &b in domain.boundary() {
            out.values[b] = f(&domain.project_to_boundary(&domain.point(b)));
        }
        out
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max |u|` over interior and boundary nodes.
    pub fn sup_norm(&self, domain: &GridDomain) -> f64 {
        domain.active().map(|i| self.values[i].abs()).fold(0.0, f64::max)
    }

    pub fn max_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| self.values[i]).fold(f64::INFINITY, f64::min)
    }

    /// Oscillation over the boundary nodes.
    pub fn boundary_osc(&self, domain: &GridDomain) -> f64 {
        if domain.boundary().is_empty() {
            return 0.0;
        }
        self.max_over(domain.boundary()) - self.min_over(domain.boundary())
    }

    /// Oscillation over interior and boundary nodes.
    pub fn osc(&self, domain: &GridDomain) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in domain.active() {
            lo = lo.min(self.values[i]);
            hi = hi.max(self.values[i]);
        }
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    /// `max |self − other|` over the given nodes.
    pub fn max_abs_diff_on(&self, other: &GridFunction, nodes: impl IntoIterator<Item = usize>) -> f64 {
        nodes.into_iter().map(|i| (self.values[i] - other.values[i]).abs()).fold(0.0, f64::max)
    }

    /// `max (other − self)` over `nodes`: how far `self ≥ other` fails.
    pub fn max_shortfall_on(&self, other: &GridFunction, nodes: impl IntoIterator<Item = usize>) -> f64 {
        nodes.into_iter().map(|i| other.values[i] - self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, domain: &GridDomain, f: impl Fn(f64) -> f64) -> GridFunction {
        let mut out = GridFunction::zeros(domain);
        for i in domain.active() {
            out.values[i] = f(self.values[i]);
        }
        out
    }

    pub fn zip_with(&self, other: &GridFunction, domain: &GridDomain, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let mut out = GridFunction::zeros(domain);
        for i in domain.active() {
            out.values[i] = f(self.values[i], other.values[i]);
        }
        out
    }

    /// Copies boundary values from `other`.
    pub fn with_boundary_of(mut self, other: &GridFunction, domain: &GridDomain) -> GridFunction {
        for &b in domain.boundary() {
            self.values[b] = other.values[b];
        }
        self
    }
}

impl Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for GridFunction {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Positive measure: density against Lebesgue measure on interior nodes plus
/// point masses at nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureField {
    density: Vec<f64>,
    atoms: Vec<(usize, f64)>,
    cell_volume: f64,
}

impl MeasureField {
    pub fn zero(domain: &GridDomain) -> Self {
        MeasureField { density: vec![0.0; domain.len()], atoms: Vec::new(), cell_volume: domain.cell_volume() }
    }

    /// Density sampled at interior nodes; negative values are rejected.
    pub fn from_fn(domain: &GridDomain, f: impl Fn(&Point) -> f64) -> Result<Self> {
        let mut density = vec![0.0; domain.len()];
        for &i in domain.interior() {
            let v = f(&domain.point(i));
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("measure density {v} at node {i} is not a finite nonnegative value")));
            }
            density[i] = v;
        }
        Ok(MeasureField { density, atoms: Vec::new(), cell_volume: domain.cell_volume() })
    }

    pub fn from_density(domain: &GridDomain, mut density: Vec<f64>) -> Result<Self> {
        if density.len() != domain.len() {
            return Err(Error::Config("density length does not match the lattice".into()));
        }
        for (i, v) in density.iter_mut().enumerate() {
            if !domain.is_interior(i) {
                *v = 0.0;
            } else if !(*v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("measure density {v} at node {i} is not a finite nonnegative value")));
            }
        }
        Ok(MeasureField { density, atoms: Vec::new(), cell_volume: domain.cell_volume() })
    }

    pub fn with_atom(mut self, domain: &GridDomain, node: usize, mass: f64) -> Result<Self> {
        if !domain.is_interior(node) {
            return Err(Error::Config(format!("atom at node {node} is not an interior node")));
        }
        if !(mass >= 0.0) || !mass.is_finite() {
            return Err(Error::Config(format!("atom mass {mass} must be finite and nonnegative")));
        }
        self.atoms.push((node, mass));
        Ok(self)
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    pub fn has_atom_at(&self, node: usize) -> bool {
        self.atoms.iter().any(|&(i, _)| i == node)
    }

    /// Density with every atom smeared over its cell (`mass / h^{2n}`).
    pub fn effective_density(&self) -> Vec<f64> {
        let mut out = self.density.clone();
        for &(i, m) in &self.atoms {
            out[i] += m / self.cell_volume;
        }
        out
    }

    /// `h^{2n} Σ density + Σ atoms`, pairwise summed over interior nodes.
    pub fn total_mass(&self, domain: &GridDomain) -> f64 {
        let vals: Vec<f64> = domain.interior().iter().map(|&i| self.density[i]).collect();
        self.cell_volume * pairwise_sum(&vals) + self.atoms.iter().map(|a| a.1).sum::<f64>()
    }

    /// Mass of the restriction to a node set.
    pub fn mass_on(&self, nodes: &[usize]) -> f64 {
        let vals: Vec<f64> = nodes.iter().map(|&i| self.density[i]).collect();
        let atom: f64 = self.atoms.iter().filter(|(i, _)| nodes.contains(i)).map(|a| a.1).sum();
        self.cell_volume * pairwise_sum(&vals) + atom
    }

    pub fn sup_density(&self) -> f64 {
        self.density.iter().copied().fold(0.0, f64::max)
    }

    /// Multiplies the density (and atoms) pointwise by `f ≥ 0`.
    pub fn scaled_by(&self, f: impl Fn(usize) -> f64) -> MeasureField {
        let density = self.density.iter().enumerate().map(|(i, &d)| if d == 0.0 { 0.0 } else { d * f(i) }).collect();
        let atoms = self.atoms.iter().map(|&(i, m)| (i, m * f(i))).collect();
        MeasureField { density, atoms, cell_volume: self.cell_volume }
    }

    pub fn add(&self, other: &MeasureField) -> MeasureField {
        let density = self.density.iter().zip(&other.density).map(|(a, b)| a + b).collect();
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        MeasureField { density, atoms, cell_volume: self.cell_volume }
    }

    /// Node-wise `self ≤ other` (atoms compared as cell masses).
    pub fn dominated_by(&self, other: &MeasureField) -> bool {
        let a = self.effective_density();
        let b = other.effective_density();
        a.iter().zip(&b).all(|(x, y)| *x <= *y * (1.0 + 1e-12) + 1e-300)
    }
}

/// `H(u)` at every interior node; `None` elsewhere.
#[derive(Clone, Debug)]
pub struct HermitianHessianField {
    pub entries: Vec<Option<Herm>>,
}

/// Default cone tolerance, `10⁻⁸·λ_max(g)` (with a unit floor for the
/// degenerate zero form).
pub fn default_tol_cone(g: &HermitianMetricField) -> f64 {
    1e-8 * g.lambda_max().max(1.0)
}

pub(crate) fn hessian_at(domain: &GridDomain, u: &GridFunction, idx: usize) -> Herm {
    scalar_hessian(domain, idx, |j| u.values[j])
}

/// `g + H(u)` at an interior node.
pub(crate) fn form_at(domain: &GridDomain, g: &HermitianMetricField, u: &GridFunction, idx: usize) -> Herm {
    g.at(idx) + hessian_at(domain, u, idx)
}

/// Centered complex Hessian at interior nodes; exact on real quadratics.
pub fn ddc_hessian(u: &GridFunction, domain: &GridDomain) -> Result<HermitianHessianField> {
    if u.len() != domain.len() {
        return Err(Error::DomainInvariant { node: 0, reason: "grid function size mismatch".into() });
    }
    let mut entries = vec![None; domain.len()];
    for &i in domain.interior() {
        entries[i] = Some(hessian_at(domain, u, i));
    }
    Ok(HermitianHessianField { entries })
}

/// Monge-Ampère density with the non-ω-psh nodes it clipped to zero.
#[derive(Clone, Debug)]
pub struct MaDensity {
    pub measure: MeasureField,
    pub non_psh: Vec<usize>,
}

/// `2^n n! det(g + H(u))` on the cone; zero (and flagged) where the least
/// eigenvalue is below `−tol_cone`.
pub fn ma_density(u: &GridFunction, g: &HermitianMetricField, domain: &GridDomain) -> MaDensity {
    ma_density_with_tol(u, g, domain, default_tol_cone(g))
}

pub fn ma_density_with_tol(u: &GridFunction, g: &HermitianMetricField, domain: &GridDomain, tol_cone: f64) -> MaDensity {
    let factor = volume_factor(domain.n());
    let mut density = vec![0.0; domain.len()];
    let mut non_psh = Vec::new();
    for &i in domain.interior() {
        let m = form_at(domain, g, u, i);
        if m.lambda_min() < -tol_cone {
            non_psh.push(i);
        } else {
            density[i] = (factor * m.det()).max(0.0);
        }
    }
    MaDensity {
        measure: MeasureField { density, atoms: Vec::new(), cell_volume: domain.cell_volume() },
        non_psh,
    }
}

/// Density of `ω_u^k ∧ ω^{n−k}` via the mixed determinant.
pub fn mixed_density(u: &GridFunction, k: usize, g: &HermitianMetricField, domain: &GridDomain) -> Result<MeasureField> {
    let n = domain.n();
    if k > n {
        return Err(Error::Config(format!("mixed degree k = {k} outside 0..={n}")));
    }
    let factor = volume_factor(n);
    let tol = default_tol_cone(g);
    let mut density = vec![0.0; domain.len()];
    for &i in domain.interior() {
        let gi = g.at(i);
        let value = if k == 0 {
            gi.det()
        } else {
            let m = gi + hessian_at(domain, u, i);
            if m.lambda_min() < -tol {
                0.0
            } else if k == n {
                m.det()
            } else {
                m.mixed_det(&gi)
            }
        };
        density[i] = (factor * value).max(0.0);
    }
    Ok(MeasureField { density, atoms: Vec::new(), cell_volume: domain.cell_volume() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeReport {
    pub is_psh: bool,
    /// Node with the smallest least eigenvalue of `g + H(u)`.
    pub worst_node: Option<usize>,
    pub worst_eigenvalue: f64,
}

/// True iff `λ_min(g + H(u)) ≥ −tol` at every interior node.
pub fn is_omega_psh(u: &GridFunction, g: &HermitianMetricField, domain: &GridDomain, tol: f64) -> ConeReport {
    let mut worst_node = None;
    let mut worst = f64::INFINITY;
    for &i in domain.interior() {
        let lm = form_at(domain, g, u, i).lambda_min();
        if lm < worst {
            worst = lm;
            worst_node = Some(i);
        }
    }
    ConeReport { is_psh: worst >= -tol, worst_node, worst_eigenvalue: worst }
}

#[derive(Clone, Copy, Debug)]
pub struct EnvelopeOptions {
    /// Stop when a sweep changes no value by more than this.
    pub tol_env: f64,
    pub max_sweeps: usize,
    /// Over-relaxation factor in `[1, 2)`.
    pub relaxation: f64,
}

impl EnvelopeOptions {
    pub fn for_function(u: &GridFunction, domain: &GridDomain) -> Self {
        let n_axis = domain.interior_nodes_on_axis().max(2) as f64;
        EnvelopeOptions {
            tol_env: 1e-8 * u.osc(domain).max(1e-12),
            max_sweeps: 200_000,
            relaxation: 2.0 / (1.0 + (std::f64::consts::PI / n_axis).sin()),
        }
    }
}

/// Largest `v ≤ u` (boundary values kept) that is ω-psh at interior nodes.
///
/// Projected over-relaxed sweeps: each interior value moves toward the largest
/// center value keeping `g + H(v) ⪰ 0` and is then clipped by the obstacle `u`.
pub fn psh_envelope(u: &GridFunction, g: &HermitianMetricField, domain: &GridDomain) -> Result<GridFunction> {
    psh_envelope_with(u, g, domain, EnvelopeOptions::for_function(u, domain))
}

pub fn psh_envelope_with(
    u: &GridFunction,
    g: &HermitianMetricField,
    domain: &GridDomain,
    opts: EnvelopeOptions,
) -> Result<GridFunction> {
    let h2 = domain.h() * domain.h();
    let mut v = u.clone();
    let mut change = f64::INFINITY;
    for _sweep in 0..opts.max_sweeps {
        change = 0.0;
        for &i in domain.interior() {
            let c = v.values[i];
            let c_max = c + h2 * form_at(domain, g, &v, i).lambda_min();
            let next = (c + opts.relaxation * (c_max - c)).min(u.values[i]);
            change = change.max((next - c).abs());
            v.values[i] = next;
        }
        if change <= opts.tol_env {
            return Ok(v);
        }
    }
    Err(Error::IterationLimit { solver: "psh_envelope", iterations: opts.max_sweeps, residual: change })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxSideReport {
    pub nodes: usize,
    /// MA mass of `max{v₁, v₂}` on the cell.
    pub mass_of_max: f64,
    /// MA mass of the dominating function on the cell.
    pub mass_of_side: f64,
    /// Part of `mass_of_side` carried by nodes whose stencil reaches outside
    /// the cell; the admissible discretization defect.
    pub interface_mass: f64,
    pub defect: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxInequalityReport {
    pub first_dominates: MaxSideReport,
    pub second_dominates: MaxSideReport,
    pub holds: bool,
}

/// Compares `(ω + dd^c max{v₁, v₂})^n` with `ω_{v₁}^n` on `{v₁ > v₂ + tol}` and
/// with `ω_{v₂}^n` on `{v₁ < v₂ − tol}`, in mass.
pub fn demailly_max_check(
    v1: &GridFunction,
    v2: &GridFunction,
    g: &HermitianMetricField,
    domain: &GridDomain,
    partition_tol: f64,
) -> MaxInequalityReport {
    let w = v1.zip_with(v2, domain, f64::max);
    let dw = ma_density(&w, g, domain).measure;
    let d1 = ma_density(v1, g, domain).measure;
    let d2 = ma_density(v2, g, domain).measure;
    let side = |pick_first: bool| -> MaxSideReport {
        let in_cell = |i: usize| {
            if pick_first {
                v1.values[i] > v2.values[i] + partition_tol
            } else {
                v1.values[i] < v2.values[i] - partition_tol
            }
        };
        let cell: Vec<usize> = domain.interior().iter().copied().filter(|&i| in_cell(i)).collect();
        let band: Vec<usize> = cell
            .iter()
            .copied()
            .filter(|&i| domain.stencil_neighbors(i).into_iter().any(|q| !in_cell(q)))
            .collect();
        let side_measure = if pick_first { &d1 } else { &d2 };
        let mass_of_max = dw.mass_on(&cell);
        let mass_of_side = side_measure.mass_on(&cell);
        let interface_mass = side_measure.mass_on(&band);
        let defect = (mass_of_side - mass_of_max).max(0.0);
        let slack = 1e-12 * mass_of_side.abs().max(1.0);
        MaxSideReport {
            nodes: cell.len(),
            mass_of_max,
            mass_of_side,
            interface_mass,
            defect,
            holds: defect <= interface_mass + slack,
        }
    };
    let first_dominates = side(true);
    let second_dominates = side(false);
    let holds = first_dominates.holds && second_dominates.holds;
    MaxInequalityReport { first_dominates, second_dominates, holds }
}
