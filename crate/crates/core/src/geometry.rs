//! Lattice domains in ℂⁿ, defining functions and Hermitian background metrics.
//!
//! Real coordinates are ordered `(x₁, y₁, x₂, y₂)` with `z_j = x_j + i y_j`.
//! Every domain lives on a symmetric cubic lattice `{ i·h : |i| ≤ K }^{2n}`;
//! nodes are classified as interior (the full Hessian stencil is available),
//! boundary (stencil neighbours of interior nodes that are not interior
//! themselves) or exterior.

use crate::error::{Error, Result};
use crate::forms::GridFunction;
use crate::linalg::Herm;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub type Point = [f64; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

/// The analytic region a `GridDomain` discretizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Ball { radius: f64 },
    Shell { r_in: f64, r_out: f64 },
    /// Sub-domain of a parent grid cut out by a coordinate ball; used for
    /// local lifts. Boundary data always comes from a grid function.
    SubBall { center: Point, radius: f64 },
}

/// Which boundary sphere a boundary point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryComponent {
    Outer,
    Inner,
}

#[derive(Clone, Debug)]
pub struct GridDomain {
    n: usize,
    h: f64,
    half: usize,
    side: usize,
    strides: [usize; 4],
    shape: Shape,
    class: Vec<NodeClass>,
    boundary_distance: Vec<f64>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    axis_offsets: Vec<isize>,
    /// `(axis a, axis b)` pairs that need the 4-point mixed stencil.
    mixed_pairs: Vec<(usize, usize)>,
}

/// Real-axis pairs `(x_j or y_j, x_k or y_k)`, `j < k`, entering the
/// off-diagonal Hessian entries. Empty for `n = 1`.
fn mixed_axis_pairs(n: usize) -> Vec<(usize, usize)> {
    if n == 2 {
        vec![(0, 2), (0, 3), (1, 2), (1, 3)]
    } else {
        Vec::new()
    }
}

fn norm(p: &Point, dim: usize) -> f64 {
    p[..dim].iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(p: &Point, q: &Point, dim: usize) -> f64 {
    p[..dim].iter().zip(&q[..dim]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl GridDomain {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of real axes, `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.class[idx] == NodeClass::Interior
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.class[idx] == NodeClass::Boundary
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Interior followed by boundary nodes.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.interior.iter().chain(self.boundary.iter()).copied()
    }

    pub fn boundary_distance(&self, idx: usize) -> f64 {
        self.boundary_distance[idx]
    }

    /// Lattice volume element `h^{2n}`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn axis_offsets(&self) -> &[isize] {
        &self.axis_offsets
    }

    /// Lattice nodes per real axis.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn mixed_pairs(&self) -> &[(usize, usize)] {
        &self.mixed_pairs
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Index of the node shifted by `steps` along `axis` (no bounds check
    /// beyond the lattice; callers only shift nodes that have the stencil).
    pub fn shifted(&self, idx: usize, axis: usize, steps: isize) -> usize {
        (idx as isize + steps * self.strides[axis] as isize) as usize
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 4] {
        let mut out = [0usize; 4];
        let mut rest = idx;
        for slot in out.iter_mut().take(self.dim()) {
            *slot = rest % self.side;
            rest /= self.side;
        }
        out
    }

    pub fn index_of(&self, mi: &[usize; 4]) -> usize {
        (0..self.dim()).map(|a| mi[a] * self.strides[a]).sum()
    }

    pub fn point(&self, idx: usize) -> Point {
        let mi = self.multi_index(idx);
        let mut p = [0.0; 4];
        for a in 0..self.dim() {
            p[a] = (mi[a] as f64 - self.half as f64) * self.h;
        }
        p
    }

    /// Nearest lattice node to `p` (clamped to the lattice).
    pub fn nearest_node(&self, p: &Point) -> usize {
        let mut mi = [0usize; 4];
        for a in 0..self.dim() {
            let i = (p[a] / self.h).round() as isize + self.half as isize;
            mi[a] = i.clamp(0, self.side as isize - 1) as usize;
        }
        self.index_of(&mi)
    }

    pub fn norm(&self, p: &Point) -> f64 {
        norm(p, self.dim())
    }

    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        dist(p, q, self.dim())
    }

    /// Closest point of the analytic boundary. Sub-ball domains return `p`.
    pub fn project_to_boundary(&self, p: &Point) -> Point {
        let dim = self.dim();
        let r = norm(p, dim);
        let scale_to = |target: f64| -> Point {
            let mut q = [0.0; 4];
            if r == 0.0 {
                q[0] = target;
            } else {
                for a in 0..dim {
                    q[a] = p[a] * target / r;
                }
            }
            q
        };
        match self.shape {
            Shape::Ball { radius } => scale_to(radius),
            Shape::Shell { r_in, r_out } => {
                if (r - r_in).abs() <= (r_out - r).abs() {
                    scale_to(r_in)
                } else {
                    scale_to(r_out)
                }
            }
            Shape::SubBall { .. } => *p,
        }
    }

    pub fn boundary_component(&self, p: &Point) -> BoundaryComponent {
        match self.shape {
            Shape::Shell { r_in, r_out } => {
                let r = norm(p, self.dim());
                if (r - r_in).abs() <= (r_out - r).abs() {
                    BoundaryComponent::Inner
                } else {
                    BoundaryComponent::Outer
                }
            }
            _ => BoundaryComponent::Outer,
        }
    }

    /// Local defining function of the boundary component nearest to `anchor`,
    /// evaluated at `p`: negative inside, zero on that sphere.
    pub fn local_defining_value(&self, anchor: &Point, p: &Point) -> f64 {
        let r2: f64 = p[..self.dim()].iter().map(|x| x * x).sum();
        match self.shape {
            Shape::Ball { radius } => r2 - radius * radius,
            Shape::Shell { r_in, r_out } => match self.boundary_component(anchor) {
                BoundaryComponent::Outer => r2 - r_out * r_out,
                BoundaryComponent::Inner => r_in * r_in - r2,
            },
            Shape::SubBall { center, radius } => {
                dist(p, &center, self.dim()).powi(2) - radius * radius
            }
        }
    }

    /// All stencil neighbours of a node (axis ±, and the mixed diagonals).
    pub fn stencil_neighbors(&self, idx: usize) -> Vec<usize> {
        stencil_offsets(self.n, &self.strides)
            .into_iter()
            .map(|o| (idx as isize + o) as usize)
            .collect()
    }

    /// Largest number of interior nodes on a lattice line parallel to `x₁`.
    pub fn interior_nodes_on_axis(&self) -> usize {
        let mut counts = vec![0usize; self.len() / self.side];
        for &i in &self.interior {
            counts[i / self.side] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    /// True when the interior is connected through axis neighbours.
    pub fn interior_connected(&self) -> bool {
        let Some(&start) = self.interior.first() else {
            return false;
        };
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 1usize;
        while let Some(p) = queue.pop_front() {
            for &o in &self.axis_offsets {
                let q = (p as isize + o) as usize;
                if self.is_interior(q) && !seen[q] {
                    seen[q] = true;
                    count += 1;
                    queue.push_back(q);
                }
            }
        }
        count == self.interior.len()
    }

    /// Connected components of the boundary node set under full lattice
    /// adjacency (all `3^{2n} − 1` neighbours).
    pub fn boundary_components(&self) -> usize {
        let dim = self.dim();
        let mut offsets = Vec::new();
        let total = 3usize.pow(dim as u32);
        for code in 0..total {
            let mut c = code;
            let mut off = 0isize;
            let mut zero = true;
            for a in 0..dim {
                let step = (c % 3) as isize - 1;
                c /= 3;
                if step != 0 {
                    zero = false;
                }
                off += step * self.strides[a] as isize;
            }
            if !zero {
                offsets.push(off);
            }
        }
        let mut seen = vec![false; self.len()];
        let mut components = 0;
        for &b in &self.boundary {
            if seen[b] {
                continue;
            }
            components += 1;
            seen[b] = true;
            let mut queue = VecDeque::from([b]);
            while let Some(p) = queue.pop_front() {
                for &o in &offsets {
                    let q = p as isize + o;
                    if q < 0 || q as usize >= self.len() {
                        continue;
                    }
                    let q = q as usize;
                    if self.is_boundary(q) && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        components
    }

    /// Sub-domain cut out by the ball `B(center, radius)`: interior nodes of
    /// `self` strictly inside the ball become interior, their stencil
    /// neighbours outside that set become boundary.
    pub fn sub_ball(&self, center: Point, radius: f64) -> GridDomain {
        let dim = self.dim();
        let inside: Vec<bool> = (0..self.len())
            .map(|i| self.is_interior(i) && dist(&self.point(i), &center, dim) < radius)
            .collect();
        let mut class = vec![NodeClass::Exterior; self.len()];
        let mut interior = Vec::new();
        for (i, &flag) in inside.iter().enumerate() {
            if flag {
                class[i] = NodeClass::Interior;
                interior.push(i);
            }
        }
        let offsets = stencil_offsets(self.n, &self.strides);
        let mut boundary = Vec::new();
        for &i in &interior {
            for &o in &offsets {
                let q = (i as isize + o) as usize;
                if class[q] == NodeClass::Exterior {
                    class[q] = NodeClass::Boundary;
                    boundary.push(q);
                }
            }
        }
        boundary.sort_unstable();
        let boundary_distance = (0..self.len())
            .map(|i| (radius - dist(&self.point(i), &center, dim)).abs())
            .collect();
        GridDomain {
            n: self.n,
            h: self.h,
            half: self.half,
            side: self.side,
            strides: self.strides,
            shape: Shape::SubBall { center, radius },
            class,
            boundary_distance,
            interior,
            boundary,
            axis_offsets: self.axis_offsets.clone(),
            mixed_pairs: self.mixed_pairs.clone(),
        }
    }
}

fn stencil_offsets(n: usize, strides: &[usize; 4]) -> Vec<isize> {
    let mut out = Vec::new();
    for a in 0..2 * n {
        out.push(strides[a] as isize);
        out.push(-(strides[a] as isize));
    }
    for (a, b) in mixed_axis_pairs(n) {
        let (sa, sb) = (strides[a] as isize, strides[b] as isize);
        out.extend_from_slice(&[sa + sb, sa - sb, -sa + sb, -sa - sb]);
    }
    out
}

fn build_domain(
    n: usize,
    h: f64,
    extent: f64,
    shape: Shape,
    inside: impl Fn(&Point) -> bool,
    distance: impl Fn(&Point) -> f64,
) -> Result<GridDomain> {
    if n != 1 && n != 2 {
        return Err(Error::Config(format!("complex dimension {n} unsupported (n ∈ {{1, 2}})")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("spacing must be positive, got {h}")));
    }
    let dim = 2 * n;
    let half = (extent / h - 1e-9).ceil() as usize;
    let side = 2 * half + 1;
    let total = side.checked_pow(dim as u32).filter(|t| *t <= 50_000_000).ok_or_else(|| {
        Error::Config(format!("lattice with {side}^{dim} nodes is too large"))
    })?;
    let mut strides = [0usize; 4];
    let mut s = 1;
    for stride in strides.iter_mut().take(dim) {
        *stride = s;
        s *= side;
    }
    let point = |idx: usize| -> Point {
        let mut p = [0.0; 4];
        let mut rest = idx;
        for slot in p.iter_mut().take(dim) {
            *slot = ((rest % side) as f64 - half as f64) * h;
            rest /= side;
        }
        p
    };
    let on_edge = |idx: usize| {
        let mut rest = idx;
        (0..dim).any(|_| {
            let k = rest % side;
            rest /= side;
            k == 0 || k == side - 1
        })
    };
    let inside_flags: Vec<bool> = (0..total).map(|i| !on_edge(i) && inside(&point(i))).collect();
    let offsets = stencil_offsets(n, &strides);
    let mut class = vec![NodeClass::Exterior; total];
    let mut interior = Vec::new();
    for i in 0..total {
        if !inside_flags[i] {
            continue;
        }
        let all = offsets.iter().all(|&o| {
            let q = i as isize + o;
            q >= 0 && (q as usize) < total && inside_flags[q as usize]
        });
        if all {
            class[i] = NodeClass::Interior;
            interior.push(i);
        }
    }
    let mut boundary = Vec::new();
    for &i in &interior {
        for &o in &offsets {
            let q = (i as isize + o) as usize;
            if class[q] == NodeClass::Exterior {
                class[q] = NodeClass::Boundary;
                boundary.push(q);
            }
        }
    }
    boundary.sort_unstable();
    let boundary_distance = (0..total).map(|i| distance(&point(i))).collect();
    let mut axis_offsets = Vec::new();
    for &st in strides.iter().take(dim) {
        axis_offsets.push(st as isize);
        axis_offsets.push(-(st as isize));
    }
    let domain = GridDomain {
        n,
        h,
        half,
        side,
        strides,
        shape,
        class,
        boundary_distance,
        interior,
        boundary,
        axis_offsets,
        mixed_pairs: mixed_axis_pairs(n),
    };
    // a shell axis crosses the region twice
    let min_axis = if matches!(shape, Shape::Shell { .. }) { 4 } else { 5 };
    if domain.interior_nodes_on_axis() < min_axis {
        return Err(Error::Config(format!(
            "spacing h = {h} too coarse: fewer than {min_axis} interior nodes per axis"
        )));
    }
    if !domain.interior_connected() {
        return Err(Error::Config("interior node set is not connected".into()));
    }
    Ok(domain)
}

/// Lattice discretization of the ball `{|z| < radius}` in ℂⁿ.
pub fn build_ball_domain(radius: f64, h: f64, n: usize) -> Result<GridDomain> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("radius must be positive, got {radius}")));
    }
    if !(h < radius / 4.0) {
        return Err(Error::Config(format!("spacing h = {h} must be below radius/4 = {}", radius / 4.0)));
    }
    let dim = 2 * n;
    let r2 = radius * radius;
    build_domain(
        n,
        h,
        radius,
        Shape::Ball { radius },
        |p| p[..dim].iter().map(|x| x * x).sum::<f64>() < r2 * (1.0 - 1e-12),
        |p| (radius - norm(p, dim)).abs(),
    )
}

/// Lattice discretization of the shell `{r_in < |z| < r_out}`.
pub fn build_shell_domain(r_in: f64, r_out: f64, h: f64, n: usize) -> Result<GridDomain> {
    if !(r_in > 0.0 && r_in < r_out) {
        return Err(Error::Config(format!("shell radii must satisfy 0 < r_in < r_out, got ({r_in}, {r_out})")));
    }
    if !(h < (r_out - r_in) / 4.0) {
        return Err(Error::Config(format!(
            "spacing h = {h} must be below (r_out − r_in)/4 = {}",
            (r_out - r_in) / 4.0
        )));
    }
    let dim = 2 * n;
    let (lo, hi) = (r_in * r_in, r_out * r_out);
    build_domain(
        n,
        h,
        r_out,
        Shape::Shell { r_in, r_out },
        |p| {
            let r2: f64 = p[..dim].iter().map(|x| x * x).sum();
            r2 > lo * (1.0 + 1e-12) && r2 < hi * (1.0 - 1e-12)
        },
        |p| {
            let r = norm(p, dim);
            (r - r_in).abs().min((r_out - r).abs())
        },
    )
}

/// A global strictly psh defining function.
#[derive(Clone, Debug)]
pub struct DefiningFunction {
    pub values: GridFunction,
    /// `c` with `dd^c ρ ⪰ c·β` at interior nodes.
    pub strict_psh_margin: f64,
}

/// `ρ = |z|² − R²` on a ball domain (`dd^c ρ = β`, so the margin is 1).
/// Shells have no global strictly psh defining function.
pub fn standard_defining_function(domain: &GridDomain) -> Result<DefiningFunction> {
    match domain.shape() {
        Shape::Ball { radius } => {
            let values = GridFunction::from_fn(domain, |p| {
                p[..domain.dim()].iter().map(|x| x * x).sum::<f64>() - radius * radius
            });
            Ok(DefiningFunction { values, strict_psh_margin: 1.0 })
        }
        other => Err(Error::Unsupported(format!(
            "no global defining function for {other:?}; use per-component barriers"
        ))),
    }
}

/// Positive Hermitian metric `g` sampled at every lattice node.
#[derive(Clone, Debug)]
pub struct HermitianMetricField {
    n: usize,
    values: Vec<Herm>,
    lambda_min: f64,
    lambda_max: f64,
    torsion_bound: f64,
    degenerate: bool,
}

impl HermitianMetricField {
    /// Samples `f` at every node; the metric must be positive definite on
    /// interior and boundary nodes.
    pub fn from_fn(domain: &GridDomain, f: impl Fn(&Point) -> Herm) -> Result<Self> {
        let values: Vec<Herm> = (0..domain.len()).map(|i| f(&domain.point(i))).collect();
        Self::from_values(domain, values)
    }

    pub fn from_values(domain: &GridDomain, values: Vec<Herm>) -> Result<Self> {
        let mut lambda_min = f64::INFINITY;
        let mut lambda_max: f64 = 0.0;
        for idx in domain.active() {
            let g = values[idx];
            let (lo, hi) = g.eigenvalues();
            if !g.is_finite() || !(lo > 0.0) {
                return Err(Error::InvalidMetric { node: idx, lambda_min: lo });
            }
            lambda_min = lambda_min.min(lo);
            lambda_max = lambda_max.max(hi);
        }
        let mut field = HermitianMetricField {
            n: domain.n(),
            values,
            lambda_min,
            lambda_max,
            torsion_bound: 0.0,
            degenerate: false,
        };
        field.torsion_bound = metric_bound_b(&field, domain)?;
        Ok(field)
    }

    /// The flat Kähler form `β` (`g ≡ I`).
    pub fn identity(domain: &GridDomain) -> Self {
        Self::scaled_identity(domain, 1.0)
    }

    pub fn scaled_identity(domain: &GridDomain, s: f64) -> Self {
        let n = domain.n();
        HermitianMetricField {
            n,
            values: vec![Herm::scalar(n, s); domain.len()],
            lambda_min: s,
            lambda_max: s,
            torsion_bound: 0.0,
            degenerate: s <= 0.0,
        }
    }

    /// `g = e^{c·x₁}·I`, non-Kähler in ℂ² for `c ≠ 0`.
    pub fn conformal_exp(domain: &GridDomain, c: f64) -> Result<Self> {
        let n = domain.n();
        Self::from_fn(domain, |p| Herm::scalar(n, (c * p[0]).exp()))
    }

    /// The zero form, turning ω-psh into plain psh. Not a metric: only the
    /// cone and density kernels accept it.
    pub fn zero(domain: &GridDomain) -> Self {
        Self::scaled_identity(domain, 0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, idx: usize) -> Herm {
        self.values[idx]
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// The torsion constant `B`.
    pub fn torsion_bound(&self) -> f64 {
        self.torsion_bound
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Complex Hessian `∂_p∂̄_q` of a real scalar lattice field at an interior
/// node, using the same stencils as the potential Hessian.
pub(crate) fn scalar_hessian(domain: &GridDomain, idx: usize, value: impl Fn(usize) -> f64) -> Herm {
    let h2 = domain.h() * domain.h();
    let c = value(idx);
    let second = |a: usize| -> f64 {
        let s = domain.stride(a) as isize;
        let i = idx as isize;
        (value((i + s) as usize) + value((i - s) as usize) - 2.0 * c) / h2
    };
    let mixed = |a: usize, b: usize| -> f64 {
        let (sa, sb) = (domain.stride(a) as isize, domain.stride(b) as isize);
        let i = idx as isize;
        (value((i + sa + sb) as usize) - value((i + sa - sb) as usize) - value((i - sa + sb) as usize)
            + value((i - sa - sb) as usize))
            / (4.0 * h2)
    };
    if domain.n() == 1 {
        return Herm::new1(0.25 * (second(0) + second(1)));
    }
    let a = 0.25 * (second(0) + second(1));
    let d = 0.25 * (second(2) + second(3));
    let b = Complex64::new(0.25 * (mixed(0, 2) + mixed(1, 3)), 0.25 * (mixed(0, 3) - mixed(1, 2)));
    Herm::new2(a, b, d)
}

/// Smallest `B ≥ 0` with `−B ω² ≤ 2n dd^c ω ≤ B ω²` at every interior and
/// boundary node (the metric is sampled on the whole lattice, so boundary
/// nodes have their stencil).
///
/// For `n = 2`, writing `ω = i g_{jk̄} dz_j ∧ dz̄_k`,
/// `dd^c ω = K/(2 det g) · ω²` with
/// `K = ∂₁∂̄₁g₂₂ + ∂₂∂̄₂g₁₁ − 2 Re ∂₁∂̄₂g₂₁`, so `B = max |2K / det g|`.
/// The second condition involves `dω ∧ d^c ω`, a 6-form, and is void in
/// complex dimension 2; for `n = 1` both expressions vanish.
pub fn metric_bound_b(g: &HermitianMetricField, domain: &GridDomain) -> Result<f64> {
    if domain.n() == 1 {
        return Ok(0.0);
    }
    let mut bound: f64 = 0.0;
    for &idx in domain.interior().iter().chain(domain.boundary()) {
        let gi = g.at(idx);
        let det = gi.det();
        if !(det > 0.0) {
            return Err(Error::InvalidMetric { node: idx, lambda_min: gi.lambda_min() });
        }
        let d11_g22 = scalar_hessian(domain, idx, |j| g.at(j).d).a;
        let d22_g11 = scalar_hessian(domain, idx, |j| g.at(j).a).d;
        // g₂₁ = conj(b): ∂₁∂̄₂ g₂₁ = H₁₂(Re b) − i H₁₂(Im b)
        let h_re = scalar_hessian(domain, idx, |j| g.at(j).b.re).b;
        let h_im = scalar_hessian(domain, idx, |j| g.at(j).b.im).b;
        let d12_g21 = h_re - Complex64::new(0.0, 1.0) * h_im;
        let k = d11_g22 + d22_g11 - 2.0 * d12_g21.re;
        bound = bound.max((2.0 * k / det).abs());
    }
    Ok(bound)
}

/// Checks the form inequality for a candidate `B` at every interior node.
pub fn metric_bound_holds(g: &HermitianMetricField, domain: &GridDomain, b: f64) -> Result<bool> {
    Ok(metric_bound_b(g, domain)? <= b * (1.0 + 1e-12))
}
