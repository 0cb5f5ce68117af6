//! Hermitian matrices of size one or two.
//!
//! Everything in the solver works in complex dimension `n ∈ {1, 2}`, so a
//! dense general-purpose matrix type would be wasted effort. A `Herm` stores
//! `[[a, b], [conj(b), d]]`; for `n = 1` only `a` is meaningful and `b`, `d`
//! are kept at zero.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// Hermitian `n × n` matrix, `n ∈ {1, 2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Herm {
    pub n: u8,
    pub a: f64,
    pub d: f64,
    pub b: Complex64,
}

impl Herm {
    pub fn zero(n: usize) -> Self {
        Herm { n: n as u8, a: 0.0, d: 0.0, b: Complex64::new(0.0, 0.0) }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, 1.0)
    }

    pub fn scalar(n: usize, s: f64) -> Self {
        let d = if n == 2 { s } else { 0.0 };
        Herm { n: n as u8, a: s, d, b: Complex64::new(0.0, 0.0) }
    }

    pub fn new2(a: f64, b: Complex64, d: f64) -> Self {
        Herm { n: 2, a, d, b }
    }

    pub fn new1(a: f64) -> Self {
        Herm { n: 1, a, d: 0.0, b: Complex64::new(0.0, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.n as usize
    }

    /// Entry `(j, k)` with `j, k ∈ {0, 1}`.
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        match (j, k) {
            (0, 0) => Complex64::new(self.a, 0.0),
            (1, 1) => Complex64::new(self.d, 0.0),
            (0, 1) => self.b,
            (1, 0) => self.b.conj(),
            _ => panic!("Herm index ({j}, {k}) out of range"),
        }
    }

    pub fn trace(&self) -> f64 {
        if self.n == 1 {
            self.a
        } else {
            self.a + self.d
        }
    }

    pub fn det(&self) -> f64 {
        if self.n == 1 {
            self.a
        } else {
            self.a * self.d - self.b.norm_sqr()
        }
    }

    /// Eigenvalues in ascending order (the second is `NaN`-free and equal to
    /// the first for `n = 1`).
    pub fn eigenvalues(&self) -> (f64, f64) {
        if self.n == 1 {
            return (self.a, self.a);
        }
        let m = 0.5 * (self.a + self.d);
        let delta = (0.25 * (self.a - self.d).powi(2) + self.b.norm_sqr()).sqrt();
        (m - delta, m + delta)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues().0
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues().1
    }

    pub fn shift(&self, t: f64) -> Self {
        let mut out = *self;
        out.a += t;
        if self.n == 2 {
            out.d += t;
        }
        out
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.abs() < f64::MIN_POSITIVE {
            return None;
        }
        if self.n == 1 {
            return Some(Herm::new1(1.0 / self.a));
        }
        Some(Herm::new2(self.d / det, -self.b / det, self.a / det))
    }

    /// Mixed determinant `D(A, B)` with `D(A, A) = det A`; for `n = 2` this is
    /// `(A₁₁B₂₂ + A₂₂B₁₁ − A₁₂B₂₁ − A₂₁B₁₂) / 2`.
    pub fn mixed_det(&self, other: &Herm) -> f64 {
        if self.n == 1 {
            return 0.5 * (self.a + other.a);
        }
        let cross = self.b * other.b.conj() + self.b.conj() * other.b;
        0.5 * (self.a * other.d + self.d * other.a - cross.re)
    }

    /// `tr(self⁻¹ · other)`, i.e. the trace of `other` measured by the metric
    /// `self`. Returns `None` if `self` is singular.
    pub fn trace_against(&self, other: &Herm) -> Option<f64> {
        let inv = self.inverse()?;
        if self.n == 1 {
            return Some(inv.a * other.a);
        }
        // tr(G H) for Hermitian G, H = Σ_{jk} G_jk H_kj
        let off = inv.b * other.b.conj() + inv.b.conj() * other.b;
        Some(inv.a * other.a + inv.d * other.d + off.re)
    }

    /// Smallest generalized eigenvalue `λ` of `det(self − λ·g) = 0` for a
    /// positive-definite `g`; `self ⪰ θ g` iff the result is `≥ θ`.
    pub fn lambda_min_relative(&self, g: &Herm) -> f64 {
        if self.n == 1 {
            return self.a / g.a;
        }
        // det(A − λG) = det G · λ² − p λ + det A
        let qa = g.det();
        let cross = self.b * g.b.conj();
        let p = self.a * g.d + self.d * g.a - 2.0 * cross.re;
        let qc = self.det();
        let disc = (p * p - 4.0 * qa * qc).max(0.0);
        let root = disc.sqrt();
        // stable smaller root
        if p >= 0.0 {
            let big = 0.5 * (p + root);
            if big == 0.0 {
                0.0
            } else {
                qc / big
            }
        } else {
            0.5 * (p - root) / qa
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.d.is_finite() && self.b.re.is_finite() && self.b.im.is_finite()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Herm) -> f64 {
        let mut m = (self.a - other.a).abs();
        if self.n == 2 {
            m = m.max((self.d - other.d).abs()).max((self.b - other.b).norm());
        }
        m
    }
}

impl Add for Herm {
    type Output = Herm;
    fn add(self, rhs: Herm) -> Herm {
        Herm { n: self.n, a: self.a + rhs.a, d: self.d + rhs.d, b: self.b + rhs.b }
    }
}

impl Sub for Herm {
    type Output = Herm;
    fn sub(self, rhs: Herm) -> Herm {
        Herm { n: self.n, a: self.a - rhs.a, d: self.d - rhs.d, b: self.b - rhs.b }
    }
}

impl Mul<Herm> for f64 {
    type Output = Herm;
    fn mul(self, rhs: Herm) -> Herm {
        Herm { n: rhs.n, a: self * rhs.a, d: self * rhs.d, b: rhs.b * self }
    }
}

/// `2^n · n!`, the factor turning `det` into a Lebesgue density under
/// `dd^c = i∂∂̄`.
pub fn volume_factor(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 8.0,
        _ => panic!("complex dimension {n} unsupported"),
    }
}

/// Pairwise summation; deterministic for a fixed input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> Herm {
        Herm::new2(2.0, Complex64::new(0.3, -0.4), 1.5)
    }

    #[test]
    fn eigenvalues_match_det_and_trace() {
        let m = sample();
        let (l1, l2) = m.eigenvalues();
        assert_relative_eq!(l1 * l2, m.det(), epsilon = 1e-12);
        assert_relative_eq!(l1 + l2, m.trace(), epsilon = 1e-12);
        assert!(l1 <= l2);
    }

    #[test]
    fn mixed_det_polarizes_det() {
        let a = sample();
        let b = Herm::new2(0.7, Complex64::new(-0.1, 0.2), 3.0);
        assert_relative_eq!(a.mixed_det(&a), a.det(), epsilon = 1e-12);
        // det(A + B) = det A + 2 D(A, B) + det B
        assert_relative_eq!((a + b).det(), a.det() + 2.0 * a.mixed_det(&b) + b.det(), epsilon = 1e-12);
    }

    #[test]
    fn relative_eigenvalue_of_scaled_metric() {
        let g = sample();
        let a = 3.0 * g;
        assert_relative_eq!(a.lambda_min_relative(&g), 3.0, epsilon = 1e-12);
        let id = Herm::identity(2);
        assert_relative_eq!(g.lambda_min_relative(&id), g.lambda_min(), epsilon = 1e-12);
    }

    #[test]
    fn trace_against_identity_is_trace() {
        let g = sample();
        assert_relative_eq!(Herm::identity(2).trace_against(&g).unwrap(), g.trace(), epsilon = 1e-14);
        assert_relative_eq!(g.trace_against(&g).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive_for_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
    }
}
