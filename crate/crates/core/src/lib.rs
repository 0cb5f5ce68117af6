//! Grid solvers for Dirichlet problems `(ω + dd^c u)^n = F(u, z) μ`, `u = φ` on
//! the boundary, in complex dimension one and two with a variable Hermitian
//! background form, plus the executable checks that accompany them.
//!
//! Modules, bottom-up:
//!
//! * [`geometry`]: lattice domains, defining functions, metrics and the
//!   torsion constant `B`.
//! * [`forms`]: complex Hessians, Monge-Ampère and mixed densities, cone
//!   membership, envelopes.
//! * [`laplace`]: the linear problem `Δ_g u = f`, Hölder barriers and moduli.
//! * [`masolver`]: maximal functions, fixed right-hand side solves, Picard,
//!   Perron and the exponential family.
//! * [`capacity`]: relative extremal functions, capacity, energies.
//! * [`verify`]: comparison, stability and energy certificates and
//!   manufactured problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod error;
pub mod forms;
pub mod geometry;
pub mod laplace;
pub mod linalg;
pub mod masolver;
pub mod tolerances;
pub mod verify;

pub use error::{Error, Result};
pub use forms::{GridFunction, MeasureField};
pub use geometry::{build_ball_domain, build_shell_domain, GridDomain, HermitianMetricField, Point};
pub use linalg::Herm;
pub use tolerances::Tolerances;
