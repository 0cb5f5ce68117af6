//! Batch driver for the `hermitian-ma` solvers: TOML run configurations,
//! built-in verification suites and report directories.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod suites;
