//! Finite-sum convex optimization with the curvature-aided incremental
//! aggregated gradient (CIAG) method.
//!
//! The crate is organised around a [`FiniteSumProblem`] made of
//! [`ComponentOracle`]s. Solvers live in [`optimizers`], concrete problem
//! families in [`problems`], the checkable consequences of the convergence
//! analysis in [`theory`], and file formats in [`io`].

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod io;
pub mod numeric;
pub mod optimizers;
pub mod oracle;
pub mod problems;
pub mod theory;

pub use error::{Error, Result};
pub use oracle::{ComponentOracle, ConditionNumbers, FiniteSumProblem, TraceRecord};
