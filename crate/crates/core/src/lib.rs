//! Greedy approximation with Jacobi polynomial bases in weighted `L_p` spaces.
//!
//! The crate evaluates Jacobi polynomials, integrates against the Jacobi
//! measure, runs the thresholding greedy algorithm on finite expansions, and
//! reproduces the growth rates that separate `p = 2` from every other `p`.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod greedy;
pub mod jacobi;
pub mod quadrature;

pub use error::{Error, Result};
pub use jacobi::{JacobiParams, NormalizationMode};
pub use quadrature::MeshConfig;
