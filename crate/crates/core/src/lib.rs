//! Spectral statistics of Brenier-map Hessians.
//!
//! The crate covers the affine-invariant geometry of symmetric positive
//! definite matrices ([`spd_geometry`]), a catalog of log-concave measures
//! ([`measures`]), closed-form and quadrature-exact transport maps with
//! Hessian oracles ([`brenier`]), an entropic solver on 2D grids
//! ([`entropic_2d`]), Bakry–Émery Γ₂ calculus on transport triples
//! ([`gamma2`]) and Monte Carlo estimators for the law of the log-spectrum
//! `Λ(X) = log spec D²Φ(X)` ([`concentration_lab`]). [`suites`] wires these
//! into self-contained check batteries.
//!
//! Batch loops run on rayon when the `parallel` feature is on (default) and
//! sequentially otherwise, with bit-identical results either way.

// NaN must fail range checks, so `!(x <= y)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brenier;
pub mod concentration_lab;
pub mod entropic_2d;
pub mod error;
pub mod exec;
pub mod gamma2;
pub mod linalg;
pub mod measures;
pub mod quadrature;
pub mod report;
pub mod roots;
pub mod spd_geometry;
pub mod stats;
pub mod suites;

pub use error::{Error, Result};
