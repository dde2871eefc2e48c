//! Ground states of the discrete nonlinear Schrödinger equation
//!
//! ```text
//! −Δu + (V(x) − ρ/(|x|²+1)) u = f(x, u)   on ℤ^N
//! ```
//!
//! with a periodic potential `V` whose spectrum has a gap around 0, computed
//! on finite boxes of the lattice. The energy is strongly indefinite, so
//! ground states are found by a reduced min-max: maximize over
//! `ℝ⁺w ⊕ X⁻`, minimize over unit directions `w` of the positive spectral
//! subspace, then polish with Newton's method.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod continuation;
pub mod energy;
pub mod error;
pub mod format;
pub mod hardy;
pub mod lattice;
pub mod linalg;
pub mod nonlinearity;
pub mod solver;
pub mod spectral;

pub use error::{Error, ErrorClass, Result};
pub use lattice::{BoxDomain, Boundary, Field, Site};
