//! Quadratic stochastic operators on the simplex: the b-order, operator
//! evaluation and fixed points, b-bistochastic certificates and contraction
//! moduli, the nonhomogeneous Markov measures an operator generates, and
//! absolute-continuity diagnostics for the `V_a` family.
//!
//! Rust APIs index types and states from 0. Text formats, reports, and
//! error values use 1-based indices.

pub mod abscont;
pub mod classify;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod logspace;
pub mod markov;
pub mod operator;
pub mod report;
pub mod simplex;
pub mod spec_file;

pub use error::{QsoError, Result};
pub use markov::{CylinderSet, TransitionFamily};
pub use operator::{HeredityTensor, QsoOperator};
pub use simplex::SimplexPoint;
