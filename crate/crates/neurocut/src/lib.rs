//! Cut selection toolkit for pure integer linear programs.
//!
//! The crate measures branch-and-bound tree size as a score function,
//! generates Chvátal–Gomory and Gomory mixed-integer cuts at the root,
//! trains neural policies that map instances to cut multipliers, and
//! evaluates the associated sample-complexity bound formulas.

pub mod bnc;
pub mod complexity;
pub mod cuts;
pub mod error;
pub mod harness;
pub mod ilp;
pub mod lp;
pub mod nn;
pub mod train;

pub use error::Error;

/// Shared feasibility/optimality tolerance for LP solves.
pub const LP_TOL: f64 = 1e-7;
/// Shared integrality tolerance for branching and tableau-row selection.
pub const INT_TOL: f64 = 1e-6;
/// Snap tolerance guarding floor computations against representation error.
pub const SNAP_TOL: f64 = 1e-9;
