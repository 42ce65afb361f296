//! Independent verification machinery for advobf: brute-force projection
//! solvers, finite-difference gradients, and exhaustive attack search on
//! tiny instances.
//!
//! Nothing here shares an algorithm with the code it checks: projections
//! are verified against dynamic-programming grid search and the classical
//! sort-and-threshold construction, gradients against central differences,
//! and the optimizers against full enumeration of the discrete search
//! space.

pub mod exhaustive;
pub mod fd;
pub mod grid;
pub mod simplex;
pub mod tiny;

pub use exhaustive::{exhaustive_attack, ExhaustiveOutcome};
pub use fd::fd_gradient;
pub use grid::{grid_project_oracle, ConstraintSet};
pub use simplex::sort_simplex_oracle;
pub use tiny::TinyInstance;
