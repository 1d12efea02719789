//! Core library for the trapped-dipole anyon simulator.
//!
//! The pipeline: build the planar models of a polarizable atom in a
//! filament field E1 = k/r e_r, a bulk-charge field E2 = (rho/2) r e_r and
//! a uniform magnetic field B, run the Dirac-Bergmann constraint analysis
//! on the small-kinetic-energy reduction, and verify the resulting
//! fractional angular-momentum spectrum J_n = alpha*B*k + (n + 1/2) hbar
//! by truncated Fock-basis diagonalization and classical conservation runs.

pub mod constraints;
pub mod dynamics;
pub mod expr;
pub mod models;
pub mod quantum;
pub mod verification;

pub use constraints::{BracketMatrix, Constraint, ConstraintAnalysis};
pub use expr::{Monomial, PhaseExpression, PhasePoint, Var};
pub use models::{FieldSelection, HamiltonianSystem, ModelConfig, ReductionMode};
pub use quantum::{NoncommutativePlane, OperatorMatrix, SpectrumResult};
pub use dynamics::Trajectory;
