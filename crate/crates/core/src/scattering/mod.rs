//! Partial-wave scattering from the eccentric junction.

pub mod field;
pub mod smatrix;
pub mod solver;
pub mod waves;

pub use field::{evaluate_field, FieldEvaluator, Incident};
pub use smatrix::SMatrix;
pub use solver::{assemble_and_solve, solve_converged, solve_from_order, truncation_order, ConvergedSolve, MatchSolution};
pub use waves::{graf_coefficients, SpinorWave, Translation, WaveKind};

#[cfg(test)]
mod tests;
