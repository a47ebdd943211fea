//! Discrete p-energies, p-harmonic extension, renormalisation and the
//! vertex-type monotonicity checks.

mod discrete;
mod function;
mod harmonic;
mod monotone;
mod renorm;
pub mod solver;

pub use discrete::{discrete_p_energy, EnergySequence};
pub use function::FunctionOnVertices;
pub use harmonic::{harmonic_extension_of_boundary, p_harmonic_extension, CellSolver};
pub use monotone::{energy_monotonicity_check, monotonicity_constant, ve_report};
pub use renorm::{beta_star, critical_exponent, renormalization_factor, CriticalExponent, RenormOptions, RenormReport};
pub use solver::SolverOptions;
