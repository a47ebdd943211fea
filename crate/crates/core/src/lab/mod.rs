//! Sweeps and inequality checks built on the other modules.

mod bbm;
mod family;
mod inequalities;
mod scaling;
mod sweep;
mod verify;

pub use bbm::{bbm_sweep_besov, bbm_sweep_heat, UPPER_MARGIN};
pub use family::{seeded_family, standard_family, FamilyKind};
pub use inequalities::{gn_check, gn_exponent, sobolev_check, sobolev_exponents};
pub use scaling::scaling_invariance_check;
pub use sweep::{format_number, SweepRow, SweepTable};
pub use verify::{conventions, grid_depth, verify_suite, Assertion, VerifyReport};
