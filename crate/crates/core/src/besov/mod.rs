//! Besov functionals `Φ_u^σ(r)`, ball and ring energies, profiles on the
//! radius grid and the discrete/continuous comparison checks.

mod balls;
mod morrey;
mod profile;
mod sandwich;

pub use balls::{ball_energy, ball_sums, besov_phi, ring_energy, BallNormalization, PhiValue};
pub use morrey::{morrey_check, MorreyFit, MorreyOptions};
pub use profile::{besov_profile, ne_report, BallSums, BesovProfile, ProfileOptions, RESOLUTION_MARGIN};
pub use sandwich::sandwich_check_vertex_besov;
