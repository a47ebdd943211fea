//! Heat kernels (Gauss–Weierstrass, a sub-Gaussian surrogate, and the
//! spectral kernel of the level-m graph), the functionals `Ψ_u^σ(t)`, and
//! the kernel-side checks.

mod checks;
mod kernel;
mod profile;
mod spectral;

pub use checks::{
    c0_series, kernel_axioms_check, kernel_time_comparison_check, tail_check, heat_besov_equivalence_check, AxiomOptions,
    TailFit,
};
pub use kernel::{GaussWeierstrass, HkConstants, KernelModel, RadialKernel, SurrogateKernel};
pub use profile::{heat_profile, ke_report, psi, time_grid, HeatProfile, HeatSums};
pub use spectral::SpectralKernel;
