//! Numerical laboratory for p-energies on p.c.f. self-similar fractals.
//!
//! The crate builds exact vertex graphs for homogeneous p.c.f. sets and
//! their glue-ups, and evaluates discrete, Besov and heat-kernel energy
//! functionals on them. Everything downstream of the graph works with
//! `f64` values indexed by vertex id.
//!
//! Conventions used throughout:
//! * discrete energies sum over *ordered* pairs, so every unordered pair
//!   contributes twice;
//! * Besov functionals divide by `r^α` instead of the empirical ball mass
//!   unless [`besov::BallNormalization::Empirical`] is selected;
//! * radii live on the grid `r = ρ^n` and times on `t = ρ^{β* n}`.

// `!(x > y)` is used on purpose: it rejects NaN along with small values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod config;
pub mod energy;
pub mod error;
pub mod fractal;
pub mod heat;
pub mod lab;
pub mod measure;
pub mod sum;
pub mod window;

pub use error::{Error, Result};
pub use fractal::{GlueSet, IfsSpec, Point, Similitude, VertexGraph, Word};
pub use measure::{BallIndex, DiscreteMeasure, Radius};
pub use energy::{EnergySequence, FunctionOnVertices};
pub use besov::BesovProfile;
pub use heat::{HeatProfile, KernelModel};
pub use lab::{SweepRow, SweepTable};
pub use window::Window;
pub use config::ExperimentConfig;
