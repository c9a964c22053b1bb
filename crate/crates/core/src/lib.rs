//! Pseudo-spectral Galerkin solver and verification harness for the
//! Landau-Lifshitz-Baryakhtar equation on boxes with Neumann conditions.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimates;
pub mod experiments;
pub mod field;
pub mod galerkin;
pub mod grid;
pub mod inequality;
pub mod integrator;
pub mod rng;
pub mod run;
pub mod scalar;

pub use config::{load_config, parse_config, parse_config_with, RunConfig};
pub use error::{Error, Result};
pub use galerkin::{LLBarParams, ModeBand};
pub use grid::GridSpec;
pub use integrator::{IntegratorPolicy, Scheme};
pub use run::{run, RunSummary};
pub use scalar::Real;

pub type VectorField64 = field::VectorField<f64>;
pub type VectorField32 = field::VectorField<f32>;
pub type SpectralField64 = field::SpectralField<f64>;
pub type SpectralField32 = field::SpectralField<f32>;
pub type SolverState64 = integrator::SolverState<f64>;
pub type SolverState32 = integrator::SolverState<f32>;
pub type Stepper64 = integrator::Stepper<f64>;
pub type Stepper32 = integrator::Stepper<f32>;
