//! Numerical laboratory for mean-field Langevin dynamics: finite-particle
//! Gibbs measures, their mean-field limits, propagation of chaos, and
//! Lipschitz transport maps from the reverse heat flow.
//!
//! The numerics are generic over the scalar ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix the common choices.

pub mod bounds;
pub mod chaos;
pub mod error;
pub mod heatflow;
pub mod linalg;
pub mod measure;
pub mod meanfield;
pub mod model;
pub mod presets;
pub mod quadrature;
pub mod sampler;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type BoundInputsF64 = bounds::BoundInputs<f64>;
pub type BoundInputsF32 = bounds::BoundInputs<f32>;
pub type ModelSpecF64 = model::ModelSpec<f64>;
pub type ModelSpecF32 = model::ModelSpec<f32>;
pub type TargetSpecF64 = sampler::TargetSpec<f64>;
pub type TargetSpecF32 = sampler::TargetSpec<f32>;
pub type GridDensityF64 = measure::GridDensity<f64>;
pub type GridDensityF32 = measure::GridDensity<f32>;
pub type GaussianMeasureF64 = measure::GaussianMeasure<f64>;
pub type GaussianMeasureF32 = measure::GaussianMeasure<f32>;
pub type EmpiricalMeasureF64 = measure::EmpiricalMeasure<f64>;
pub type EmpiricalMeasureF32 = measure::EmpiricalMeasure<f32>;
pub type ProximalGibbsSystemF64 = meanfield::ProximalGibbsSystem<f64>;
pub type ProximalGibbsSystemF32 = meanfield::ProximalGibbsSystem<f32>;
