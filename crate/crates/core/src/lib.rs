//! Diffusion adaptation for multi-objective optimization over networks.
//!
//! Agents on a graph each hold a private cost `J_k`; diffusion strategies
//! (adapt-then-combine, combine-then-adapt and the general three-matrix
//! form) drive every agent towards the minimizer of `Σ_k J_k`, a Pareto
//! optimal point of the individual costs. Alongside the simulators the crate
//! carries the closed-form mean-square analysis: step-size limits, the
//! fixed-point bias, mean-square perturbation bounds and steady-state MSE.
//!
//! Numerics are generic over [`Real`] (`f32` or `f64`); the `*F64` aliases
//! name the double-precision instantiations.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod costs;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod scalar;
pub mod strategies;
pub mod topology;

pub use error::{Error, Result};
pub use scalar::Real;

pub type BlockVectorF64 = operators::BlockVector<f64>;
pub type BlockVectorF32 = operators::BlockVector<f32>;
pub type CombinationSetF64 = topology::CombinationSet<f64>;
pub type CombinationSetF32 = topology::CombinationSet<f32>;
pub type StepSizeProfileF64 = topology::StepSizeProfile<f64>;
pub type StepSizeProfileF32 = topology::StepSizeProfile<f32>;
pub type GradientDescentSpecF64 = operators::GradientDescentSpec<f64>;
pub type GradientDescentSpecF32 = operators::GradientDescentSpec<f32>;
pub type QuadraticCostF64 = costs::QuadraticCost<f64>;
pub type QuadraticCostF32 = costs::QuadraticCost<f32>;
pub type FinanceCostF64 = costs::FinanceCost<f64>;
pub type FinanceCostF32 = costs::FinanceCost<f32>;
pub type SharedCostF64 = costs::SharedCost<f64>;
pub type SharedCostF32 = costs::SharedCost<f32>;
pub type StrategyConfigF64 = strategies::StrategyConfig<f64>;
pub type StrategyConfigF32 = strategies::StrategyConfig<f32>;
pub type SpectralDataF64 = analysis::SpectralData<f64>;
pub type SteadyStateOperatorsF64 = analysis::SteadyStateOperators<f64>;
