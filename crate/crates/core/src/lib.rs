//! Simulation and Bayesian calibration of the Bates stochastic volatility
//! model with jumps, plus experiments comparing passive and technical-analysis
//! portfolio strategies on simulated and market prices.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the CLI uses.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod market;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod strategy;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ModelParamsF64 = model::ModelParams<f64>;
pub type ModelParamsF32 = model::ModelParams<f32>;
pub type JumpParamsF64 = model::JumpParams<f64>;
pub type JumpParamsF32 = model::JumpParams<f32>;
pub type TimeGridF64 = model::TimeGrid<f64>;
pub type TimeGridF32 = model::TimeGrid<f32>;
pub type SimulatedPathF64 = model::SimulatedPath<f64>;
pub type SimulatedPathF32 = model::SimulatedPath<f32>;
pub type PriorsF64 = calibration::Priors<f64>;
pub type PriorsF32 = calibration::Priors<f32>;
pub type EstimationResultF64 = calibration::EstimationResult<f64>;
pub type FilterOutputF64 = filter::FilterOutput<f64>;
pub type BacktestF64 = strategy::Backtest<f64>;
pub type ExperimentGridF64 = experiments::ExperimentGrid<f64>;
pub type GridResultF64 = experiments::GridResult<f64>;
