//! Bayesian estimation of the model parameters from a price series.

pub mod gibbs;
pub mod linalg;
pub mod posterior;
pub mod priors;

pub use gibbs::{
    initial_params, run_chain, run_gibbs, Diagnostics, Draw, EstimationResult, GibbsConfig,
    ParameterSummaries, PosteriorDraws, Summary,
};
pub use linalg::Mat2;
pub use priors::Priors;
