use std::path::Path;

use serde::{Deserialize, Serialize};

use super::linalg::Mat2;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// JSON shipped with the crate; same values as [`Priors::default`].
pub const DEFAULT_PRIORS_JSON: &str = include_str!("../../data/default_priors.json");

/// Hyperparameters of the conjugate priors used by the Gibbs sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct Priors<T: Real> {
    /// Normal prior on `eta = 1 + mu dt`.
    pub mu0_eta: T,
    pub sigma0_eta: T,
    /// Precision matrix of the normal prior on `beta = (kappa theta dt, 1 - kappa dt)`.
    #[serde(rename = "Lambda0_beta")]
    pub lambda0_beta: Mat2<T>,
    pub mu0_beta: [T; 2],
    /// Inverse-gamma prior on `sigma^2`.
    pub a0_sigma: T,
    pub b0_sigma: T,
    /// Normal prior on `psi = sigma rho`.
    pub mu0_psi: T,
    pub sigma0_psi: T,
    /// Inverse-gamma prior on `omega = sigma^2 (1 - rho^2)`.
    pub a0_omega: T,
    pub b0_omega: T,
    /// Bernoulli probability that a raw particle carries a jump.
    pub lambda_th: T,
    /// Normal proposal for raw jump sizes.
    pub mu0_j: T,
    pub sigma0_j: T,
}

impl<T: Real> Default for Priors<T> {
    fn default() -> Self {
        Priors {
            mu0_eta: T::of(1.0004),
            sigma0_eta: T::of(0.001),
            lambda0_beta: Mat2::diag(T::of(10.0), T::of(5.0)),
            mu0_beta: [T::of(2e-4), T::of(0.996)],
            a0_sigma: T::of(250.0),
            b0_sigma: T::of(0.015),
            mu0_psi: T::of(-0.67),
            sigma0_psi: T::of(0.1),
            a0_omega: T::of(1.33),
            b0_omega: T::of(0.1),
            lambda_th: T::of(0.15),
            mu0_j: T::of(-0.05),
            sigma0_j: T::of(0.01),
        }
    }
}

impl<T: Real> Priors<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let priors: Self = serde_json::from_str(text)?;
        priors.validate()?;
        Ok(priors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn tau0_eta(&self) -> T {
        (self.sigma0_eta * self.sigma0_eta).recip()
    }

    pub fn tau0_psi(&self) -> T {
        (self.sigma0_psi * self.sigma0_psi).recip()
    }

    /// Prior mean of `sigma^2`.
    pub fn sigma2_prior_mean(&self) -> T {
        self.b0_sigma / (self.a0_sigma - T::one())
    }

    /// Prior mean of `omega`.
    pub fn omega_prior_mean(&self) -> T {
        self.b0_omega / (self.a0_omega - T::one())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0_eta > T::zero()) {
            return Err(Error::invalid("sigma0_eta", "must be > 0"));
        }
        if !self.lambda0_beta.is_positive_semidefinite() {
            return Err(Error::invalid(
                "Lambda0_beta",
                "must be symmetric positive semi-definite",
            ));
        }
        if !(self.a0_sigma > T::one()) {
            return Err(Error::invalid("a0_sigma", "must be > 1"));
        }
        if !(self.b0_sigma > T::zero()) {
            return Err(Error::invalid("b0_sigma", "must be > 0"));
        }
        if !(self.sigma0_psi > T::zero()) {
            return Err(Error::invalid("sigma0_psi", "must be > 0"));
        }
        if !(self.a0_omega > T::one()) {
            return Err(Error::invalid("a0_omega", "must be > 1"));
        }
        if !(self.b0_omega > T::zero()) {
            return Err(Error::invalid("b0_omega", "must be > 0"));
        }
        if !(self.sigma0_j >= T::zero()) {
            return Err(Error::invalid("sigma0_j", "must be >= 0"));
        }
        if !(self.lambda_th >= T::zero() && self.lambda_th < T::one()) {
            return Err(Error::invalid("lambda_th", "must lie in [0, 1)"));
        }
        Ok(())
    }
}
