//! Gibbs sampler alternating the particle filter with the conjugate draws.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use super::posterior::{
    beta_to_kappa_theta, compute_residuals, draw_eta, draw_rho, draw_sigma, rho_from_psi_omega,
    VolRegression,
};
use super::priors::Priors;
use crate::error::{Error, Result};
use crate::filter::{adjust_returns, filter_pass, write_state_csv, FilterOutput, JumpPrior};
use crate::model::{price_ratios, ModelParams};
use crate::rng::{stream, StreamRng};
use crate::scalar::{mean_sd, Real};

pub const MIN_PRICES: usize = 50;
/// Attempts at an admissible `(kappa, theta)` before the previous draw is reused.
pub const MAX_BETA_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub particles: usize,
    pub with_jumps: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iterations: 500,
            burn_in: 100,
            particles: 1000,
            with_jumps: true,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::invalid("iterations", "must exceed burn_in"));
        }
        if self.particles < 2 {
            return Err(Error::invalid("particles", "need at least 2"));
        }
        Ok(())
    }
}

/// Parameter values produced by one Gibbs iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Draw<T: Real> {
    pub mu: T,
    pub kappa: T,
    pub theta: T,
    pub sigma: T,
    pub rho: T,
    pub lambda: T,
    pub mu_j: Option<T>,
    pub sigma_j: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PosteriorDraws<T: Real> {
    pub draws: Vec<Draw<T>>,
    /// Filtered `v(k dt)` per iteration.
    pub variance_paths: Vec<Vec<T>>,
    /// Filtered `λ(k dt)` per iteration.
    pub jump_prob_paths: Vec<Vec<T>>,
    pub burn_in: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Summary<T: Real> {
    pub mean: T,
    pub sd: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ParameterSummaries<T: Real> {
    pub mu: Summary<T>,
    pub kappa: Summary<T>,
    pub theta: Summary<T>,
    pub sigma: Summary<T>,
    pub rho: Summary<T>,
    pub lambda: Summary<T>,
    pub mu_j: Option<Summary<T>>,
    pub sigma_j: Option<Summary<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub burn_in: usize,
    pub particles: usize,
    pub with_jumps: bool,
    pub seed: u64,
    /// Iterations that fell back to the previous `(kappa, theta)`.
    pub beta_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EstimationResult<T: Real> {
    pub dt: T,
    pub estimates: ParameterSummaries<T>,
    pub variance_path: Vec<T>,
    pub jump_prob_path: Vec<T>,
    pub jump_size_path: Vec<T>,
    pub diagnostics: Diagnostics,
}

impl<T: Real> EstimationResult<T> {
    /// Posterior means as model parameters, using the first price and the
    /// first filtered variance as initial conditions.
    pub fn point_estimate(&self, s0: T) -> ModelParams<T> {
        let e = &self.estimates;
        ModelParams {
            mu: e.mu.mean,
            kappa: e.kappa.mean,
            theta: e.theta.mean,
            sigma: e.sigma.mean,
            rho: e.rho.mean,
            s0,
            v0: self.variance_path.first().copied().unwrap_or(e.theta.mean),
        }
    }

    /// Filtered state of the final iteration as `t,v,lambda,z`.
    pub fn write_filtered_csv<W: Write>(&self, out: W) -> Result<()> {
        write_state_csv(
            &self.variance_path,
            &self.jump_prob_path,
            &self.jump_size_path,
            self.dt,
            out,
        )
    }
}

fn summarize<T: Real>(values: impl Iterator<Item = T>) -> Summary<T> {
    let v: Vec<T> = values.collect();
    let (mean, sd) = mean_sd(&v);
    Summary { mean, sd }
}

impl<T: Real> PosteriorDraws<T> {
    pub fn kept(&self) -> &[Draw<T>] {
        &self.draws[self.burn_in.min(self.draws.len())..]
    }

    pub fn summaries(&self) -> ParameterSummaries<T> {
        let kept = self.kept();
        let optional = |f: fn(&Draw<T>) -> Option<T>| {
            let v: Vec<T> = kept.iter().filter_map(f).collect();
            (!v.is_empty()).then(|| summarize(v.into_iter()))
        };
        ParameterSummaries {
            mu: summarize(kept.iter().map(|d| d.mu)),
            kappa: summarize(kept.iter().map(|d| d.kappa)),
            theta: summarize(kept.iter().map(|d| d.theta)),
            sigma: summarize(kept.iter().map(|d| d.sigma)),
            rho: summarize(kept.iter().map(|d| d.rho)),
            lambda: summarize(kept.iter().map(|d| d.lambda)),
            mu_j: optional(|d| d.mu_j),
            sigma_j: optional(|d| d.sigma_j),
        }
    }
}

/// Starting point of the chain: prior means mapped to model parameters.
pub fn initial_params<T: Real>(priors: &Priors<T>, dt: T, s0: T) -> Result<ModelParams<T>> {
    let (kappa, theta) = beta_to_kappa_theta(priors.mu0_beta, dt)?;
    Ok(ModelParams {
        mu: (priors.mu0_eta - T::one()) / dt,
        kappa,
        theta,
        sigma: priors.sigma2_prior_mean().sqrt(),
        rho: rho_from_psi_omega(priors.mu0_psi, priors.omega_prior_mean()),
        s0,
        v0: theta,
    })
}

pub fn run_gibbs<T: Real>(
    prices: &[T],
    dt: T,
    priors: &Priors<T>,
    config: &GibbsConfig,
    seed: u64,
) -> Result<EstimationResult<T>> {
    let (draws, last, fallbacks) = run_chain(prices, dt, priors, config, seed)?;
    Ok(EstimationResult {
        dt,
        estimates: draws.summaries(),
        variance_path: last.variance_path,
        jump_prob_path: last.jump_prob_path,
        jump_size_path: last.jump_size_path,
        diagnostics: Diagnostics {
            iterations: config.iterations,
            burn_in: config.burn_in,
            particles: config.particles,
            with_jumps: config.with_jumps,
            seed,
            beta_fallbacks: fallbacks,
        },
    })
}

/// Filtered state from the final iteration.
#[derive(Debug, Clone)]
pub struct FinalState<T> {
    pub variance_path: Vec<T>,
    pub jump_prob_path: Vec<T>,
    pub jump_size_path: Vec<T>,
}

/// Runs the chain and keeps every iteration's draws.
pub fn run_chain<T: Real>(
    prices: &[T],
    dt: T,
    priors: &Priors<T>,
    config: &GibbsConfig,
    seed: u64,
) -> Result<(PosteriorDraws<T>, FinalState<T>, usize)> {
    config.validate()?;
    priors.validate()?;
    if prices.len() < MIN_PRICES {
        return Err(Error::InsufficientData {
            needed: MIN_PRICES,
            got: prices.len(),
        });
    }
    if let Some(k) = prices
        .iter()
        .position(|&p| !(p > T::zero()) || !p.is_finite())
    {
        return Err(Error::Domain(format!(
            "price[{k}] = {} is not positive",
            prices[k]
        )));
    }
    let returns = price_ratios(prices);
    let jump_cfg = config.with_jumps.then_some(JumpPrior {
        lambda_th: priors.lambda_th,
        mu0_j: priors.mu0_j,
        sigma0_j: priors.sigma0_j,
    });

    let mut current = initial_params(priors, dt, prices[0])?;
    let mut draws = PosteriorDraws {
        draws: Vec::with_capacity(config.iterations),
        variance_paths: Vec::with_capacity(config.iterations),
        jump_prob_paths: Vec::with_capacity(config.iterations),
        burn_in: config.burn_in,
    };
    let mut fallbacks = 0;
    let mut last = None;

    for iteration in 0..config.iterations {
        let mut rng = stream(seed, &[iteration as u64]);
        let step = IterationInput {
            returns: &returns,
            dt,
            priors,
            config,
            jump_cfg: jump_cfg.as_ref(),
            current: &current,
        };
        let (draw, filtered, fell_back) =
            gibbs_step(&step, iteration, &mut rng).map_err(|e| e.at_iteration(iteration))?;
        fallbacks += usize::from(fell_back);

        current = ModelParams {
            mu: draw.mu,
            kappa: draw.kappa,
            theta: draw.theta,
            sigma: draw.sigma,
            rho: draw.rho,
            ..current
        };
        draws.draws.push(draw);
        draws.variance_paths.push(filtered.variance_path.clone());
        draws.jump_prob_paths.push(filtered.jump_prob_path.clone());
        last = Some(FinalState {
            variance_path: filtered.variance_path,
            jump_prob_path: filtered.jump_prob_path,
            jump_size_path: filtered.jump_size_path,
        });
    }

    Ok((draws, last.expect("at least one iteration"), fallbacks))
}

struct IterationInput<'a, T: Real> {
    returns: &'a [T],
    dt: T,
    priors: &'a Priors<T>,
    config: &'a GibbsConfig,
    jump_cfg: Option<&'a JumpPrior<T>>,
    current: &'a ModelParams<T>,
}

/// Filter, jump adjustment, then the drift, `(kappa, theta)`, `sigma` and
/// `rho` blocks, all conditioned on the previous iteration's parameters.
fn gibbs_step<T: Real>(
    input: &IterationInput<'_, T>,
    iteration: usize,
    rng: &mut StreamRng,
) -> Result<(Draw<T>, FilterOutput<T>, bool)> {
    let IterationInput {
        returns,
        dt,
        priors,
        config,
        jump_cfg,
        current,
    } = *input;
    let filtered = filter_pass(returns, current, jump_cfg, config.particles, dt, rng)?;
    let v = &filtered.variance_path;
    let adjusted = if config.with_jumps {
        adjust_returns(returns, &filtered.jump_prob_path, &filtered.jump_size_path)?
    } else {
        returns.to_vec()
    };

    let mu = draw_eta(&adjusted, v, dt, priors, rng)?.mu;

    let regression = VolRegression::from_variance_path(v, dt)?;
    let beta_post = regression.posterior(priors)?;
    let mut admissible = None;
    for _ in 0..MAX_BETA_REDRAWS {
        let beta = beta_post.sample(current.sigma, rng)?;
        if beta[1] >= T::one() {
            continue;
        }
        let (kappa, theta) = beta_to_kappa_theta(beta, dt)?;
        if theta > T::zero() && theta.is_finite() {
            admissible = Some((kappa, theta));
            break;
        }
    }
    let fell_back = admissible.is_none();
    let (kappa, theta) = admissible.unwrap_or_else(|| {
        warn!(
            "iteration {iteration}: no admissible (kappa, theta) in {MAX_BETA_REDRAWS} draws; reusing previous values"
        );
        (current.kappa, current.theta)
    });

    let sigma = draw_sigma(&regression, priors, rng)?;
    let (e1, e2) = compute_residuals(&adjusted, v, mu, kappa, theta, dt)?;
    let rho = draw_rho(&e1, &e2, priors, rng)?.rho;

    let draw = Draw {
        mu,
        kappa,
        theta,
        sigma,
        rho,
        lambda: filtered.lambda_hat,
        mu_j: filtered.mu_j_hat,
        sigma_j: filtered.sigma_j_hat,
    };
    Ok((draw, filtered, fell_back))
}
