//! Sequential importance resampling filter for the latent variance, the
//! per-step jump probability, and the jump sizes.
//!
//! Step `k` (1-based) works on the raw particles `Ṽ((k-1) dt)`: they are
//! weighed against `R(k dt)` (together with fresh jump particles), resampled
//! into `V((k-1) dt)`, and finally propagated to `Ṽ(k dt)` using `R(k dt)`.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fmt_significant, ModelParams};
use crate::scalar::Real;

/// Floor applied to particle variances before square roots and divisions.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Raw-particle jump distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JumpPrior<T: Real> {
    /// Probability that a raw particle encodes a jump.
    pub lambda_th: T,
    pub mu0_j: T,
    pub sigma0_j: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FilterOutput<T: Real> {
    /// `v(k dt)` for `k = 0..=n`.
    pub variance_path: Vec<T>,
    /// `λ(k dt)` for `k = 1..=n`.
    pub jump_prob_path: Vec<T>,
    /// `Z(k dt)` for `k = 1..=n`.
    pub jump_size_path: Vec<T>,
    /// Jump intensity per year.
    pub lambda_hat: T,
    /// `None` when no step carries any jump probability.
    pub mu_j_hat: Option<T>,
    pub sigma_j_hat: Option<T>,
}

/// Per-step view handed to [`filter_pass_with`] observers.
pub struct StepView<'a, T> {
    pub step: usize,
    pub raw_variances: &'a [T],
    pub raw_jump_flags: &'a [bool],
    pub raw_jump_sizes: &'a [T],
    pub normalized_weights: &'a [T],
    pub resampled_variances: &'a [T],
    pub resampled_jump_sizes: &'a [T],
    pub jump_prob: T,
}

#[inline]
fn floored<T: Real>(v: T) -> T {
    v.max(T::of(VARIANCE_FLOOR))
}

/// Propagates resampled particles one step with caller-supplied noise `eps`.
///
/// `z_j = (R - mu dt - 1) / (sqrt(dt) sqrt(V_j))`, `w_j = rho z_j + sqrt(1 - rho^2) eps_j`,
/// and `Ṽ_j = V_j + kappa (theta - V_j) dt + sigma sqrt(dt) sqrt(V_j) w_j`, truncated at 0.
pub fn propagate_with_noise<T: Real>(
    resampled: &[T],
    eps: &[T],
    return_k: T,
    params: &ModelParams<T>,
    dt: T,
) -> Vec<T> {
    let sqrt_dt = dt.sqrt();
    let rho_perp = (T::one() - params.rho * params.rho).max(T::zero()).sqrt();
    let excess = return_k - params.mu * dt - T::one();
    resampled
        .iter()
        .zip(eps)
        .map(|(&v, &e)| {
            let sv = floored(v).sqrt();
            let z = excess / (sqrt_dt * sv);
            let w = z * params.rho + e * rho_perp;
            let next = v + params.kappa * (params.theta - v) * dt + params.sigma * sqrt_dt * sv * w;
            next.max(T::zero())
        })
        .collect()
}

pub fn propagate<T: Real, R: Rng + ?Sized>(
    resampled: &[T],
    return_k: T,
    params: &ModelParams<T>,
    dt: T,
    rng: &mut R,
) -> Vec<T> {
    let eps: Vec<T> = (0..resampled.len()).map(|_| T::std_normal(rng)).collect();
    propagate_with_noise(resampled, &eps, return_k, params, dt)
}

fn gaussian_log_weight<T: Real>(ret: T, mean: T, var: T) -> T {
    let d = ret - mean;
    -T::of(0.5) * ((T::TAU() * var).ln() + d * d / var)
}

/// Log of the jump-free weight: Gaussian density of `R` with mean
/// `1 + mu dt` and variance `Ṽ dt`.
fn log_weight_no_jump<T: Real>(v: T, ret: T, mu: T, dt: T) -> T {
    gaussian_log_weight(ret, T::one() + mu * dt, floored(v) * dt)
}

/// Log of the jump weight: the jump-free density rescaled by `e^Z`.
fn log_weight_jump<T: Real>(v: T, z: T, ret: T, mu: T, dt: T) -> T {
    let scale = z.exp();
    gaussian_log_weight(
        ret,
        scale * (T::one() + mu * dt),
        scale * scale * floored(v) * dt,
    )
}

fn check_weights<T: Real>(weights: Vec<T>) -> Result<Vec<T>> {
    if weights.iter().any(|&w| w > T::zero()) {
        Ok(weights)
    } else {
        Err(Error::DegenerateEnsemble { step: 0 })
    }
}

/// Raw weights without jumps.
pub fn weigh_no_jumps<T: Real>(raw_variances: &[T], ret: T, mu: T, dt: T) -> Result<Vec<T>> {
    check_weights(
        raw_variances
            .iter()
            .map(|&v| log_weight_no_jump(v, ret, mu, dt).exp())
            .collect(),
    )
}

/// Raw weights with the two-case jump likelihood.
pub fn weigh_with_jumps<T: Real>(
    raw_variances: &[T],
    raw_jump_flags: &[bool],
    raw_jump_sizes: &[T],
    ret: T,
    mu: T,
    dt: T,
) -> Result<Vec<T>> {
    if raw_jump_flags.len() != raw_variances.len() || raw_jump_sizes.len() != raw_variances.len() {
        return Err(Error::Misaligned("particle arrays differ in length".into()));
    }
    check_weights(
        raw_variances
            .iter()
            .zip(raw_jump_flags.iter().zip(raw_jump_sizes))
            .map(|(&v, (&j, &z))| {
                if j {
                    log_weight_jump(v, z, ret, mu, dt).exp()
                } else {
                    log_weight_no_jump(v, ret, mu, dt).exp()
                }
            })
            .collect(),
    )
}

/// Scales weights to sum to one.
pub fn normalize<T: Real>(weights: &[T]) -> Result<Vec<T>> {
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) || !total.is_finite() {
        return Err(Error::DegenerateEnsemble { step: 0 });
    }
    Ok(weights.iter().map(|&w| w / total).collect())
}

/// Draws `count` indices from the categorical distribution given by `weights`.
pub fn resample_indices<T: Real, R: Rng + ?Sized>(
    weights: &[T],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(weights.iter().copied())
        .map_err(|_| Error::DegenerateEnsemble { step: 0 })?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

/// Normalises the weights and resamples `values` from the induced categorical
/// distribution. Returns `(resampled, normalized_weights)`.
pub fn normalize_and_resample<T: Real, R: Rng + ?Sized>(
    values: &[T],
    weights: &[T],
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>)> {
    if values.len() != weights.len() {
        return Err(Error::Misaligned(
            "values and weights differ in length".into(),
        ));
    }
    let normalized = normalize(weights)?;
    let idx = resample_indices(&normalized, values.len(), rng)?;
    Ok((idx.into_iter().map(|i| values[i]).collect(), normalized))
}

/// `R'(k) = R(k) (1 - λ(k) (1 - e^{-Z(k)}))`.
pub fn adjust_returns<T: Real>(returns: &[T], jump_prob: &[T], jump_size: &[T]) -> Result<Vec<T>> {
    if returns.len() != jump_prob.len() || returns.len() != jump_size.len() {
        return Err(Error::Misaligned(format!(
            "returns {}, jump probabilities {}, jump sizes {}",
            returns.len(),
            jump_prob.len(),
            jump_size.len()
        )));
    }
    Ok(returns
        .iter()
        .zip(jump_prob.iter().zip(jump_size))
        .map(|(&r, (&l, &z))| r * (T::one() - l * (T::one() - (-z).exp())))
        .collect())
}

pub fn filter_pass<T: Real, R: Rng + ?Sized>(
    returns: &[T],
    params: &ModelParams<T>,
    jump_cfg: Option<&JumpPrior<T>>,
    particles: usize,
    dt: T,
    rng: &mut R,
) -> Result<FilterOutput<T>> {
    filter_pass_with(returns, params, jump_cfg, particles, dt, rng, |_| {})
}

/// [`filter_pass`] with an observer called after every resampling step.
pub fn filter_pass_with<T: Real, R: Rng + ?Sized, F>(
    returns: &[T],
    params: &ModelParams<T>,
    jump_cfg: Option<&JumpPrior<T>>,
    particles: usize,
    dt: T,
    rng: &mut R,
    mut observe: F,
) -> Result<FilterOutput<T>>
where
    F: FnMut(&StepView<'_, T>),
{
    let n = returns.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if particles < 2 {
        return Err(Error::invalid("particles", "need at least 2"));
    }
    if let Some(cfg) = jump_cfg {
        if !(cfg.lambda_th >= T::zero() && cfg.lambda_th < T::one()) {
            return Err(Error::invalid("lambda_th", "must lie in [0, 1)"));
        }
    }
    let g = T::from_usize(particles).unwrap();
    let mu = params.mu;

    let mut raw = vec![params.theta; particles];
    let mut flags = vec![false; particles];
    let mut sizes = vec![T::zero(); particles];
    let mut log_w = vec![T::zero(); particles];
    let mut weights = vec![T::zero(); particles];
    let mut resampled = vec![T::zero(); particles];
    let mut resampled_sizes = vec![T::zero(); particles];

    let mut variance_path = Vec::with_capacity(n + 1);
    let mut jump_prob_path = Vec::with_capacity(n);
    let mut jump_size_path = Vec::with_capacity(n);

    for (k, &ret) in returns.iter().enumerate() {
        let step = k + 1;
        match jump_cfg {
            Some(cfg) => {
                for j in 0..particles {
                    flags[j] = T::open01(rng) < cfg.lambda_th;
                    sizes[j] = T::normal(cfg.mu0_j, cfg.sigma0_j, rng);
                    log_w[j] = if flags[j] {
                        log_weight_jump(raw[j], sizes[j], ret, mu, dt)
                    } else {
                        log_weight_no_jump(raw[j], ret, mu, dt)
                    };
                }
            }
            None => {
                for j in 0..particles {
                    log_w[j] = log_weight_no_jump(raw[j], ret, mu, dt);
                }
            }
        }

        // Shifting by the maximum leaves the normalised weights unchanged.
        let max = log_w.iter().copied().fold(T::neg_infinity(), T::max);
        if !max.is_finite() {
            return Err(Error::DegenerateEnsemble { step });
        }
        let mut total = T::zero();
        for (w, &lw) in weights.iter_mut().zip(&log_w) {
            *w = (lw - max).exp();
            total = total + *w;
        }
        for w in weights.iter_mut() {
            *w = *w / total;
        }

        let dist = WeightedIndex::new(weights.iter().copied())
            .map_err(|_| Error::DegenerateEnsemble { step })?;
        for j in 0..particles {
            let i = dist.sample(rng);
            resampled[j] = raw[i];
            resampled_sizes[j] = sizes[i];
        }

        let jump_prob = if jump_cfg.is_some() {
            let p: T = flags
                .iter()
                .zip(&weights)
                .filter(|(&f, _)| f)
                .map(|(_, &w)| w)
                .sum();
            p.min(T::one())
        } else {
            T::zero()
        };

        observe(&StepView {
            step,
            raw_variances: &raw,
            raw_jump_flags: &flags,
            raw_jump_sizes: &sizes,
            normalized_weights: &weights,
            resampled_variances: &resampled,
            resampled_jump_sizes: &resampled_sizes,
            jump_prob,
        });

        variance_path.push(resampled.iter().copied().sum::<T>() / g);
        jump_prob_path.push(jump_prob);
        jump_size_path.push(if jump_cfg.is_some() {
            resampled_sizes.iter().copied().sum::<T>() / g
        } else {
            T::zero()
        });

        raw = propagate(&resampled, ret, params, dt, rng);
    }
    // No return follows the last raw particles, so they enter unweighted.
    variance_path.push(raw.iter().copied().sum::<T>() / g);

    let horizon = T::from_usize(n).unwrap() * dt;
    let lambda_total: T = jump_prob_path.iter().copied().sum();
    let lambda_hat = lambda_total / horizon;
    let (mu_j_hat, sigma_j_hat) = jump_size_moments(&jump_prob_path, &jump_size_path);

    Ok(FilterOutput {
        variance_path,
        jump_prob_path,
        jump_size_path,
        lambda_hat,
        mu_j_hat,
        sigma_j_hat,
    })
}

/// Jump-probability-weighted mean and standard deviation of the jump sizes.
pub fn jump_size_moments<T: Real>(jump_prob: &[T], jump_size: &[T]) -> (Option<T>, Option<T>) {
    let total: T = jump_prob.iter().copied().sum();
    if !(total > T::zero()) {
        return (None, None);
    }
    let mean = jump_prob
        .iter()
        .zip(jump_size)
        .map(|(&l, &z)| l * z)
        .sum::<T>()
        / total;
    let n = T::from_usize(jump_prob.len()).unwrap();
    if jump_prob.len() < 2 {
        return (Some(mean), None);
    }
    let ss = jump_prob
        .iter()
        .zip(jump_size)
        .map(|(&l, &z)| l * (z - mean) * (z - mean))
        .sum::<T>();
    let sd = (ss / ((n - T::one()) / n * total)).sqrt();
    (Some(mean), Some(sd))
}

impl<T: Real> FilterOutput<T> {
    /// Writes `t,v,lambda,z` per grid point; row 0 has no jump columns.
    pub fn write_csv<W: Write>(&self, dt: T, out: W) -> Result<()> {
        write_state_csv(
            &self.variance_path,
            &self.jump_prob_path,
            &self.jump_size_path,
            dt,
            out,
        )
    }
}

pub(crate) fn write_state_csv<T: Real, W: Write>(
    variance_path: &[T],
    jump_prob_path: &[T],
    jump_size_path: &[T],
    dt: T,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "v", "lambda", "z"])?;
    for (k, v) in variance_path.iter().enumerate() {
        let t = fmt_significant((T::from_usize(k).unwrap() * dt).to_f64_lossy(), 10);
        let (l, z) = if k == 0 {
            (String::new(), String::new())
        } else {
            (
                format!("{}", jump_prob_path[k - 1].to_f64_lossy()),
                format!("{}", jump_size_path[k - 1].to_f64_lossy()),
            )
        };
        w.write_record([t, format!("{}", v.to_f64_lossy()), l, z])?;
    }
    w.flush()?;
    Ok(())
}
