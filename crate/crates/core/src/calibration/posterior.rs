//! Conjugate posteriors for the regular (non-jump) parameters.
//!
//! Each block is computed in two stages: sufficient statistics of the
//! regression built from the data, then the posterior those statistics
//! induce under [`Priors`]. Zero statistics reproduce the prior exactly.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::Mat2;
use super::priors::Priors;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Floor applied to the inverse-gamma scale of `sigma^2`.
pub const B_SIGMA_FLOOR: f64 = 1e-12;

fn check_positive<T: Real>(values: &[T], what: &str) -> Result<()> {
    match values
        .iter()
        .position(|&v| !(v > T::zero()) || !v.is_finite())
    {
        Some(k) => Err(Error::Domain(format!(
            "{what}[{k}] = {} is not strictly positive",
            values[k]
        ))),
        None => Ok(()),
    }
}

fn sample_inverse_gamma<T: Real, R: Rng + ?Sized>(shape: T, scale: T, rng: &mut R) -> Result<T> {
    T::inverse_gamma(shape, scale, rng).ok_or_else(|| {
        Error::Numerical(format!(
            "invalid inverse-gamma parameters ({shape}, {scale})"
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormalPosterior<T: Real> {
    pub mean: T,
    pub precision: T,
}

impl<T: Real> NormalPosterior<T> {
    pub fn sd(&self) -> T {
        self.precision.sqrt().recip()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        T::normal(self.mean, self.sd(), rng)
    }
}

// ---------------------------------------------------------------- drift --

/// Statistics of the regression `y^S = eta x^S + eps`, where both sides are
/// scaled by `1 / sqrt(v((k-1) dt) dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftRegression<T> {
    pub xtx: T,
    pub xty: T,
    pub n: usize,
}

impl<T: Real> DriftRegression<T> {
    /// `returns[k-1] = R(k dt)` is paired with `variance_path[k-1] = v((k-1) dt)`.
    pub fn from_data(returns: &[T], variance_path: &[T], dt: T) -> Result<Self> {
        let n = returns.len();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if variance_path.len() < n {
            return Err(Error::Misaligned(format!(
                "{n} returns need {n} leading variances, got {}",
                variance_path.len()
            )));
        }
        check_positive(&variance_path[..n], "variance")?;
        let (mut xtx, mut xty) = (T::zero(), T::zero());
        for (&r, &v) in returns.iter().zip(variance_path) {
            let x = (v * dt).sqrt().recip();
            xtx = xtx + x * x;
            xty = xty + x * x * r;
        }
        Ok(DriftRegression { xtx, xty, n })
    }

    pub fn empty() -> Self {
        DriftRegression {
            xtx: T::zero(),
            xty: T::zero(),
            n: 0,
        }
    }

    /// Ordinary least squares estimate of `eta`.
    pub fn ols(&self) -> Option<T> {
        (self.xtx > T::zero()).then(|| self.xty / self.xtx)
    }

    pub fn posterior(&self, priors: &Priors<T>) -> NormalPosterior<T> {
        let tau0 = priors.tau0_eta();
        let precision = self.xtx + tau0;
        // x'x * eta_hat == x'y, which stays defined when x'x = 0.
        let mean = (tau0 * priors.mu0_eta + self.xty) / precision;
        NormalPosterior { mean, precision }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaDraw<T> {
    pub eta: T,
    pub mu: T,
}

pub fn eta_to_mu<T: Real>(eta: T, dt: T) -> T {
    (eta - T::one()) / dt
}

/// Samples `eta` from its normal posterior and converts it to the drift `mu`.
pub fn draw_eta<T: Real, R: Rng + ?Sized>(
    returns: &[T],
    variance_path: &[T],
    dt: T,
    priors: &Priors<T>,
    rng: &mut R,
) -> Result<EtaDraw<T>> {
    let post = DriftRegression::from_data(returns, variance_path, dt)?.posterior(priors);
    let eta = post.sample(rng);
    Ok(EtaDraw {
        eta,
        mu: eta_to_mu(eta, dt),
    })
}

// ------------------------------------------------------ kappa and theta --

/// Statistics of `y^v = X^v beta + sigma eps^v` built from `v(dt) .. v(n dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolRegression<T: Real> {
    pub xtx: Mat2<T>,
    pub xty: [T; 2],
    pub yty: T,
    /// Number of regression rows (`n - 1`).
    pub rows: usize,
    /// Number of time steps `n` of the variance path.
    pub n: usize,
}

impl<T: Real> VolRegression<T> {
    pub fn from_variance_path(variance_path: &[T], dt: T) -> Result<Self> {
        if variance_path.len() < 3 {
            return Err(Error::InsufficientData {
                needed: 3,
                got: variance_path.len(),
            });
        }
        let n = variance_path.len() - 1;
        check_positive(&variance_path[1..n], "variance")?;
        let sqrt_dt = dt.sqrt();
        let mut xtx = Mat2::zeros();
        let mut xty = [T::zero(); 2];
        let mut yty = T::zero();
        for w in variance_path[1..].windows(2) {
            let sv = w[0].sqrt();
            let x1 = (sv * sqrt_dt).recip();
            let x2 = sv / sqrt_dt;
            let y = w[1] * x1;
            let m = &mut xtx.0;
            m[0][0] = m[0][0] + x1 * x1;
            m[0][1] = m[0][1] + x1 * x2;
            m[1][1] = m[1][1] + x2 * x2;
            xty[0] = xty[0] + x1 * y;
            xty[1] = xty[1] + x2 * y;
            yty = yty + y * y;
        }
        xtx.0[1][0] = xtx.0[0][1];
        Ok(VolRegression {
            xtx,
            xty,
            yty,
            rows: n - 1,
            n,
        })
    }

    pub fn empty() -> Self {
        VolRegression {
            xtx: Mat2::zeros(),
            xty: [T::zero(); 2],
            yty: T::zero(),
            rows: 0,
            n: 0,
        }
    }

    pub fn ols(&self) -> Option<[T; 2]> {
        self.xtx.solve(self.xty)
    }

    pub fn posterior(&self, priors: &Priors<T>) -> Result<BetaPosterior<T>> {
        let precision = self.xtx.add(&priors.lambda0_beta);
        let l0mu0 = priors.lambda0_beta.mul_vec(priors.mu0_beta);
        let rhs = [l0mu0[0] + self.xty[0], l0mu0[1] + self.xty[1]];
        let mean = precision
            .solve(rhs)
            .ok_or_else(|| Error::Numerical("posterior precision of beta is singular".into()))?;
        Ok(BetaPosterior { mean, precision })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPosterior<T: Real> {
    pub mean: [T; 2],
    pub precision: Mat2<T>,
}

impl<T: Real> BetaPosterior<T> {
    /// Draws `beta ~ N(mean, sigma^2 precision^-1)`.
    pub fn sample<R: Rng + ?Sized>(&self, sigma: T, rng: &mut R) -> Result<[T; 2]> {
        let chol = self
            .precision
            .inverse()
            .and_then(|cov| cov.scale(sigma * sigma).cholesky());
        let l = match chol {
            Some(l) => l.0,
            None if sigma == T::zero() => return Ok(self.mean),
            None => {
                return Err(Error::Numerical(
                    "posterior covariance of beta is not positive definite".into(),
                ))
            }
        };
        let z = [T::std_normal(rng), T::std_normal(rng)];
        Ok([
            self.mean[0] + l[0][0] * z[0],
            self.mean[1] + l[1][0] * z[0] + l[1][1] * z[1],
        ])
    }
}

/// Maps `beta = (kappa theta dt, 1 - kappa dt)` back to `(kappa, theta)`.
pub fn beta_to_kappa_theta<T: Real>(beta: [T; 2], dt: T) -> Result<(T, T)> {
    if beta[1] == T::one() {
        return Err(Error::DegenerateKappa);
    }
    let kappa = (T::one() - beta[1]) / dt;
    let theta = beta[0] / (kappa * dt);
    Ok((kappa, theta))
}

pub fn kappa_theta_to_beta<T: Real>(kappa: T, theta: T, dt: T) -> [T; 2] {
    [kappa * theta * dt, T::one() - kappa * dt]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaDraw<T> {
    pub beta: [T; 2],
    pub kappa: T,
    pub theta: T,
}

/// One draw of `beta` given the previous `sigma`.
pub fn draw_beta<T: Real, R: Rng + ?Sized>(
    variance_path: &[T],
    dt: T,
    priors: &Priors<T>,
    sigma_prev: T,
    rng: &mut R,
) -> Result<BetaDraw<T>> {
    if !(sigma_prev > T::zero()) {
        return Err(Error::invalid("sigma_prev", "must be > 0"));
    }
    let post = VolRegression::from_variance_path(variance_path, dt)?.posterior(priors)?;
    let beta = post.sample(sigma_prev, rng)?;
    let (kappa, theta) = beta_to_kappa_theta(beta, dt)?;
    Ok(BetaDraw { beta, kappa, theta })
}

// ---------------------------------------------------------------- sigma --

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGammaPosterior<T> {
    pub shape: T,
    pub scale: T,
    /// Whether the scale had to be floored at [`B_SIGMA_FLOOR`].
    pub clamped: bool,
}

impl<T: Real> InverseGammaPosterior<T> {
    /// Mean `b / (a - 1)`, defined for `a > 1`.
    pub fn mean(&self) -> T {
        self.scale / (self.shape - T::one())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<T> {
        sample_inverse_gamma(self.shape, self.scale, rng)
    }
}

pub fn sigma_posterior<T: Real>(
    regression: &VolRegression<T>,
    priors: &Priors<T>,
) -> Result<InverseGammaPosterior<T>> {
    let half = T::of(0.5);
    let beta = regression.posterior(priors)?;
    let shape = priors.a0_sigma + half * T::from_usize(regression.n).unwrap();
    let raw = priors.b0_sigma
        + half
            * (regression.yty + priors.lambda0_beta.quad_form(priors.mu0_beta)
                - beta.precision.quad_form(beta.mean));
    let floor = T::of(B_SIGMA_FLOOR);
    let clamped = !(raw > floor);
    if clamped {
        warn!("inverse-gamma scale for sigma^2 evaluated to {raw}; clamped to {floor}");
    }
    Ok(InverseGammaPosterior {
        shape,
        scale: if clamped { floor } else { raw },
        clamped,
    })
}

/// Samples `sigma^2` and returns its positive square root.
pub fn draw_sigma<T: Real, R: Rng + ?Sized>(
    regression: &VolRegression<T>,
    priors: &Priors<T>,
    rng: &mut R,
) -> Result<T> {
    let post = sigma_posterior(regression, priors)?;
    if !(post.shape > T::one()) {
        return Err(Error::Domain(format!(
            "inverse-gamma shape {} must exceed 1",
            post.shape
        )));
    }
    Ok(post.sample(rng)?.sqrt())
}

// ------------------------------------------------------------------ rho --

/// Standardised residuals of the price and variance equations.
///
/// `e1(k) = (R(k dt) - mu dt - 1) / sqrt(v((k-1) dt) dt)` and
/// `e2(k) = (v(k dt) - v((k-1) dt) - kappa (theta - v((k-1) dt)) dt) / sqrt(v((k-1) dt) dt)`
/// for `k = 1..=n`.
pub fn compute_residuals<T: Real>(
    returns: &[T],
    variance_path: &[T],
    mu: T,
    kappa: T,
    theta: T,
    dt: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let n = returns.len();
    if variance_path.len() != n + 1 {
        return Err(Error::Misaligned(format!(
            "{n} returns need {} variances, got {}",
            n + 1,
            variance_path.len()
        )));
    }
    check_positive(&variance_path[..n], "variance")?;
    let mut e1 = Vec::with_capacity(n);
    let mut e2 = Vec::with_capacity(n);
    for (k, &r) in returns.iter().enumerate() {
        let (prev, next) = (variance_path[k], variance_path[k + 1]);
        let scale = (prev * dt).sqrt();
        e1.push((r - mu * dt - T::one()) / scale);
        e2.push((next - prev - kappa * (theta - prev) * dt) / scale);
    }
    Ok((e1, e2))
}

/// Entries of `A = e' e` for `e = [e1 e2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualMoments<T> {
    pub a11: T,
    pub a12: T,
    pub a22: T,
    pub n: usize,
}

impl<T: Real> ResidualMoments<T> {
    pub fn from_residuals(e1: &[T], e2: &[T]) -> Result<Self> {
        if e1.len() != e2.len() {
            return Err(Error::Misaligned(format!(
                "residual vectors of length {} and {}",
                e1.len(),
                e2.len()
            )));
        }
        if e1.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: e1.len(),
            });
        }
        let mut m = Self::empty();
        for (&a, &b) in e1.iter().zip(e2) {
            m.a11 = m.a11 + a * a;
            m.a12 = m.a12 + a * b;
            m.a22 = m.a22 + b * b;
        }
        m.n = e1.len();
        Ok(m)
    }

    pub fn empty() -> Self {
        ResidualMoments {
            a11: T::zero(),
            a12: T::zero(),
            a22: T::zero(),
            n: 0,
        }
    }

    pub fn posterior(&self, priors: &Priors<T>) -> Result<RhoPosterior<T>> {
        let half = T::of(0.5);
        let tau0 = priors.tau0_psi();
        let tau_psi = self.a11 + tau0;
        if tau_psi == T::zero() || !tau_psi.is_finite() {
            return Err(Error::Domain(format!("A11 + tau0_psi = {tau_psi}")));
        }
        let explained = if self.a11 > T::zero() {
            self.a12 * self.a12 / self.a11
        } else {
            T::zero()
        };
        Ok(RhoPosterior {
            a_omega: priors.a0_omega + half * T::from_usize(self.n).unwrap(),
            b_omega: priors.b0_omega + half * (self.a22 - explained),
            mu_psi: (self.a12 + priors.mu0_psi * tau0) / tau_psi,
            tau_psi,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoPosterior<T> {
    pub a_omega: T,
    pub b_omega: T,
    pub mu_psi: T,
    pub tau_psi: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoDraw<T> {
    pub psi: T,
    pub omega: T,
    pub rho: T,
}

/// `rho = psi / sqrt(psi^2 + omega)`, kept strictly inside (-1, 1).
pub fn rho_from_psi_omega<T: Real>(psi: T, omega: T) -> T {
    let rho = psi / (psi * psi + omega).sqrt();
    let bound = T::one() - T::epsilon();
    rho.max(-bound).min(bound)
}

impl<T: Real> RhoPosterior<T> {
    /// Draws `omega ~ IG(a, b)`, then `psi ~ N(mu_psi, sqrt(omega / tau_psi))`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<RhoDraw<T>> {
        let omega = sample_inverse_gamma(self.a_omega, self.b_omega, rng)?;
        let psi = T::normal(self.mu_psi, (omega / self.tau_psi).sqrt(), rng);
        Ok(RhoDraw {
            psi,
            omega,
            rho: rho_from_psi_omega(psi, omega),
        })
    }
}

pub fn draw_rho<T: Real, R: Rng + ?Sized>(
    stock_residuals: &[T],
    vol_residuals: &[T],
    priors: &Priors<T>,
    rng: &mut R,
) -> Result<RhoDraw<T>> {
    ResidualMoments::from_residuals(stock_residuals, vol_residuals)?
        .posterior(priors)?
        .sample(rng)
}
