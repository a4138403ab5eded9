//! Model parameters and Euler-Maruyama path generation for the Heston model
//! with Merton log-normal jumps (Bates).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Real;

/// Smallest admissible one-step price multiplier.
pub const MIN_PRICE_MULTIPLIER: f64 = 1e-8;

/// Diffusive parameters and initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModelParams<T: Real> {
    /// Drift, per year.
    pub mu: T,
    /// Mean-reversion rate of the variance, per year.
    pub kappa: T,
    /// Long-run variance.
    pub theta: T,
    /// Volatility of the variance.
    pub sigma: T,
    /// Correlation between price and variance shocks.
    pub rho: T,
    pub s0: T,
    pub v0: T,
}

impl<T: Real> ModelParams<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("mu", self.mu),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("sigma", self.sigma),
            ("rho", self.rho),
            ("s0", self.s0),
            ("v0", self.v0),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.kappa <= T::zero() {
            return Err(Error::invalid("kappa", "must be > 0"));
        }
        if self.theta <= T::zero() {
            return Err(Error::invalid("theta", "must be > 0"));
        }
        if self.sigma < T::zero() {
            return Err(Error::invalid("sigma", "must be >= 0"));
        }
        if self.rho.abs() > T::one() {
            return Err(Error::invalid("rho", "must lie in [-1, 1]"));
        }
        if self.s0 <= T::zero() {
            return Err(Error::invalid("s0", "must be > 0"));
        }
        if self.v0 < T::zero() {
            return Err(Error::invalid("v0", "must be >= 0"));
        }
        Ok(())
    }
}

/// Intensity and log-size distribution of the price jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JumpParams<T: Real> {
    /// Expected number of jumps per year.
    pub lambda: T,
    /// Mean log jump size.
    pub mu_j: T,
    /// Standard deviation of the log jump size.
    pub sigma_j: T,
}

impl<T: Real> JumpParams<T> {
    pub fn none() -> Self {
        JumpParams {
            lambda: T::zero(),
            mu_j: T::zero(),
            sigma_j: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be finite and >= 0"));
        }
        if !(self.sigma_j >= T::zero()) || !self.sigma_j.is_finite() {
            return Err(Error::invalid("sigma_j", "must be finite and >= 0"));
        }
        if !self.mu_j.is_finite() {
            return Err(Error::invalid("mu_j", "must be finite"));
        }
        Ok(())
    }
}

/// Equidistant grid `{k dt}` for `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TimeGrid<T: Real> {
    pub n: usize,
    pub dt: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(n: usize, dt: T) -> Result<Self> {
        let grid = TimeGrid { n, dt };
        grid.validate()?;
        Ok(grid)
    }

    /// Daily trading grid (252 steps per year) covering `years`.
    pub fn daily(years: f64) -> Result<Self> {
        Self::new((years * 252.0).round() as usize, T::of(1.0 / 252.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "need at least one step"));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Horizon `n * dt`.
    pub fn t_end(&self) -> T {
        T::from_usize(self.n).unwrap() * self.dt
    }

    pub fn time(&self, k: usize) -> T {
        T::from_usize(k).unwrap() * self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SimulatedPath<T: Real> {
    /// `n + 1` prices on the grid.
    pub prices: Vec<T>,
    /// `n + 1` variances on the grid (truncated at zero).
    pub variances: Vec<T>,
    /// Grid indices `k` at which a jump was applied to `S(k dt)`.
    pub jump_times: Vec<usize>,
    /// Log jump size for each entry of `jump_times`.
    pub jump_sizes: Vec<T>,
    pub seed: u64,
}

/// Standard normal shocks consumed by the simulator, one per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Shocks<T> {
    pub price: Vec<T>,
    /// Correlated variance shocks `rho * eps_s + sqrt(1 - rho^2) * eps_add`.
    pub variance: Vec<T>,
}

/// Generates one Bates path with full truncation of the variance.
///
/// Diffusion and jump draws come from separate streams keyed by `seed`, so a
/// zero-intensity jump specification reproduces the jump-free path exactly.
pub fn simulate<T: Real>(
    params: &ModelParams<T>,
    jumps: Option<&JumpParams<T>>,
    grid: &TimeGrid<T>,
    seed: u64,
) -> Result<SimulatedPath<T>> {
    simulate_traced(params, jumps, grid, seed).map(|(path, _)| path)
}

/// As [`simulate`], also returning the Gaussian shocks that drove the path.
pub fn simulate_traced<T: Real>(
    params: &ModelParams<T>,
    jumps: Option<&JumpParams<T>>,
    grid: &TimeGrid<T>,
    seed: u64,
) -> Result<(SimulatedPath<T>, Shocks<T>)> {
    params.validate()?;
    grid.validate()?;
    let jump_prob = match jumps {
        Some(j) => {
            j.validate()?;
            let p = j.lambda * grid.dt;
            if p >= T::one() {
                return Err(Error::invalid(
                    "lambda",
                    format!("lambda * dt = {p} must be < 1 for per-step thinning"),
                ));
            }
            p
        }
        None => T::zero(),
    };

    let n = grid.n;
    let dt = grid.dt;
    let sqrt_dt = dt.sqrt();
    let one = T::one();
    let rho_perp = (one - params.rho * params.rho).max(T::zero()).sqrt();
    let floor = T::of(MIN_PRICE_MULTIPLIER);

    let mut diffusion_rng = stream(seed, &[0]);
    let mut jump_rng = stream(seed, &[1]);

    let mut prices = Vec::with_capacity(n + 1);
    let mut variances = Vec::with_capacity(n + 1);
    let mut shocks = Shocks {
        price: Vec::with_capacity(n),
        variance: Vec::with_capacity(n),
    };
    let mut jump_times = Vec::new();
    let mut jump_sizes = Vec::new();

    let mut s = params.s0;
    // Raw Euler state; may dip below zero, only its positive part enters the dynamics.
    let mut v = params.v0;
    prices.push(s);
    variances.push(v.max(T::zero()));

    for k in 1..=n {
        let eps_s = T::std_normal(&mut diffusion_rng);
        let eps_add = T::std_normal(&mut diffusion_rng);
        let eps_v = params.rho * eps_s + rho_perp * eps_add;

        let v_pos = v.max(T::zero());
        let sd = v_pos.sqrt() * sqrt_dt;
        let multiplier = (one + params.mu * dt + sd * eps_s).max(floor);
        s = s * multiplier;
        v = v + params.kappa * (params.theta - v_pos) * dt + params.sigma * sd * eps_v;

        if let Some(j) = jumps {
            if jump_prob > T::zero() && T::open01(&mut jump_rng) < jump_prob {
                let z = T::normal(j.mu_j, j.sigma_j, &mut jump_rng);
                s = s * z.exp();
                jump_times.push(k);
                jump_sizes.push(z);
            }
        }

        prices.push(s);
        variances.push(v.max(T::zero()));
        shocks.price.push(eps_s);
        shocks.variance.push(eps_v);
    }

    Ok((
        SimulatedPath {
            prices,
            variances,
            jump_times,
            jump_sizes,
            seed,
        },
        shocks,
    ))
}

/// One-step price ratios `S(k dt) / S((k-1) dt)` for `k = 1..=n`.
pub fn returns<T: Real>(path: &SimulatedPath<T>) -> Vec<T> {
    price_ratios(&path.prices)
}

pub fn price_ratios<T: Real>(prices: &[T]) -> Vec<T> {
    prices.windows(2).map(|w| w[1] / w[0]).collect()
}

/// Formats `x` with `digits` significant digits in fixed notation.
pub(crate) fn fmt_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

impl<T: Real> SimulatedPath<T> {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Writes `t,price,variance,jump_logsize`, one row per grid point.
    pub fn write_csv<W: Write>(&self, grid: &TimeGrid<T>, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "price", "variance", "jump_logsize"])?;
        let mut jumps = self.jump_times.iter().zip(&self.jump_sizes).peekable();
        for (k, (p, v)) in self.prices.iter().zip(&self.variances).enumerate() {
            let jump = match jumps.peek() {
                Some((&jk, &z)) if jk == k => {
                    jumps.next();
                    format!("{}", z.to_f64_lossy())
                }
                _ => String::new(),
            };
            w.write_record([
                fmt_significant(grid.time(k).to_f64_lossy(), 10),
                format!("{}", p.to_f64_lossy()),
                format!("{}", v.to_f64_lossy()),
                jump,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
