//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const DT: f64 = 1.0 / 252.0;

/// Test-side RNG, deliberately a different generator from the library's.
pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Solves `A x = b` for small dense systems by Gaussian elimination with
/// partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Design matrix and response of a regression, one row per observation.
pub struct Design {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Design {
    /// Drift regression: `R(k) / sqrt(v(k-1) dt) = eta / sqrt(v(k-1) dt) + eps`.
    pub fn drift(returns: &[f64], v: &[f64], dt: f64) -> Self {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (r, vk) in returns.iter().zip(v) {
            let s = (vk * dt).sqrt();
            x.push(vec![1.0 / s]);
            y.push(r / s);
        }
        Design { x, y }
    }

    /// Variance regression on `v(1) .. v(n)`:
    /// `v(k+1) / sqrt(v(k) dt) = b1 / sqrt(v(k) dt) + b2 sqrt(v(k)) / sqrt(dt) + sigma eps`.
    pub fn variance(v: &[f64], dt: f64) -> Self {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for k in 1..v.len() - 1 {
            let s = (v[k] * dt).sqrt();
            x.push(vec![1.0 / s, v[k].sqrt() / dt.sqrt()]);
            y.push(v[k + 1] / s);
        }
        Design { x, y }
    }

    pub fn p(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }

    /// `X'X + prior_precision`.
    pub fn precision(&self, prior_precision: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let p = prior_precision.len();
        let mut m = prior_precision.to_vec();
        for row in &self.x {
            for i in 0..p {
                for j in 0..p {
                    m[i][j] += row[i] * row[j];
                }
            }
        }
        m
    }

    /// Posterior mean `(X'X + L0)^-1 (X'y + L0 m0)` via an explicit solve.
    pub fn posterior_mean(&self, prior_precision: &[Vec<f64>], prior_mean: &[f64]) -> Vec<f64> {
        let p = prior_mean.len();
        let mut rhs: Vec<f64> = (0..p)
            .map(|i| (0..p).map(|j| prior_precision[i][j] * prior_mean[j]).sum())
            .collect();
        for (row, y) in self.x.iter().zip(&self.y) {
            for i in 0..p {
                rhs[i] += row[i] * y;
            }
        }
        solve(self.precision(prior_precision), rhs)
    }

    pub fn ols(&self) -> Vec<f64> {
        let p = self.p();
        self.posterior_mean(&vec![vec![0.0; p]; p], &vec![0.0; p])
    }

    /// Inverse-gamma scale via the residual form
    /// `b0 + (|y - X m|^2 + (m - m0)' L0 (m - m0)) / 2`.
    pub fn ig_scale(&self, prior_precision: &[Vec<f64>], prior_mean: &[f64], b0: f64) -> f64 {
        let m = self.posterior_mean(prior_precision, prior_mean);
        let p = m.len();
        let rss: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(row, y)| {
                let fit: f64 = (0..p).map(|i| row[i] * m[i]).sum();
                (y - fit).powi(2)
            })
            .sum();
        let d: Vec<f64> = (0..p).map(|i| m[i] - prior_mean[i]).collect();
        let pen: f64 = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| d[i] * prior_precision[i][j] * d[j])
                    .sum::<f64>()
            })
            .sum();
        b0 + 0.5 * (rss + pen)
    }
}

/// Mean of the density proportional to `s^-(a+1) exp(-b/s)` by trapezoidal
/// quadrature on a log grid around its mode.
pub fn inverse_gamma_mean_by_quadrature(a: f64, b: f64) -> f64 {
    let mode = b / (a + 1.0);
    let width = 40.0 / a.sqrt().max(1.0) + 8.0;
    let (lo, hi) = (mode.ln() - width, mode.ln() + width);
    let steps = 200_000;
    let h = (hi - lo) / steps as f64;
    // On x = ln s the integrand of the normaliser is s * f(s).
    let log_f = |x: f64| -a * x - b * (-x).exp();
    let peak = log_f(mode.ln());
    let (mut z, mut m) = (0.0, 0.0);
    for i in 0..=steps {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        let f = (log_f(x) - peak).exp();
        z += w * f;
        m += w * f * x.exp();
    }
    m / z
}

/// Random strictly positive variance path of `len` points.
pub fn random_variance_path<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.02 + 0.08 * rng.random::<f64>()];
    for _ in 1..len {
        let last = *v.last().unwrap();
        v.push((last * (1.0 + 0.3 * (rng.random::<f64>() - 0.5))).max(1e-3));
    }
    v
}

/// One-sample Kolmogorov-Smirnov test; returns `(D, p)` with the asymptotic
/// Kolmogorov distribution.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

/// Price-scale-free random walk with positive prices.
pub fn random_walk<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut p = vec![100.0];
    for _ in 1..len {
        let last = *p.last().unwrap();
        let step: f64 = rng.random::<f64>() - 0.5;
        p.push(last * (0.02 * step).exp());
    }
    p
}

/// Up- and down-crossings of zero (or a level) by a brute-force scan over
/// consecutive defined values, with warm-up suppression before `first`.
pub fn scan_crossings(
    series: &[Option<f64>],
    up_level: f64,
    down_level: f64,
    first: usize,
) -> (Vec<bool>, Vec<bool>) {
    let n = series.len();
    let mut buy = vec![false; n];
    let mut sell = vec![false; n];
    for t in first.max(1)..n {
        if let (Some(a), Some(b)) = (series[t - 1], series[t]) {
            buy[t] = a < up_level && b > up_level;
            sell[t] = a > down_level && b < down_level;
        }
    }
    (buy, sell)
}
