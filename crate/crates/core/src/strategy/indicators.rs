//! EMA, MACD and RSI with their crossing signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Buy/sell flags for one asset, one entry per time step.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SignalSeries {
    pub buy: Vec<bool>,
    pub sell: Vec<bool>,
}

impl SignalSeries {
    pub fn quiet(len: usize) -> Self {
        SignalSeries {
            buy: vec![false; len],
            sell: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.buy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buy.is_empty()
    }

    pub fn buy_count(&self) -> usize {
        self.buy.iter().filter(|&&b| b).count()
    }

    pub fn sell_count(&self) -> usize {
        self.sell.iter().filter(|&&s| s).count()
    }
}

/// Exponential moving average with smoothing `2 / (lag + 1)`, seeded with
/// the first observation.
pub fn ema<T: Real>(prices: &[T], lag: usize) -> Result<Vec<T>> {
    if lag == 0 {
        return Err(Error::invalid("lag", "must be >= 1"));
    }
    let first = *prices
        .first()
        .ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    let alpha = T::of(2.0) / T::from_usize(lag + 1).unwrap();
    let mut out = Vec::with_capacity(prices.len());
    let mut acc = first;
    out.push(acc);
    for &p in &prices[1..] {
        acc = alpha * p + (T::one() - alpha) * acc;
        out.push(acc);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacdParams {
    /// Short EMA lag.
    pub p: usize,
    /// Long EMA lag.
    pub q: usize,
    /// Signal-line lag.
    pub s: usize,
}

impl Default for MacdParams {
    fn default() -> Self {
        MacdParams { p: 12, q: 26, s: 9 }
    }
}

impl MacdParams {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.s == 0 {
            return Err(Error::invalid("macd", "lags must be >= 1"));
        }
        if self.p >= self.q {
            return Err(Error::invalid(
                "macd",
                "short lag p must be below long lag q",
            ));
        }
        Ok(())
    }
}

/// `F = EMA_s(MACD) - MACD` with `MACD = EMA_p - EMA_q`.
pub fn macd_oscillator<T: Real>(prices: &[T], params: &MacdParams) -> Result<Vec<T>> {
    params.validate()?;
    let short = ema(prices, params.p)?;
    let long = ema(prices, params.q)?;
    let macd: Vec<T> = short.iter().zip(&long).map(|(&a, &b)| a - b).collect();
    let signal = ema(&macd, params.s)?;
    Ok(signal.iter().zip(&macd).map(|(&s, &m)| s - m).collect())
}

/// Marks strict up- and down-crossings of `level`, starting at `first`.
fn crossings<T: Real>(series: &[Option<T>], up: T, down: T, first: usize) -> SignalSeries {
    let mut out = SignalSeries::quiet(series.len());
    for t in first.max(1)..series.len() {
        if let (Some(prev), Some(cur)) = (series[t - 1], series[t]) {
            out.buy[t] = prev < up && cur > up;
            out.sell[t] = prev > down && cur < down;
        }
    }
    out
}

/// Buy when `F` crosses zero upward, sell when it crosses downward.
/// Signals before index `q` are suppressed while the long EMA warms up.
pub fn macd_signal_series<T: Real>(prices: &[T], params: &MacdParams) -> Result<SignalSeries> {
    if prices.len() <= params.q {
        return Err(Error::InsufficientData {
            needed: params.q + 1,
            got: prices.len(),
        });
    }
    let f: Vec<Option<T>> = macd_oscillator(prices, params)?
        .into_iter()
        .map(Some)
        .collect();
    Ok(crossings(&f, T::zero(), T::zero(), params.q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsiParams {
    pub period: usize,
    pub d_plus: f64,
    pub d_minus: f64,
}

impl Default for RsiParams {
    fn default() -> Self {
        RsiParams {
            period: 14,
            d_plus: 70.0,
            d_minus: 30.0,
        }
    }
}

impl RsiParams {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::invalid("rsi", "period must be >= 1"));
        }
        if !(0.0 <= self.d_minus && self.d_minus < self.d_plus && self.d_plus <= 100.0) {
            return Err(Error::invalid("rsi", "need 0 <= d_minus < d_plus <= 100"));
        }
        Ok(())
    }
}

/// Wilder RSI. Entries before index `period` are `None`; a window with
/// neither gains nor losses reads 50.
pub fn rsi<T: Real>(prices: &[T], period: usize) -> Result<Vec<Option<T>>> {
    if period == 0 {
        return Err(Error::invalid("period", "must be >= 1"));
    }
    let mut out = vec![None; prices.len()];
    if prices.len() <= period {
        return Ok(out);
    }
    let hundred = T::of(100.0);
    let per = T::from_usize(period).unwrap();
    let value = |gain: T, loss: T| {
        if loss == T::zero() {
            if gain == T::zero() {
                T::of(50.0)
            } else {
                hundred
            }
        } else {
            hundred - hundred / (T::one() + gain / loss)
        }
    };
    let change = |t: usize| prices[t] - prices[t - 1];
    let (mut gain, mut loss) = (T::zero(), T::zero());
    for t in 1..=period {
        let d = change(t);
        gain = gain + d.max(T::zero());
        loss = loss + (-d).max(T::zero());
    }
    gain = gain / per;
    loss = loss / per;
    out[period] = Some(value(gain, loss));
    for t in period + 1..prices.len() {
        let d = change(t);
        gain = (gain * (per - T::one()) + d.max(T::zero())) / per;
        loss = (loss * (per - T::one()) + (-d).max(T::zero())) / per;
        out[t] = Some(value(gain, loss));
    }
    Ok(out)
}

/// Buy on an upward crossing of `d_plus`, sell on a downward crossing of `d_minus`.
pub fn rsi_signal_series<T: Real>(prices: &[T], params: &RsiParams) -> Result<SignalSeries> {
    params.validate()?;
    if prices.len() <= params.period {
        return Err(Error::InsufficientData {
            needed: params.period + 1,
            got: prices.len(),
        });
    }
    let r = rsi(prices, params.period)?;
    Ok(crossings(
        &r,
        T::of(params.d_plus),
        T::of(params.d_minus),
        0,
    ))
}
