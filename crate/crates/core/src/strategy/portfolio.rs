//! Self-financing portfolio of cash plus `N` assets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::indicators::{
    macd_signal_series, rsi_signal_series, MacdParams, RsiParams, SignalSeries,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Passive,
    Macd,
    Rsi,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] =
        [StrategyKind::Passive, StrategyKind::Macd, StrategyKind::Rsi];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Passive => "passive",
            StrategyKind::Macd => "macd",
            StrategyKind::Rsi => "rsi",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "passive" => Ok(StrategyKind::Passive),
            "macd" => Ok(StrategyKind::Macd),
            "rsi" => Ok(StrategyKind::Rsi),
            other => Err(Error::invalid(
                "strategy",
                format!("unknown strategy `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub macd: MacdParams,
    pub rsi: RsiParams,
    /// Fraction of cash spent when buy signals fire.
    pub buy_fraction: f64,
    /// Fraction of an asset's holding sold on its sell signal.
    pub sell_fraction: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            kind: StrategyKind::Macd,
            macd: MacdParams::default(),
            rsi: RsiParams::default(),
            buy_fraction: 0.5,
            sell_fraction: 0.5,
        }
    }
}

impl StrategyConfig {
    pub fn of_kind(kind: StrategyKind) -> Self {
        StrategyConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.macd.validate()?;
        self.rsi.validate()?;
        if !(0.0..=1.0).contains(&self.buy_fraction) {
            return Err(Error::invalid("buy_fraction", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.sell_fraction) {
            return Err(Error::invalid("sell_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Signals per asset; all-quiet for the passive strategy.
    pub fn signals<T: Real>(&self, prices: &[Vec<T>]) -> Result<Vec<SignalSeries>> {
        prices
            .iter()
            .map(|p| match self.kind {
                StrategyKind::Passive => Ok(SignalSeries::quiet(p.len())),
                StrategyKind::Macd => macd_signal_series(p, &self.macd),
                StrategyKind::Rsi => rsi_signal_series(p, &self.rsi),
            })
            .collect()
    }
}

/// Cash `q0` (price 1) and asset quantities `q1..qN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Portfolio<T: Real> {
    pub cash: T,
    pub quantities: Vec<T>,
}

impl<T: Real> Portfolio<T> {
    /// Splits `wealth` into a cash part and equal-value positions at `prices`.
    pub fn split(wealth: T, cash_fraction: T, prices: &[T]) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::invalid("prices", "need at least one asset"));
        }
        if !(cash_fraction >= T::zero() && cash_fraction <= T::one()) {
            return Err(Error::invalid("cash_fraction", "must lie in [0, 1]"));
        }
        if let Some(p) = prices.iter().find(|&&p| !(p > T::zero())) {
            return Err(Error::Domain(format!("initial price {p} is not positive")));
        }
        let per_asset = wealth * (T::one() - cash_fraction) / T::from_usize(prices.len()).unwrap();
        Ok(Portfolio {
            cash: wealth * cash_fraction,
            quantities: prices.iter().map(|&p| per_asset / p).collect(),
        })
    }

    /// `W = q0 + sum_i q_i S_i`.
    pub fn wealth(&self, prices: &[T]) -> T {
        self.cash
            + self
                .quantities
                .iter()
                .zip(prices)
                .map(|(&q, &s)| q * s)
                .sum::<T>()
    }
}

/// Applies one step of the trading rule: sells first, then a fraction of the
/// resulting cash is split equally across the assets flagged for buying.
pub fn rebalance<T: Real>(
    portfolio: &Portfolio<T>,
    prices: &[T],
    buy: &[bool],
    sell: &[bool],
    buy_fraction: T,
    sell_fraction: T,
) -> Portfolio<T> {
    let mut cash = portfolio.cash;
    let mut quantities = portfolio.quantities.clone();
    for ((q, &s), &flag) in quantities.iter_mut().zip(prices).zip(sell) {
        if flag {
            let sold = *q * sell_fraction;
            cash = cash + s * sold;
            *q = *q - sold;
        }
    }
    let buyers = buy.iter().filter(|&&b| b).count();
    if buyers > 0 {
        let spend = buy_fraction * cash;
        let share = spend / T::from_usize(buyers).unwrap();
        for ((q, &s), &flag) in quantities.iter_mut().zip(prices).zip(buy) {
            if flag {
                *q = *q + share / s;
            }
        }
        cash = cash - spend;
    }
    Portfolio { cash, quantities }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BacktestStep<T: Real> {
    pub wealth: T,
    pub cash: T,
    pub quantities: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Backtest<T: Real> {
    pub kind: StrategyKind,
    pub history: Vec<BacktestStep<T>>,
    pub buy_signals: usize,
    pub sell_signals: usize,
}

impl<T: Real> Backtest<T> {
    pub fn initial_wealth(&self) -> T {
        self.history[0].wealth
    }

    pub fn terminal_wealth(&self) -> T {
        self.history.last().expect("non-empty history").wealth
    }

    /// Terminal over initial wealth, minus one.
    pub fn total_return(&self) -> T {
        self.terminal_wealth() / self.initial_wealth() - T::one()
    }

    pub fn final_portfolio(&self) -> Portfolio<T> {
        let last = self.history.last().expect("non-empty history");
        Portfolio {
            cash: last.cash,
            quantities: last.quantities.clone(),
        }
    }

    /// Writes `t,wealth,cash,q1..qN` with `t` given by `times`.
    pub fn write_csv<W: Write>(&self, times: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n_assets = self.history.first().map_or(0, |h| h.quantities.len());
        let mut header = vec!["t".to_string(), "wealth".into(), "cash".into()];
        header.extend((1..=n_assets).map(|i| format!("q{i}")));
        w.write_record(&header)?;
        for (t, step) in times.iter().zip(&self.history) {
            let mut row = vec![
                t.clone(),
                format!("{}", step.wealth.to_f64_lossy()),
                format!("{}", step.cash.to_f64_lossy()),
            ];
            row.extend(
                step.quantities
                    .iter()
                    .map(|q| format!("{}", q.to_f64_lossy())),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs a strategy over aligned price series (`prices[i][t]` for asset `i`).
pub fn backtest<T: Real>(
    prices: &[Vec<T>],
    config: &StrategyConfig,
    initial: &Portfolio<T>,
) -> Result<Backtest<T>> {
    config.validate()?;
    let signals = config.signals(prices)?;
    backtest_with_signals(prices, config, &signals, initial)
}

/// Backtest driven by precomputed signals.
pub fn backtest_with_signals<T: Real>(
    prices: &[Vec<T>],
    config: &StrategyConfig,
    signals: &[SignalSeries],
    initial: &Portfolio<T>,
) -> Result<Backtest<T>> {
    let n_assets = prices.len();
    if n_assets == 0 {
        return Err(Error::invalid("prices", "need at least one asset"));
    }
    if initial.quantities.len() != n_assets || signals.len() != n_assets {
        return Err(Error::Misaligned(format!(
            "{n_assets} price series, {} holdings, {} signal series",
            initial.quantities.len(),
            signals.len()
        )));
    }
    let len = prices[0].len();
    if len == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if let Some(i) = (0..n_assets).find(|&i| prices[i].len() != len || signals[i].len() != len) {
        return Err(Error::Misaligned(format!(
            "asset {i} has {} prices and {} signals, expected {len}",
            prices[i].len(),
            signals[i].len()
        )));
    }

    let buy_fraction = T::of(config.buy_fraction);
    let sell_fraction = T::of(config.sell_fraction);
    let active = config.kind != StrategyKind::Passive;
    let mut portfolio = initial.clone();
    let mut history = Vec::with_capacity(len);
    let mut at = vec![T::zero(); n_assets];
    let mut buy = vec![false; n_assets];
    let mut sell = vec![false; n_assets];
    for t in 0..len {
        for i in 0..n_assets {
            at[i] = prices[i][t];
            buy[i] = signals[i].buy[t];
            sell[i] = signals[i].sell[t];
        }
        if active && t > 0 {
            portfolio = rebalance(&portfolio, &at, &buy, &sell, buy_fraction, sell_fraction);
        }
        history.push(BacktestStep {
            wealth: portfolio.wealth(&at),
            cash: portfolio.cash,
            quantities: portfolio.quantities.clone(),
        });
    }
    let (buy_signals, sell_signals) = if active {
        (
            signals.iter().map(SignalSeries::buy_count).sum(),
            signals.iter().map(SignalSeries::sell_count).sum(),
        )
    } else {
        (0, 0)
    };
    Ok(Backtest {
        kind: config.kind,
        history,
        buy_signals,
        sell_signals,
    })
}
