//! Technical indicators and the portfolio backtester.

pub mod indicators;
pub mod portfolio;

pub use indicators::{ema, macd_oscillator, rsi, MacdParams, RsiParams, SignalSeries};
pub use portfolio::{
    backtest, backtest_with_signals, rebalance, Backtest, BacktestStep, Portfolio, StrategyConfig,
    StrategyKind,
};
