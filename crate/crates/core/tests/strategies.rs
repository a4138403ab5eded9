mod common;

use bates::strategy::indicators::{macd_signal_series, rsi_signal_series};
use bates::strategy::{
    backtest, backtest_with_signals, ema, macd_oscillator, rebalance, rsi, MacdParams, Portfolio,
    RsiParams, SignalSeries, StrategyConfig, StrategyKind,
};
use common::{random_walk, rng, scan_crossings};
use proptest::prelude::*;

/// EMA written as a closed-form weighted sum instead of a recursion.
fn ema_oracle(xs: &[f64], lag: usize) -> Vec<f64> {
    let a = 2.0 / (lag as f64 + 1.0);
    (0..xs.len())
        .map(|t| {
            let mut acc = (1.0 - a).powi(t as i32) * xs[0];
            for j in 1..=t {
                acc += a * (1.0 - a).powi((t - j) as i32) * xs[j];
            }
            acc
        })
        .collect()
}

/// Wilder RSI from explicit gain and loss lists.
fn rsi_oracle(xs: &[f64], period: usize) -> Vec<Option<f64>> {
    let gains: Vec<f64> = xs.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let losses: Vec<f64> = xs.windows(2).map(|w| (w[0] - w[1]).max(0.0)).collect();
    let mut out = vec![None; xs.len()];
    if xs.len() <= period {
        return out;
    }
    let p = period as f64;
    let mut g: f64 = gains[..period].iter().sum::<f64>() / p;
    let mut l: f64 = losses[..period].iter().sum::<f64>() / p;
    for t in period..xs.len() {
        if t > period {
            g = (g * (p - 1.0) + gains[t - 1]) / p;
            l = (l * (p - 1.0) + losses[t - 1]) / p;
        }
        out[t] = Some(if g + l == 0.0 {
            50.0
        } else {
            100.0 * g / (g + l)
        });
    }
    out
}

#[test]
fn indicators_match_independent_formulas() {
    let mut r = rng(21);
    for _ in 0..20 {
        let xs = random_walk(120, &mut r);
        for lag in [1, 2, 9, 26] {
            let got = ema(&xs, lag).unwrap();
            for (a, b) in got.iter().zip(ema_oracle(&xs, lag)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let m = MacdParams::default();
        let macd: Vec<f64> = ema_oracle(&xs, m.p)
            .iter()
            .zip(ema_oracle(&xs, m.q))
            .map(|(a, b)| a - b)
            .collect();
        let f: Vec<f64> = ema_oracle(&macd, m.s)
            .iter()
            .zip(&macd)
            .map(|(s, m)| s - m)
            .collect();
        for (a, b) in macd_oscillator(&xs, &m).unwrap().iter().zip(&f) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in rsi(&xs, 14).unwrap().iter().zip(rsi_oracle(&xs, 14)) {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9),
                other => panic!("{other:?}"),
            }
        }
    }
}

#[test]
fn signals_equal_brute_force_scans_on_100_walks() {
    let mut r = rng(22);
    let m = MacdParams::default();
    let rp = RsiParams::default();
    for _ in 0..100 {
        let xs = random_walk(250, &mut r);
        let f: Vec<Option<f64>> = macd_oscillator(&xs, &m)
            .unwrap()
            .into_iter()
            .map(Some)
            .collect();
        let (buy, sell) = scan_crossings(&f, 0.0, 0.0, m.q);
        let s = macd_signal_series(&xs, &m).unwrap();
        assert_eq!(s.buy, buy);
        assert_eq!(s.sell, sell);
        assert!(s.buy.iter().zip(&s.sell).all(|(b, s)| !(*b && *s)));

        let series = rsi(&xs, rp.period).unwrap();
        let (buy, sell) = scan_crossings(&series, rp.d_plus, rp.d_minus, 0);
        let s = rsi_signal_series(&xs, &rp).unwrap();
        assert_eq!(s.buy, buy);
        assert_eq!(s.sell, sell);
    }
}

#[test]
fn macd_on_slow_wave_alternates() {
    let xs: Vec<f64> = (0..600)
        .map(|t| 100.0 + 10.0 * (t as f64 * std::f64::consts::TAU / 200.0).sin())
        .collect();
    let s = macd_signal_series(&xs, &MacdParams::default()).unwrap();
    let events: Vec<bool> = (0..xs.len())
        .filter_map(|t| {
            if s.buy[t] {
                Some(true)
            } else if s.sell[t] {
                Some(false)
            } else {
                None
            }
        })
        .collect();
    assert!(events.len() >= 4);
    assert!(events.windows(2).all(|w| w[0] != w[1]), "{events:?}");
}

#[test]
fn rsi_on_monotone_prices() {
    let up: Vec<f64> = (0..40).map(|t| 10.0 + t as f64).collect();
    let r = rsi(&up, 14).unwrap();
    assert!(r[14..].iter().all(|v| *v == Some(100.0)));
    assert!(
        rsi_signal_series(&up, &RsiParams::default())
            .unwrap()
            .buy_count()
            <= 1
    );
    let down: Vec<f64> = up.iter().rev().copied().collect();
    assert!(rsi(&down, 14).unwrap()[14..]
        .iter()
        .all(|v| *v == Some(0.0)));
    let flat = vec![5.0; 30];
    let s = macd_signal_series(&flat, &MacdParams::default()).unwrap();
    assert_eq!((s.buy_count(), s.sell_count()), (0, 0));
}

#[test]
fn every_rebalance_is_self_financing() {
    let mut r = rng(23);
    for kind in [StrategyKind::Macd, StrategyKind::Rsi] {
        for _ in 0..20 {
            let prices: Vec<Vec<f64>> = (0..4).map(|_| random_walk(300, &mut r)).collect();
            let firsts: Vec<f64> = prices.iter().map(|p| p[0]).collect();
            let initial = Portfolio::split(1000.0, 0.5, &firsts).unwrap();
            let bt = backtest(&prices, &StrategyConfig::of_kind(kind), &initial).unwrap();
            for t in 1..bt.history.len() {
                let prev = &bt.history[t - 1];
                let before: f64 = prev.cash
                    + prev
                        .quantities
                        .iter()
                        .enumerate()
                        .map(|(i, q)| q * prices[i][t])
                        .sum::<f64>();
                let after = bt.history[t].wealth;
                assert!((after - before).abs() <= 1e-10 * before, "t = {t}");
                assert!(bt.history[t].cash >= 0.0);
                assert!(bt.history[t].quantities.iter().all(|&q| q >= 0.0));
            }
        }
    }
}

#[test]
fn passive_terminal_wealth_is_exact() {
    let mut r = rng(24);
    let prices: Vec<Vec<f64>> = (0..5).map(|_| random_walk(200, &mut r)).collect();
    let firsts: Vec<f64> = prices.iter().map(|p| p[0]).collect();
    let initial = Portfolio::split(1.0, 0.5, &firsts).unwrap();
    let bt = backtest(
        &prices,
        &StrategyConfig::of_kind(StrategyKind::Passive),
        &initial,
    )
    .unwrap();
    let mut expect = initial.cash;
    let mut assets = 0.0;
    for (q, p) in initial.quantities.iter().zip(&prices) {
        assets += q * p[199];
    }
    expect += assets;
    assert_eq!(bt.terminal_wealth(), expect);
    assert!(bt
        .history
        .iter()
        .all(|h| h.quantities == initial.quantities));

    let single = Portfolio::split(1.0, 0.0, &firsts[..1]).unwrap();
    let bt = backtest(
        &prices[..1],
        &StrategyConfig::of_kind(StrategyKind::Passive),
        &single,
    )
    .unwrap();
    assert!((bt.terminal_wealth() - prices[0][199] / prices[0][0]).abs() < 1e-15);
}

#[test]
fn quiet_signals_reduce_to_passive() {
    let mut r = rng(25);
    let prices: Vec<Vec<f64>> = (0..3).map(|_| random_walk(100, &mut r)).collect();
    let firsts: Vec<f64> = prices.iter().map(|p| p[0]).collect();
    let initial = Portfolio::split(10.0, 0.3, &firsts).unwrap();
    let quiet = vec![SignalSeries::quiet(100); 3];
    let active = backtest_with_signals(
        &prices,
        &StrategyConfig::of_kind(StrategyKind::Macd),
        &quiet,
        &initial,
    )
    .unwrap();
    let passive = backtest(
        &prices,
        &StrategyConfig::of_kind(StrategyKind::Passive),
        &initial,
    )
    .unwrap();
    assert_eq!(active.history, passive.history);
}

#[test]
fn rebalance_examples() {
    let p = Portfolio {
        cash: 0.0,
        quantities: vec![10.0],
    };
    let q = rebalance(&p, &[5.0], &[false], &[true], 0.5, 1.0);
    assert_eq!(q.quantities, vec![0.0]);
    assert_eq!(q.cash, 50.0);
    assert_eq!(rebalance(&p, &[5.0], &[false], &[false], 0.5, 0.5), p);
}

#[test]
fn misaligned_inputs_are_rejected() {
    let initial = Portfolio::split(1.0, 0.5, &[1.0, 1.0]).unwrap();
    let prices = vec![vec![1.0; 40], vec![1.0; 39]];
    assert!(backtest(
        &prices,
        &StrategyConfig::of_kind(StrategyKind::Passive),
        &initial
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wealth_is_scale_covariant(seed in any::<u64>(), c in 0.01f64..100.0, kind in 0usize..3) {
        let mut r = rng(seed);
        let prices: Vec<Vec<f64>> = (0..2).map(|_| random_walk(120, &mut r)).collect();
        let scaled: Vec<Vec<f64>> = prices.iter().map(|p| p.iter().map(|x| x * c).collect()).collect();
        let cfg = StrategyConfig::of_kind(StrategyKind::ALL[kind]);
        let firsts: Vec<f64> = prices.iter().map(|p| p[0]).collect();
        let a = backtest(&prices, &cfg, &Portfolio::split(1.0, 0.5, &firsts).unwrap()).unwrap();
        let firsts: Vec<f64> = scaled.iter().map(|p| p[0]).collect();
        let b = backtest(&scaled, &cfg, &Portfolio::split(c, 0.5, &firsts).unwrap()).unwrap();
        prop_assert_eq!(a.buy_signals, b.buy_signals);
        prop_assert_eq!(a.sell_signals, b.sell_signals);
        for (x, y) in a.history.iter().zip(&b.history) {
            prop_assert!((y.wealth - c * x.wealth).abs() <= 1e-9 * c * x.wealth);
        }
    }
}
