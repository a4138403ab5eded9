use bates::experiments::{aspi, gop, ExperimentGrid};
use bates::model::TimeGrid;
use bates::strategy::{RsiParams, StrategyConfig, StrategyKind};
use proptest::prelude::*;

fn small() -> ExperimentGrid<f64> {
    ExperimentGrid {
        mu_values: vec![0.1, 0.9],
        lambda_values: vec![0.0, 2.0],
        reps: 12,
        assets: 2,
        grid: TimeGrid::new(150, 1.0 / 252.0).unwrap(),
        seed: 17,
        ..ExperimentGrid::default()
    }
}

#[test]
fn grid_is_independent_of_thread_count() {
    let g = small();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| g.run_grid().unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn cells_do_not_depend_on_evaluation_order() {
    let g = small();
    let full = g.run_grid().unwrap();
    let mut order = vec![(1, 1), (0, 0), (1, 0), (0, 1)];
    order.reverse();
    for (i, j) in order {
        let cell = g.run_cell(&g.intensity_cell(i, j)).unwrap();
        assert_eq!(&cell, full.cell(i, j));
    }
}

#[test]
fn strategies_share_each_replication_path() {
    let g = small();
    let macd_only = ExperimentGrid {
        active: vec![StrategyConfig::of_kind(StrategyKind::Macd)],
        ..small()
    };
    let spec = g.intensity_cell(1, 1);
    for rep in 0..g.reps {
        let a = g.run_rep(&spec, rep).unwrap();
        let b = macd_only
            .run_rep(&macd_only.intensity_cell(1, 1), rep)
            .unwrap();
        assert_eq!(a.path_digest, b.path_digest);
        assert_eq!(a.terminal_wealth[..2], b.terminal_wealth[..]);
        assert_eq!(a.aspi, aspi(a.terminal_wealth[1], a.terminal_wealth[0]));
    }
    // Different cells and replications draw different paths.
    let x = g.run_rep(&g.intensity_cell(0, 0), 0).unwrap().path_digest;
    let y = g.run_rep(&g.intensity_cell(1, 0), 0).unwrap().path_digest;
    let z = g.run_rep(&g.intensity_cell(0, 0), 1).unwrap().path_digest;
    assert!(x != y && x != z);
}

#[test]
fn never_firing_strategy_has_zero_aspi() {
    let mut silent = StrategyConfig::of_kind(StrategyKind::Rsi);
    silent.rsi = RsiParams {
        d_plus: 100.0,
        d_minus: 0.0,
        ..RsiParams::default()
    };
    let g = ExperimentGrid {
        active: vec![silent],
        ..small()
    };
    let cell = g.run_cell(&g.intensity_cell(1, 0)).unwrap();
    assert_eq!(cell.mean_aspi, 0.0);
    assert_eq!(cell.gop_active, cell.gop_passive);
}

#[test]
fn passive_single_asset_gop_is_log_return_rate() {
    let g = ExperimentGrid {
        assets: 1,
        cash_fraction: 0.0,
        ..small()
    };
    let spec = g.intensity_cell(0, 1);
    let t = g.grid.t_end();
    for rep in 0..4 {
        let o = g.run_rep(&spec, rep).unwrap();
        let w = o.terminal_wealth[0];
        assert!((o.gop[0] - w.ln() / t).abs() < 1e-12);
    }
}

#[test]
fn jump_size_panels_use_negative_means() {
    let g = ExperimentGrid {
        mu_j_values: Some(vec![0.2, 0.6]),
        reps: 3,
        ..small()
    };
    let spec = g.jump_size_cell(0, 1).unwrap();
    assert_eq!(spec.mu_j, -0.6);
    assert_eq!(spec.lambda, g.mu_j_panel_lambda);
    let r = g.run_grid().unwrap();
    assert_eq!(r.jump_size_cells.len(), 4);
    assert_eq!(r.jump_size_curves().len(), 2);
    assert_eq!(r.intensity_curves().len(), 2);
    assert!(small().jump_size_cell(0, 0).is_none());
}

#[test]
fn heatmap_csv_has_one_row_per_cell() {
    let r = small().run_grid().unwrap();
    let mut buf = Vec::new();
    r.write_heatmap_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "mu,lambda,mean_aspi,gop_active,gop_passive,reps");
    assert_eq!(lines.len(), 5);
    for cell in &r.cells {
        assert!((0.0..=1.0).contains(&cell.mean_aspi));
        let scaled = cell.mean_aspi * cell.reps as f64;
        assert!((scaled - scaled.round()).abs() < 1e-9);
    }
}

#[test]
fn invalid_grids_are_rejected() {
    for g in [
        ExperimentGrid { reps: 0, ..small() },
        ExperimentGrid {
            assets: 0,
            ..small()
        },
        ExperimentGrid {
            active: vec![],
            ..small()
        },
        ExperimentGrid {
            mu_values: vec![],
            ..small()
        },
    ] {
        assert!(g.run_grid().is_err());
    }
}

#[test]
fn aspi_is_strict() {
    assert_eq!(aspi(1.0, 1.0), 0);
    assert_eq!(aspi(1.0 + 1e-12, 1.0), 1);
    assert!(gop(1.0, 0.0, 1.0).is_err());
    assert!(gop(1.0, 2.0, 0.0).is_err());
}

proptest! {
    #[test]
    fn gop_is_additive_over_subperiods(
        w0 in 0.01f64..100.0,
        g1 in -2.0f64..2.0,
        g2 in -2.0f64..2.0,
        t1 in 0.05f64..5.0,
        t2 in 0.05f64..5.0,
    ) {
        let w1 = w0 * (g1 * t1).exp();
        let w2 = w1 * (g2 * t2).exp();
        let whole = gop(w0, w2, t1 + t2).unwrap();
        let parts = (t1 * gop(w0, w1, t1).unwrap() + t2 * gop(w1, w2, t2).unwrap()) / (t1 + t2);
        prop_assert!((whole - parts).abs() < 1e-9);
        prop_assert!((gop(w0, w1, t1).unwrap() - g1).abs() < 1e-9);
    }
}
