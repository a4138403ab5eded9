//! Monte Carlo comparison of passive and active strategies over a grid of
//! drift, jump intensity and jump size values.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{simulate, JumpParams, ModelParams, TimeGrid};
use crate::rng::derive_seed;
use crate::scalar::Real;
use crate::strategy::{backtest, Portfolio, StrategyConfig, StrategyKind};

/// Annualised log growth `(1/t) ln(W(t) / W(0))`.
pub fn gop<T: Real>(wealth_initial: T, wealth_t: T, t: T) -> Result<T> {
    if !(wealth_initial > T::zero()) || !(wealth_t > T::zero()) {
        return Err(Error::Domain(format!(
            "wealth must be positive, got {wealth_initial} and {wealth_t}"
        )));
    }
    if !(t > T::zero()) {
        return Err(Error::Domain(format!("horizon {t} must be positive")));
    }
    Ok((wealth_t / wealth_initial).ln() / t)
}

/// 1 iff the active portfolio ends strictly richer than the passive one.
pub fn aspi<T: Real>(wealth_active: T, wealth_passive: T) -> u8 {
    u8::from(wealth_active - wealth_passive > T::zero())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct ExperimentGrid<T: Real> {
    pub mu_values: Vec<T>,
    pub lambda_values: Vec<T>,
    /// Downward jump magnitudes for the jump-size panels; the mean log jump
    /// is `-mu_j`.
    pub mu_j_values: Option<Vec<T>>,
    /// Jump intensity used by the jump-size panels.
    pub mu_j_panel_lambda: T,
    pub reps: usize,
    /// Independent asset paths per simulated portfolio.
    pub assets: usize,
    pub initial_wealth: T,
    pub cash_fraction: T,
    /// `mu` is replaced per cell; the rest is shared.
    pub base_params: ModelParams<T>,
    /// `lambda` (and `mu_j` on the jump-size panels) is replaced per cell.
    pub base_jumps: JumpParams<T>,
    /// Active strategies; the first one defines ASPI.
    pub active: Vec<StrategyConfig>,
    pub grid: TimeGrid<T>,
    pub seed: u64,
}

impl<T: Real> Default for ExperimentGrid<T> {
    fn default() -> Self {
        let v = |xs: &[f64]| xs.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
        ExperimentGrid {
            mu_values: v(&[0.1, 0.3, 0.5, 0.7, 0.9]),
            lambda_values: v(&[0.0, 1.0, 2.0]),
            mu_j_values: None,
            mu_j_panel_lambda: T::one(),
            reps: 200,
            assets: 5,
            initial_wealth: T::of(1.0),
            cash_fraction: T::of(0.5),
            base_params: ModelParams {
                mu: T::of(0.44),
                kappa: T::of(1.17),
                theta: T::of(0.06),
                sigma: T::of(0.006),
                rho: T::of(-0.41),
                s0: T::of(100.0),
                v0: T::of(0.06),
            },
            base_jumps: JumpParams {
                lambda: T::zero(),
                mu_j: T::of(-0.05),
                sigma_j: T::of(0.001),
            },
            active: vec![
                StrategyConfig::of_kind(StrategyKind::Macd),
                StrategyConfig::of_kind(StrategyKind::Rsi),
            ],
            grid: TimeGrid {
                n: 1134,
                dt: T::of(1.0 / 252.0),
            },
            seed: 0,
        }
    }
}

/// Which family of cells a seed belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Panel {
    Intensity = 0,
    JumpSize = 1,
}

/// Coordinates of one cell and the model it simulates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSpec<T: Real> {
    pub mu: T,
    pub lambda: T,
    /// Mean log jump size used in the cell.
    pub mu_j: T,
    panel: Panel,
    row: usize,
    col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StrategyGop<T: Real> {
    pub strategy: StrategyKind,
    pub mean_gop: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AspiCell<T: Real> {
    pub mu: T,
    pub lambda: T,
    pub mu_j: T,
    pub mean_aspi: T,
    /// Mean GoP of the ASPI-defining active strategy.
    pub gop_active: T,
    pub gop_passive: T,
    /// Mean GoP for passive followed by every active strategy.
    pub gop: Vec<StrategyGop<T>>,
    pub reps: usize,
}

/// Outcome of a single replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome<T> {
    pub aspi: u8,
    /// GoP for passive followed by every active strategy.
    pub gop: Vec<T>,
    /// Terminal wealth, same order as `gop`.
    pub terminal_wealth: Vec<T>,
    /// Hash of the simulated prices consumed by every strategy.
    pub path_digest: u64,
}

fn digest<T: Real>(paths: &[Vec<T>]) -> u64 {
    let mut h = DefaultHasher::new();
    for p in paths {
        for x in p {
            x.to_f64_lossy().to_bits().hash(&mut h);
        }
    }
    h.finish()
}

impl<T: Real> ExperimentGrid<T> {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid("reps", "must be >= 1"));
        }
        if self.assets == 0 {
            return Err(Error::invalid("assets", "must be >= 1"));
        }
        if self.mu_values.is_empty() || self.lambda_values.is_empty() {
            return Err(Error::invalid(
                "grid",
                "mu and lambda values must be non-empty",
            ));
        }
        if matches!(&self.mu_j_values, Some(v) if v.is_empty()) {
            return Err(Error::invalid(
                "mu_j_values",
                "must be non-empty when given",
            ));
        }
        if self.active.is_empty() {
            return Err(Error::invalid(
                "active",
                "need at least one active strategy",
            ));
        }
        for cfg in &self.active {
            cfg.validate()?;
        }
        self.grid.validate()?;
        self.base_params.validate()
    }

    /// Strategies evaluated in every replication: passive, then the actives.
    pub fn strategies(&self) -> Vec<StrategyConfig> {
        let mut all = vec![StrategyConfig::of_kind(StrategyKind::Passive)];
        all.extend(self.active.iter().copied());
        all
    }

    /// Cell of the intensity heat map at `(mu_values[i], lambda_values[j])`.
    pub fn intensity_cell(&self, mu_index: usize, lambda_index: usize) -> CellSpec<T> {
        CellSpec {
            mu: self.mu_values[mu_index],
            lambda: self.lambda_values[lambda_index],
            mu_j: self.base_jumps.mu_j,
            panel: Panel::Intensity,
            row: lambda_index,
            col: mu_index,
        }
    }

    /// Cell of the jump-size panels at `(mu_values[i], mu_j_values[j])`.
    pub fn jump_size_cell(&self, mu_index: usize, mu_j_index: usize) -> Option<CellSpec<T>> {
        let sizes = self.mu_j_values.as_ref()?;
        Some(CellSpec {
            mu: self.mu_values[mu_index],
            lambda: self.mu_j_panel_lambda,
            mu_j: -sizes[mu_j_index],
            panel: Panel::JumpSize,
            row: mu_j_index,
            col: mu_index,
        })
    }

    fn rep_seed(&self, cell: &CellSpec<T>, rep: usize, asset: usize) -> u64 {
        derive_seed(
            self.seed,
            &[
                cell.panel as u64,
                cell.col as u64,
                cell.row as u64,
                rep as u64,
                asset as u64,
            ],
        )
    }

    /// Simulates one portfolio of assets and runs every strategy on it.
    pub fn run_rep(&self, cell: &CellSpec<T>, rep: usize) -> Result<RepOutcome<T>> {
        let params = ModelParams {
            mu: cell.mu,
            ..self.base_params
        };
        let jumps = JumpParams {
            lambda: cell.lambda,
            mu_j: cell.mu_j,
            ..self.base_jumps
        };
        let paths = (0..self.assets)
            .map(|a| {
                simulate(
                    &params,
                    Some(&jumps),
                    &self.grid,
                    self.rep_seed(cell, rep, a),
                )
                .map(|p| p.prices)
            })
            .collect::<Result<Vec<_>>>()?;
        let initial_prices: Vec<T> = paths.iter().map(|p| p[0]).collect();
        let initial = Portfolio::split(self.initial_wealth, self.cash_fraction, &initial_prices)?;
        let horizon = self.grid.t_end();

        let mut gops = Vec::new();
        let mut terminal = Vec::new();
        for cfg in self.strategies() {
            let bt = backtest(&paths, &cfg, &initial)?;
            gops.push(gop(bt.initial_wealth(), bt.terminal_wealth(), horizon)?);
            terminal.push(bt.terminal_wealth());
        }
        Ok(RepOutcome {
            aspi: aspi(terminal[1], terminal[0]),
            gop: gops,
            terminal_wealth: terminal,
            path_digest: digest(&paths),
        })
    }

    pub fn run_cell(&self, cell: &CellSpec<T>) -> Result<AspiCell<T>> {
        self.validate()?;
        let outcomes = (0..self.reps)
            .into_par_iter()
            .map(|rep| self.run_rep(cell, rep).map_err(|e| e.at_rep(rep)))
            .collect::<Result<Vec<_>>>()?;
        let reps = T::from_usize(self.reps).unwrap();
        let aspi_count = outcomes.iter().filter(|o| o.aspi == 1).count();
        let gop: Vec<StrategyGop<T>> = self
            .strategies()
            .iter()
            .enumerate()
            .map(|(s, cfg)| StrategyGop {
                strategy: cfg.kind,
                mean_gop: outcomes.iter().map(|o| o.gop[s]).sum::<T>() / reps,
            })
            .collect();
        Ok(AspiCell {
            mu: cell.mu,
            lambda: cell.lambda,
            mu_j: cell.mu_j,
            mean_aspi: T::from_usize(aspi_count).unwrap() / reps,
            gop_active: gop[1].mean_gop,
            gop_passive: gop[0].mean_gop,
            gop,
            reps: self.reps,
        })
    }

    pub fn run_grid(&self) -> Result<GridResult<T>> {
        self.validate()?;
        let mut specs = Vec::new();
        for j in 0..self.lambda_values.len() {
            for i in 0..self.mu_values.len() {
                specs.push(self.intensity_cell(i, j));
            }
        }
        let n_intensity = specs.len();
        if let Some(sizes) = &self.mu_j_values {
            for j in 0..sizes.len() {
                for i in 0..self.mu_values.len() {
                    specs.extend(self.jump_size_cell(i, j));
                }
            }
        }
        let mut cells = specs
            .par_iter()
            .map(|spec| self.run_cell(spec))
            .collect::<Result<Vec<_>>>()?;
        let jump_size_cells = cells.split_off(n_intensity);
        Ok(GridResult {
            mu_values: self.mu_values.clone(),
            lambda_values: self.lambda_values.clone(),
            mu_j_values: self.mu_j_values.clone(),
            cells,
            jump_size_cells,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridResult<T: Real> {
    pub mu_values: Vec<T>,
    pub lambda_values: Vec<T>,
    pub mu_j_values: Option<Vec<T>>,
    /// Intensity cells, lambda-major: index `j * mu_values.len() + i`.
    pub cells: Vec<AspiCell<T>>,
    /// Jump-size cells, mu_j-major.
    pub jump_size_cells: Vec<AspiCell<T>>,
}

/// One curve point: mean GoP of `strategy` at drift `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CurvePoint<T: Real> {
    pub mu: T,
    pub strategy: StrategyKind,
    pub mean_gop: T,
}

fn curves<T: Real>(
    cells: &[AspiCell<T>],
    panels: &[T],
    width: usize,
) -> Vec<(T, Vec<CurvePoint<T>>)> {
    panels
        .iter()
        .enumerate()
        .map(|(j, &panel)| {
            let points = cells[j * width..(j + 1) * width]
                .iter()
                .flat_map(|c| {
                    c.gop.iter().map(move |g| CurvePoint {
                        mu: c.mu,
                        strategy: g.strategy,
                        mean_gop: g.mean_gop,
                    })
                })
                .collect();
            (panel, points)
        })
        .collect()
}

impl<T: Real> GridResult<T> {
    pub fn cell(&self, mu_index: usize, lambda_index: usize) -> &AspiCell<T> {
        &self.cells[lambda_index * self.mu_values.len() + mu_index]
    }

    /// GoP versus `mu`, one panel per jump intensity.
    pub fn intensity_curves(&self) -> Vec<(T, Vec<CurvePoint<T>>)> {
        curves(&self.cells, &self.lambda_values, self.mu_values.len())
    }

    /// GoP versus `mu`, one panel per jump magnitude.
    pub fn jump_size_curves(&self) -> Vec<(T, Vec<CurvePoint<T>>)> {
        match &self.mu_j_values {
            Some(sizes) => curves(&self.jump_size_cells, sizes, self.mu_values.len()),
            None => Vec::new(),
        }
    }

    /// `mu,lambda,mean_aspi,gop_active,gop_passive,reps`.
    pub fn write_heatmap_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "mu",
            "lambda",
            "mean_aspi",
            "gop_active",
            "gop_passive",
            "reps",
        ])?;
        for c in &self.cells {
            w.write_record([
                format!("{}", c.mu.to_f64_lossy()),
                format!("{}", c.lambda.to_f64_lossy()),
                format!("{}", c.mean_aspi.to_f64_lossy()),
                format!("{}", c.gop_active.to_f64_lossy()),
                format!("{}", c.gop_passive.to_f64_lossy()),
                c.reps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `mu,strategy,mean_gop` for one panel.
pub fn write_curve_csv<T: Real, W: Write>(points: &[CurvePoint<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mu", "strategy", "mean_gop"])?;
    for p in points {
        w.write_record([
            format!("{}", p.mu.to_f64_lossy()),
            p.strategy.name().to_string(),
            format!("{}", p.mean_gop.to_f64_lossy()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
