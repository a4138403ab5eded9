//! Command-line front end.
//!
//! Every subcommand resolves its effective configuration as flags over an
//! optional `--config` JSON file over built-in defaults, runs, and writes a
//! `manifest.json` next to its outputs. A manifest can be passed back through
//! `--config` to reproduce the run. `--out` and `--threads` are not part of
//! the echoed configuration because they do not affect results.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::{run_gibbs, GibbsConfig, Priors};
use crate::error::{Error, Result};
use crate::experiments::{gop, write_curve_csv, ExperimentGrid};
use crate::market::MarketSeries;
use crate::model::{simulate, JumpParams, ModelParams, TimeGrid};
use crate::rng::derive_seed;
use crate::strategy::{backtest, MacdParams, Portfolio, RsiParams, StrategyConfig, StrategyKind};

#[derive(Debug, Parser)]
#[command(
    name = "bates",
    version,
    about = "Bates model simulation, calibration and strategy experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate price and variance paths.
    Simulate(SimulateArgs),
    /// Estimate model parameters from a price series.
    Calibrate(CalibrateArgs),
    /// Run passive, MACD and RSI strategies on price series.
    Backtest(BacktestArgs),
    /// Mean ASPI heat map over (mu, lambda).
    AspiGrid(GridArgs),
    /// Mean GoP versus mu, per jump intensity and per jump size.
    GopCurves(GridArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config file or a manifest written by a previous run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true, required_unless_present = "config")]
    pub mu: Option<f64>,
    #[arg(long, required_unless_present = "config")]
    pub kappa: Option<f64>,
    #[arg(long, required_unless_present = "config")]
    pub theta: Option<f64>,
    #[arg(long, required_unless_present = "config")]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true, required_unless_present = "config")]
    pub rho: Option<f64>,
    /// Number of steps.
    #[arg(long, required_unless_present = "config")]
    pub n: Option<usize>,
    /// Step size in years.
    #[arg(long, required_unless_present = "config")]
    pub dt: Option<f64>,
    #[arg(long)]
    pub s0: Option<f64>,
    /// Initial variance; defaults to theta.
    #[arg(long)]
    pub v0: Option<f64>,
    /// Jump intensity per year; 0 disables jumps.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Mean log jump size.
    #[arg(long, allow_hyphen_values = true)]
    pub mu_j: Option<f64>,
    #[arg(long)]
    pub sigma_j: Option<f64>,
    /// Number of independent paths. Path 0 uses the seed itself.
    #[arg(long)]
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub mu: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub s0: f64,
    pub v0: Option<f64>,
    pub lambda: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
    pub n: usize,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            mu: 0.44,
            kappa: 1.17,
            theta: 0.06,
            sigma: 0.006,
            rho: -0.41,
            s0: 100.0,
            v0: None,
            lambda: 0.0,
            mu_j: -0.05,
            sigma_j: 0.001,
            n: 1134,
            dt: 1.0 / 252.0,
            paths: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Price CSV: `date,close` market data or a `simulate` path file.
    #[arg(long, required_unless_present = "config")]
    pub input: Option<PathBuf>,
    /// Prior hyperparameters JSON; defaults to the built-in table.
    #[arg(long)]
    pub priors: Option<PathBuf>,
    /// Step size in years; defaults to 1/252 or the path file's spacing.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Estimate the model without jumps.
    #[arg(long)]
    pub no_jumps: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub input: Option<PathBuf>,
    pub priors: Option<PathBuf>,
    pub dt: Option<f64>,
    pub gibbs: GibbsConfig,
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub common: Common,
    /// Price CSV, one single-asset portfolio per file. Repeatable.
    #[arg(long = "input", required_unless_present = "config")]
    pub inputs: Vec<PathBuf>,
    /// Strategies to run; defaults to all. Repeatable.
    #[arg(long = "strategy")]
    pub strategies: Vec<StrategyKind>,
    #[arg(long)]
    pub macd_p: Option<usize>,
    #[arg(long)]
    pub macd_q: Option<usize>,
    #[arg(long)]
    pub macd_s: Option<usize>,
    #[arg(long)]
    pub rsi_period: Option<usize>,
    #[arg(long)]
    pub rsi_upper: Option<f64>,
    #[arg(long)]
    pub rsi_lower: Option<f64>,
    #[arg(long)]
    pub buy_fraction: Option<f64>,
    #[arg(long)]
    pub sell_fraction: Option<f64>,
    /// Share of initial wealth held as cash.
    #[arg(long)]
    pub cash_fraction: Option<f64>,
    #[arg(long)]
    pub initial_wealth: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub inputs: Vec<PathBuf>,
    pub strategies: Vec<StrategyKind>,
    pub macd: MacdParams,
    pub rsi: RsiParams,
    pub buy_fraction: f64,
    pub sell_fraction: f64,
    pub cash_fraction: f64,
    pub initial_wealth: f64,
    pub dt: Option<f64>,
    pub seed: u64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        let s = StrategyConfig::default();
        BacktestConfig {
            inputs: Vec::new(),
            strategies: StrategyKind::ALL.to_vec(),
            macd: s.macd,
            rsi: s.rsi,
            buy_fraction: s.buy_fraction,
            sell_fraction: s.sell_fraction,
            cash_fraction: 0.5,
            initial_wealth: 1.0,
            dt: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu_values: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambda_values: Vec<f64>,
    /// Downward jump magnitudes for the jump-size panels (gop-curves only).
    #[arg(long, value_delimiter = ',')]
    pub mu_j_values: Vec<f64>,
    /// Jump intensity used on the jump-size panels.
    #[arg(long)]
    pub mu_j_lambda: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub assets: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub cash_fraction: Option<f64>,
    /// Active strategies; the first defines ASPI. Repeatable.
    #[arg(long = "active")]
    pub active: Vec<StrategyKind>,
}

/// Everything needed to re-run a subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub command: String,
    pub version: String,
    pub config: C,
    pub outputs: Vec<String>,
}

/// Reads a config file, unwrapping a manifest if that is what was given.
fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>, command: &str) -> Result<C> {
    let Some(path) = path else {
        return Ok(C::default());
    };
    let text = fs::read_to_string(path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(obj) = value.as_object_mut() {
        if obj.contains_key("command") && obj.contains_key("config") {
            let found = obj["command"].as_str().unwrap_or_default().to_string();
            if found != command {
                return Err(Error::Domain(format!(
                    "{} is a manifest for `{found}`, not `{command}`",
                    path.display()
                )));
            }
            value = obj.remove("config").unwrap();
        }
    }
    Ok(serde_json::from_value(value)?)
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Output directory that removes what it wrote if the run fails.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        names.push("manifest.json".into());
        names.sort();
        names.dedup();
        names
    }

    fn finish<C: Serialize>(&mut self, command: &str, config: &C) -> Result<()> {
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            outputs: self.names(),
        };
        self.write_json("manifest.json", &manifest)
    }

    fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// A price series from either a market CSV or a simulated path CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceInput {
    pub symbol: String,
    /// Row labels: dates or times.
    pub labels: Vec<String>,
    pub prices: Vec<f64>,
    pub dt: f64,
}

/// Loads `path`, recognising `simulate` output by its `t,price` header.
pub fn load_prices(path: &Path) -> Result<PriceInput> {
    let symbol = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    let text = fs::read_to_string(path)?;
    if text.starts_with("t,price") {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut labels = Vec::new();
        let mut prices = Vec::new();
        let mut times = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let parse = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!("bad numeric field {}", i + 1),
                    })
            };
            let (t, p) = (parse(0)?, parse(1)?);
            if !(p > 0.0) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("price must be positive, got {p}"),
                });
            }
            labels.push(record[0].to_string());
            times.push(t);
            prices.push(p);
        }
        if prices.is_empty() {
            return Err(Error::EmptyFile {
                path: path.to_path_buf(),
            });
        }
        let dt = if times.len() >= 2 {
            (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
        } else {
            1.0 / crate::market::TRADING_DAYS
        };
        return Ok(PriceInput {
            symbol,
            labels,
            prices,
            dt,
        });
    }
    let series = MarketSeries::<f64>::parse(&text, &symbol, path)?;
    Ok(PriceInput {
        symbol,
        labels: series
            .dates
            .iter()
            .map(|d| d.format("%Y-%m-%d").to_string())
            .collect(),
        prices: series.closes,
        dt: series.dt,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg: SimulateConfig = load_config(args.common.config.as_deref(), "simulate")?;
    set(&mut cfg.mu, args.mu);
    set(&mut cfg.kappa, args.kappa);
    set(&mut cfg.theta, args.theta);
    set(&mut cfg.sigma, args.sigma);
    set(&mut cfg.rho, args.rho);
    set(&mut cfg.n, args.n);
    set(&mut cfg.dt, args.dt);
    set(&mut cfg.s0, args.s0);
    if args.v0.is_some() {
        cfg.v0 = args.v0;
    }
    set(&mut cfg.lambda, args.lambda);
    set(&mut cfg.mu_j, args.mu_j);
    set(&mut cfg.sigma_j, args.sigma_j);
    set(&mut cfg.paths, args.paths);
    set(&mut cfg.seed, args.common.seed);

    let params = ModelParams {
        mu: cfg.mu,
        kappa: cfg.kappa,
        theta: cfg.theta,
        sigma: cfg.sigma,
        rho: cfg.rho,
        s0: cfg.s0,
        v0: cfg.v0.unwrap_or(cfg.theta),
    };
    let jumps = JumpParams {
        lambda: cfg.lambda,
        mu_j: cfg.mu_j,
        sigma_j: cfg.sigma_j,
    };
    let grid = TimeGrid::new(cfg.n, cfg.dt)?;
    if cfg.paths == 0 {
        return Err(Error::invalid("paths", "must be >= 1"));
    }
    params.validate()?;
    jumps.validate()?;

    with_outputs(
        &args.common.out,
        |out| {
            for i in 0..cfg.paths {
                let seed = if i == 0 {
                    cfg.seed
                } else {
                    derive_seed(cfg.seed, &[i as u64])
                };
                let path = simulate(&params, Some(&jumps), &grid, seed)?;
                let name = if cfg.paths == 1 {
                    "path.csv".to_string()
                } else {
                    format!("path_{i:03}.csv")
                };
                out.write(&name, |w| path.write_csv(&grid, w))?;
            }
            Ok(())
        },
        "simulate",
        &cfg,
    )
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let mut cfg: CalibrateConfig = load_config(args.common.config.as_deref(), "calibrate")?;
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    if args.priors.is_some() {
        cfg.priors = args.priors.clone();
    }
    if args.dt.is_some() {
        cfg.dt = args.dt;
    }
    set(&mut cfg.gibbs.iterations, args.iterations);
    set(&mut cfg.gibbs.burn_in, args.burn_in);
    set(&mut cfg.gibbs.particles, args.particles);
    if args.no_jumps {
        cfg.gibbs.with_jumps = false;
    }
    set(&mut cfg.seed, args.common.seed);

    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::invalid("input", "no price file given"))?;
    let series = load_prices(input)?;
    let priors = match &cfg.priors {
        Some(p) => Priors::<f64>::load(p)?,
        None => Priors::default(),
    };
    cfg.gibbs.validate()?;
    let dt = cfg.dt.unwrap_or(series.dt);
    info!(
        "calibrating {} ({} prices, {} iterations, {} particles)",
        series.symbol,
        series.prices.len(),
        cfg.gibbs.iterations,
        cfg.gibbs.particles
    );
    let result = run_gibbs(&series.prices, dt, &priors, &cfg.gibbs, cfg.seed)?;

    with_outputs(
        &args.common.out,
        |out| {
            out.write_json("estimation.json", &result)?;
            out.write("filtered_state.csv", |w| result.write_filtered_csv(w))
        },
        "calibrate",
        &cfg,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestRecord {
    pub symbol: String,
    pub strategy: StrategyKind,
    pub initial_wealth: f64,
    pub terminal_wealth: f64,
    pub total_return: f64,
    pub gop: f64,
    pub buy_signals: usize,
    pub sell_signals: usize,
}

pub fn cmd_backtest(args: &BacktestArgs) -> Result<()> {
    let mut cfg: BacktestConfig = load_config(args.common.config.as_deref(), "backtest")?;
    if !args.inputs.is_empty() {
        cfg.inputs = args.inputs.clone();
    }
    if !args.strategies.is_empty() {
        cfg.strategies = args.strategies.clone();
    }
    set(&mut cfg.macd.p, args.macd_p);
    set(&mut cfg.macd.q, args.macd_q);
    set(&mut cfg.macd.s, args.macd_s);
    set(&mut cfg.rsi.period, args.rsi_period);
    set(&mut cfg.rsi.d_plus, args.rsi_upper);
    set(&mut cfg.rsi.d_minus, args.rsi_lower);
    set(&mut cfg.buy_fraction, args.buy_fraction);
    set(&mut cfg.sell_fraction, args.sell_fraction);
    set(&mut cfg.cash_fraction, args.cash_fraction);
    set(&mut cfg.initial_wealth, args.initial_wealth);
    if args.dt.is_some() {
        cfg.dt = args.dt;
    }
    set(&mut cfg.seed, args.common.seed);

    if cfg.inputs.is_empty() {
        return Err(Error::invalid("inputs", "no price file given"));
    }
    if cfg.strategies.is_empty() {
        return Err(Error::invalid("strategies", "no strategy selected"));
    }
    let series = cfg
        .inputs
        .iter()
        .map(|p| load_prices(p))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for s in &series {
        if !seen.insert(s.symbol.clone()) {
            return Err(Error::invalid(
                "inputs",
                format!("duplicate symbol `{}`", s.symbol),
            ));
        }
    }

    let mut records = Vec::new();
    let mut runs = Vec::new();
    for s in &series {
        let initial = Portfolio::split(cfg.initial_wealth, cfg.cash_fraction, &s.prices[..1])?;
        let horizon = cfg.dt.unwrap_or(s.dt) * (s.prices.len() - 1) as f64;
        let prices = vec![s.prices.clone()];
        for &kind in &cfg.strategies {
            let strategy = StrategyConfig {
                kind,
                macd: cfg.macd,
                rsi: cfg.rsi,
                buy_fraction: cfg.buy_fraction,
                sell_fraction: cfg.sell_fraction,
            };
            let bt = backtest(&prices, &strategy, &initial)?;
            let g = if horizon > 0.0 {
                gop(bt.initial_wealth(), bt.terminal_wealth(), horizon)?
            } else {
                0.0
            };
            records.push(BacktestRecord {
                symbol: s.symbol.clone(),
                strategy: kind,
                initial_wealth: bt.initial_wealth(),
                terminal_wealth: bt.terminal_wealth(),
                total_return: bt.total_return(),
                gop: g,
                buy_signals: bt.buy_signals,
                sell_signals: bt.sell_signals,
            });
            runs.push((s, kind, bt));
        }
    }

    with_outputs(
        &args.common.out,
        |out| {
            for (s, kind, bt) in &runs {
                out.write(&format!("{}_{}.csv", s.symbol, kind.name()), |w| {
                    bt.write_csv(&s.labels, w)
                })?;
            }
            out.write_json("summary.json", &records)?;
            out.write("returns.csv", |w| {
                write_returns_table(&series, &cfg.strategies, &records, w)
            })
        },
        "backtest",
        &cfg,
    )
}

/// Strategy rows by symbol columns of total return.
fn write_returns_table<W: Write>(
    series: &[PriceInput],
    strategies: &[StrategyKind],
    records: &[BacktestRecord],
    out: W,
) -> Result<()> {
    let table: BTreeMap<(&str, StrategyKind), f64> = records
        .iter()
        .map(|r| ((r.symbol.as_str(), r.strategy), r.total_return))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["strategy".to_string()];
    header.extend(series.iter().map(|s| s.symbol.clone()));
    w.write_record(&header)?;
    for &kind in strategies {
        let mut row = vec![kind.name().to_string()];
        row.extend(
            series
                .iter()
                .map(|s| format!("{}", table[&(s.symbol.as_str(), kind)])),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn grid_config(args: &GridArgs, command: &str) -> Result<ExperimentGrid<f64>> {
    let mut cfg: ExperimentGrid<f64> = load_config(args.common.config.as_deref(), command)?;
    if !args.mu_values.is_empty() {
        cfg.mu_values = args.mu_values.clone();
    }
    if !args.lambda_values.is_empty() {
        cfg.lambda_values = args.lambda_values.clone();
    }
    if !args.mu_j_values.is_empty() {
        cfg.mu_j_values = Some(args.mu_j_values.clone());
    }
    set(&mut cfg.mu_j_panel_lambda, args.mu_j_lambda);
    set(&mut cfg.reps, args.reps);
    set(&mut cfg.assets, args.assets);
    set(&mut cfg.grid.n, args.n);
    set(&mut cfg.grid.dt, args.dt);
    set(&mut cfg.cash_fraction, args.cash_fraction);
    if !args.active.is_empty() {
        cfg.active = args
            .active
            .iter()
            .map(|&k| StrategyConfig::of_kind(k))
            .collect();
    }
    set(&mut cfg.seed, args.common.seed);
    Ok(cfg)
}

pub fn cmd_aspi_grid(args: &GridArgs) -> Result<()> {
    let mut cfg = grid_config(args, "aspi-grid")?;
    // Jump-size panels are only used by gop-curves.
    cfg.mu_j_values = None;
    let result = cfg.run_grid()?;
    with_outputs(
        &args.common.out,
        |out| out.write("heatmap.csv", |w| result.write_heatmap_csv(w)),
        "aspi-grid",
        &cfg,
    )
}

pub fn cmd_gop_curves(args: &GridArgs) -> Result<()> {
    let mut cfg = grid_config(args, "gop-curves")?;
    if cfg.mu_j_values.is_none() {
        cfg.mu_j_values = Some(vec![0.2, 0.6, 1.0]);
    }
    let result = cfg.run_grid()?;
    with_outputs(
        &args.common.out,
        |out| {
            for (lambda, points) in result.intensity_curves() {
                out.write(&format!("gop_lambda_{lambda}.csv"), |w| {
                    write_curve_csv(&points, w)
                })?;
            }
            for (size, points) in result.jump_size_curves() {
                out.write(&format!("gop_mu_j_{size}.csv"), |w| {
                    write_curve_csv(&points, w)
                })?;
            }
            Ok(())
        },
        "gop-curves",
        &cfg,
    )
}

/// Runs `body` against a fresh output set, then writes the manifest. On any
/// failure the files written so far are removed.
fn with_outputs<C: Serialize>(
    dir: &Path,
    body: impl FnOnce(&mut Outputs) -> Result<()>,
    command: &str,
    config: &C,
) -> Result<()> {
    let mut out = Outputs::new(dir)?;
    match body(&mut out).and_then(|()| out.finish(command, config)) {
        Ok(()) => Ok(()),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Simulate(a) => &a.common,
        Command::Calibrate(a) => &a.common,
        Command::Backtest(a) => &a.common,
        Command::AspiGrid(a) | Command::GopCurves(a) => &a.common,
    }
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common(&cli.command).threads {
        if n == 0 {
            return Err(Error::invalid("threads", "must be >= 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Backtest(a) => cmd_backtest(a),
        Command::AspiGrid(a) => cmd_aspi_grid(a),
        Command::GopCurves(a) => cmd_gop_curves(a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn missing_required_flag_is_usage_error() {
        let err = Cli::try_parse_from(["bates", "simulate", "--mu", "0.1"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(Cli::try_parse_from(["bates", "simulate", "--config", "x.json"]).is_ok());
    }

    #[test]
    fn negative_values_parse() {
        let cli = Cli::try_parse_from([
            "bates", "simulate", "--mu", "-0.2", "--kappa", "1", "--theta", "0.04", "--sigma",
            "0.1", "--rho", "-0.5", "--n", "10", "--dt", "0.01",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate(a) => {
                assert_eq!(a.mu, Some(-0.2));
                assert_eq!(a.rho, Some(-0.5));
            }
            _ => unreachable!(),
        }
    }
}
