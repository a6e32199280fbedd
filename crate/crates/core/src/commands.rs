//! The `run`, `sweep` and `analyze` commands.
//!
//! Each command finishes all of its computation before touching the
//! output directory, so a failed run never leaves partial files behind.

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::experiment::{
    find_optimal_tax, run_simulation, sweep_tax, ExperimentError, OptimumCriterion, RunResult, SimulationConfig,
    SweepResult,
};
use crate::output::{
    format_float, parse_pairs, pw_csv, qw_csv, read_text, sweep_csv, OutputBundle, OutputError, RunMeta, META_FILE,
    PW_FILE, PW_HEADER, QW_FILE, QW_HEADER, SWEEP_FILE,
};
use crate::stats::{fit_exponential, fit_lognormal_slope, mode_of_series, EmpiricalCcdf, StatsError, TailFit};

/// Exit code for unusable configuration or input files.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for failures while simulating or writing results.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    ReadConfig {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("input: {0}")]
    Input(OutputError),
    #[error("input: {0}")]
    InputStats(StatsError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("output: {0}")]
    Output(OutputError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ReadConfig { .. } | CliError::Input(_) | CliError::InputStats(_) => {
                EXIT_CONFIG
            }
            CliError::Experiment(_) | CliError::Output(_) => EXIT_RUNTIME,
        }
    }
}

/// Reads and parses a config file.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
        path: path.display().to_string(),
        source,
    })?;
    Ok(crate::config::parse_config(&text, seed_override)?)
}

fn opt(x: Option<f64>) -> String {
    format_float(x.unwrap_or(f64::NAN))
}

pub struct RunReport {
    pub result: RunResult,
    pub bundle: OutputBundle,
}

/// Single ensemble run; writes `pw.csv`, `qw.csv` and `run_meta.txt`.
pub fn cmd_run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport, CliError> {
    let tax_rate = config.run_tax_rate()?;
    let simulation = SimulationConfig {
        params: config.simulation.params.with_tax_rate(tax_rate),
        ..config.simulation.clone()
    };
    let started = Instant::now();
    let result = run_simulation(&simulation)?;
    let wall_time_s = started.elapsed().as_secs_f64();

    let meta = RunMeta {
        command: "run",
        config,
        tax_rates: &[tax_rate],
        wall_time_s,
        max_relative_drift: result.max_drift,
        extra: vec![
            ("trades_per_realization", result.trades_per_realization.to_string()),
            ("samples", result.histogram.total_observations().to_string()),
            ("overflow_fraction", format_float(result.histogram.overflow_fraction())),
            ("block_distance", opt(result.block_distance)),
            ("modal_wealth", format_float(result.modal_wealth)),
            ("lognormal_inverse_sigma", opt(result.lognormal_fit.map(|f| f.slope))),
            ("lognormal_r_squared", opt(result.lognormal_fit.map(|f| f.r_squared))),
            ("exponential_T", opt(result.exponential_fit.map(|f| f.temperature()))),
        ],
    };
    let mut bundle = OutputBundle::default();
    bundle.push(PW_FILE, pw_csv(&result));
    bundle.push(QW_FILE, qw_csv(&result));
    bundle.push(META_FILE, meta.render());
    bundle.commit(out_dir).map_err(CliError::Output)?;
    Ok(RunReport { result, bundle })
}

pub struct SweepReport {
    pub sweep: SweepResult,
    pub f_max_mode: f64,
    /// `None` when some grid point has no lognormal fit.
    pub f_min_slope: Option<f64>,
    pub bundle: OutputBundle,
}

/// Tax sweep; writes `sweep.csv` and `run_meta.txt`.
pub fn cmd_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<SweepReport, CliError> {
    let grid = config.sweep_grid()?;
    let started = Instant::now();
    let sweep = sweep_tax(&config.simulation, &grid)?;
    let wall_time_s = started.elapsed().as_secs_f64();

    let f_max_mode = find_optimal_tax(&sweep, OptimumCriterion::MaxMode)?;
    let f_min_slope = match find_optimal_tax(&sweep, OptimumCriterion::MinSlope) {
        Ok(f) => Some(f),
        Err(ExperimentError::MissingFit(f)) => {
            log::warn!("no lognormal tail fit at f = {f}, skipping the slope optimum");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let tax_rates: Vec<f64> = sweep.rows.iter().map(|r| r.tax_rate).collect();
    let meta = RunMeta {
        command: "sweep",
        config,
        tax_rates: &tax_rates,
        wall_time_s,
        max_relative_drift: sweep.max_drift,
        extra: vec![
            ("f_star_max_mode", format_float(f_max_mode)),
            ("f_star_min_slope", opt(f_min_slope)),
        ],
    };
    let mut bundle = OutputBundle::default();
    bundle.push(SWEEP_FILE, sweep_csv(&sweep));
    bundle.push(META_FILE, meta.render());
    bundle.commit(out_dir).map_err(CliError::Output)?;
    Ok(SweepReport {
        sweep,
        f_max_mode,
        f_min_slope,
        bundle,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub modal_wealth: f64,
    pub lognormal_fit: Option<TailFit>,
    pub exponential_fit: Option<TailFit>,
}

/// Recomputes the observables from a `pw.csv` / `qw.csv` pair in `dir`.
pub fn cmd_analyze(dir: &Path) -> Result<AnalysisReport, CliError> {
    let pw_path = dir.join(PW_FILE);
    let qw_path = dir.join(QW_FILE);
    let pw = parse_pairs(&pw_path, &read_text(&pw_path).map_err(CliError::Input)?, PW_HEADER)
        .map_err(CliError::Input)?;
    let qw = parse_pairs(&qw_path, &read_text(&qw_path).map_err(CliError::Input)?, QW_HEADER)
        .map_err(CliError::Input)?;
    let modal_wealth = mode_of_series(&pw).map_err(CliError::InputStats)?;
    let ccdf = EmpiricalCcdf::from_points(qw);
    Ok(AnalysisReport {
        modal_wealth,
        lognormal_fit: fit_lognormal_slope(&ccdf, modal_wealth).ok(),
        exponential_fit: fit_exponential(&ccdf).ok(),
    })
}
