//! Equilibration, sampling, ensemble averaging and tax-rate sweeps.
//!
//! Realizations and sweep points run as independent rayon tasks. Each one
//! owns its economy and a private ChaCha stream derived from the master
//! seed, and produces integer histograms that are merged afterwards, so
//! the output does not depend on the thread count or scheduling.

use rayon::prelude::*;
use thiserror::Error;

use crate::exchange::{EconomyState, ModelParams, ParamError};
use crate::rng::realization_rng;
use crate::stats::{
    empirical_ccdf, fit_exponential, fit_lognormal_slope, modal_wealth, EmpiricalCcdf, StatsError,
    TailFit, WealthHistogram,
};

pub const DEFAULT_BURN_IN_SWEEPS: u64 = 2000;
pub const DEFAULT_SAMPLE_SWEEPS: u64 = 1000;
pub const DEFAULT_SAMPLE_INTERVAL_SWEEPS: u64 = 2;
pub const DEFAULT_REALIZATIONS: u32 = 10;
/// Bin width in units of the mean wealth `W / N`.
pub const DEFAULT_RELATIVE_BIN_WIDTH: f64 = 0.05;
pub const DEFAULT_BINS: usize = 200;

/// Relative drift of total wealth that aborts a run.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;
/// Block distance above which a run is flagged as possibly unequilibrated.
pub const EQUILIBRATION_WARN_DISTANCE: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid model parameters: {0}")]
    Params(#[from] ParamError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("total wealth drifted by {drift:e} (relative) in realization {realization} after {trades} trades")]
    ConservationBreach { realization: u32, trades: u64, drift: f64 },
    #[error("sweep point f = {tax_rate} failed: {source}")]
    SweepPoint {
        tax_rate: f64,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("sweep is empty")]
    EmptySweep,
    #[error("row f = {0} has no lognormal slope fit")]
    MissingFit(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub params: ModelParams,
    pub burn_in_sweeps: u64,
    pub sample_sweeps: u64,
    pub sample_interval_sweeps: u64,
    pub n_realizations: u32,
    pub master_seed: u64,
    /// Absolute bin width in wealth units.
    pub bin_width: f64,
    pub n_bins: usize,
}

impl SimulationConfig {
    /// Default sampling schedule, bins of `0.05 * W / N`.
    pub fn new(params: ModelParams, master_seed: u64) -> Self {
        Self {
            params,
            burn_in_sweeps: DEFAULT_BURN_IN_SWEEPS,
            sample_sweeps: DEFAULT_SAMPLE_SWEEPS,
            sample_interval_sweeps: DEFAULT_SAMPLE_INTERVAL_SWEEPS,
            n_realizations: DEFAULT_REALIZATIONS,
            master_seed,
            bin_width: DEFAULT_RELATIVE_BIN_WIDTH * params.mean_wealth(),
            n_bins: DEFAULT_BINS,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.params.validate()?;
        if self.sample_sweeps < 1 {
            return Err(ExperimentError::Config("sample_sweeps must be at least 1".into()));
        }
        if self.sample_interval_sweeps < 1 || self.sample_interval_sweeps > self.sample_sweeps {
            return Err(ExperimentError::Config(format!(
                "sample_interval must lie in [1, sample_sweeps = {}], got {}",
                self.sample_sweeps, self.sample_interval_sweeps
            )));
        }
        if self.n_realizations < 1 {
            return Err(ExperimentError::Config("realizations must be at least 1".into()));
        }
        WealthHistogram::new(self.bin_width, self.n_bins)?;
        Ok(())
    }

    pub fn snapshots_per_realization(&self) -> u64 {
        self.sample_sweeps / self.sample_interval_sweeps
    }

    fn with_tax_rate(&self, tax_rate: f64) -> Self {
        Self {
            params: self.params.with_tax_rate(tax_rate),
            ..self.clone()
        }
    }
}

/// Observables of one ensemble run, all taken from the same histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub histogram: WealthHistogram,
    pub ccdf: EmpiricalCcdf,
    pub modal_wealth: f64,
    pub lognormal_fit: Option<TailFit>,
    pub exponential_fit: Option<TailFit>,
    /// L1 distance between the first and second half of the sampling
    /// window, pooled over realizations. `None` with a single snapshot.
    pub block_distance: Option<f64>,
    /// Largest relative drift of total wealth seen at any checkpoint.
    pub max_drift: f64,
    pub trades_per_realization: u64,
}

struct Partial {
    early: WealthHistogram,
    late: WealthHistogram,
    max_drift: f64,
}

fn checked_drift(state: &EconomyState, realization: u32) -> Result<f64, ExperimentError> {
    let drift = state.relative_drift();
    if drift > CONSERVATION_TOLERANCE || !drift.is_finite() {
        return Err(ExperimentError::ConservationBreach {
            realization,
            trades: state.time(),
            drift,
        });
    }
    Ok(drift)
}

fn run_realization(config: &SimulationConfig, point: u32, realization: u32) -> Result<Partial, ExperimentError> {
    let rng = realization_rng(config.master_seed, point, realization);
    let mut state = EconomyState::with_rng(config.params, rng)?;
    state.run_sweeps(config.burn_in_sweeps);
    let mut max_drift = checked_drift(&state, realization)?;

    let snapshots = config.snapshots_per_realization();
    let mut early = WealthHistogram::new(config.bin_width, config.n_bins)?;
    let mut late = early.clone();
    for s in 0..snapshots {
        state.run_sweeps(config.sample_interval_sweeps);
        max_drift = max_drift.max(checked_drift(&state, realization)?);
        let target = if s < snapshots / 2 { &mut early } else { &mut late };
        target.add_snapshot(state.wealth())?;
    }
    Ok(Partial {
        early,
        late,
        max_drift,
    })
}

fn run_point(config: &SimulationConfig, point: u32) -> Result<RunResult, ExperimentError> {
    config.validate()?;
    let partials: Vec<Partial> = (0..config.n_realizations)
        .into_par_iter()
        .map(|r| run_realization(config, point, r))
        .collect::<Result<_, _>>()?;

    let mut early = WealthHistogram::new(config.bin_width, config.n_bins)?;
    let mut late = early.clone();
    let mut max_drift = 0.0f64;
    for p in &partials {
        early.merge(&p.early)?;
        late.merge(&p.late)?;
        max_drift = max_drift.max(p.max_drift);
    }
    let block_distance = early.l1_distance(&late).ok();
    if let Some(d) = block_distance {
        if d > EQUILIBRATION_WARN_DISTANCE {
            log::warn!(
                "f = {}: sampling blocks differ by L1 {d:.4}, run may not be equilibrated",
                config.params.tax_rate
            );
        }
    }
    let mut histogram = early;
    histogram.merge(&late)?;

    let ccdf = empirical_ccdf(&histogram)?;
    let w_mode = modal_wealth(&histogram)?;
    let lognormal_fit = fit_lognormal_slope(&ccdf, w_mode).ok();
    let exponential_fit = fit_exponential(&ccdf).ok();
    let trades_per_realization = (config.burn_in_sweeps
        + config.snapshots_per_realization() * config.sample_interval_sweeps)
        * config.params.n_agents as u64;

    Ok(RunResult {
        histogram,
        ccdf,
        modal_wealth: w_mode,
        lognormal_fit,
        exponential_fit,
        block_distance,
        max_drift,
        trades_per_realization,
    })
}

/// Ensemble run at the configured tax rate.
///
/// Realization `r` draws from ChaCha stream `r` keyed by `master_seed`.
pub fn run_simulation(config: &SimulationConfig) -> Result<RunResult, ExperimentError> {
    run_point(config, 0)
}

/// One row of a tax sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub tax_rate: f64,
    pub modal_wealth: f64,
    /// Slope of `Q(w)` itself on log-normal probability axes, i.e. of
    /// `probit(Q)` against `ln w` past the mode. This is the negative of
    /// the `1 / sigma` reported by the tail fit, so steeper tails give
    /// smaller values.
    pub lognormal_slope: Option<f64>,
    /// Fit quality of the lognormal tail fit.
    pub r_squared: Option<f64>,
    pub exponential_temperature: Option<f64>,
    pub samples: u64,
}

impl SweepRow {
    pub fn from_run(tax_rate: f64, run: &RunResult) -> Self {
        Self {
            tax_rate,
            modal_wealth: run.modal_wealth,
            lognormal_slope: run.lognormal_fit.map(|f| -f.slope),
            r_squared: run.lognormal_fit.map(|f| f.r_squared),
            exponential_temperature: run.exponential_fit.map(|f| f.temperature()),
            samples: run.histogram.total_observations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ascending in `tax_rate`.
    pub rows: Vec<SweepRow>,
    pub max_drift: f64,
}

/// Runs the ensemble at every tax rate in `f_values`.
///
/// The grid is sorted ascending; point `k` of the sorted grid uses streams
/// `(k, r)` of the master seed. Points run concurrently.
pub fn sweep_tax(config: &SimulationConfig, f_values: &[f64]) -> Result<SweepResult, ExperimentError> {
    if f_values.is_empty() {
        return Err(ExperimentError::EmptySweep);
    }
    let mut grid = f_values.to_vec();
    grid.sort_by(f64::total_cmp);
    for pair in grid.windows(2) {
        if pair[0] == pair[1] {
            return Err(ExperimentError::Config(format!("tax grid repeats f = {}", pair[0])));
        }
    }
    if let Some(&bad) = grid.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(ExperimentError::Params(ParamError::TaxRateOutOfRange(bad)));
    }

    let rows: Vec<(SweepRow, f64)> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &f)| {
            run_point(&config.with_tax_rate(f), k as u32)
                .map(|run| (SweepRow::from_run(f, &run), run.max_drift))
                .map_err(|e| ExperimentError::SweepPoint {
                    tax_rate: f,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_, _>>()?;

    let max_drift = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SweepResult {
        rows: rows.into_iter().map(|r| r.0).collect(),
        max_drift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimumCriterion {
    /// Largest modal wealth.
    MaxMode,
    /// Smallest lognormal slope.
    MinSlope,
}

/// Grid point that optimizes `criterion`; ties go to the smaller f.
pub fn find_optimal_tax(sweep: &SweepResult, criterion: OptimumCriterion) -> Result<f64, ExperimentError> {
    let first = sweep.rows.first().ok_or(ExperimentError::EmptySweep)?;
    match criterion {
        OptimumCriterion::MaxMode => {
            let mut best = first;
            for row in &sweep.rows[1..] {
                if row.modal_wealth > best.modal_wealth {
                    best = row;
                }
            }
            Ok(best.tax_rate)
        }
        OptimumCriterion::MinSlope => {
            let mut best: Option<(f64, f64)> = None;
            for row in &sweep.rows {
                let slope = row.lognormal_slope.ok_or(ExperimentError::MissingFit(row.tax_rate))?;
                if best.is_none_or(|(_, s)| slope < s) {
                    best = Some((row.tax_rate, slope));
                }
            }
            Ok(best.expect("nonempty").0)
        }
    }
}

/// Runs two consecutive blocks of `block_sweeps` sweeps, snapshotting
/// after every sweep, and returns the L1 distance between the two block
/// histograms.
pub fn equilibration_check(
    state: &mut EconomyState,
    block_sweeps: u64,
    bin_width: f64,
    n_bins: usize,
) -> Result<f64, ExperimentError> {
    if block_sweeps < 1 {
        return Err(ExperimentError::Config("block_sweeps must be at least 1".into()));
    }
    let mut blocks = [
        WealthHistogram::new(bin_width, n_bins)?,
        WealthHistogram::new(bin_width, n_bins)?,
    ];
    for block in blocks.iter_mut() {
        for _ in 0..block_sweeps {
            state.run_sweeps(1);
            block.add_snapshot(state.wealth())?;
        }
    }
    Ok(blocks[0].l1_distance(&blocks[1])?)
}
