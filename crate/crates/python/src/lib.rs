//! Python bindings for the wealth-exchange simulator.
//!
//! Mirrors the Rust API closely: `ModelParams` and `EconomyState` drive
//! single economies, `SimulationConfig`, `run_simulation`, `sweep_tax` and
//! `find_optimal_tax` run ensembles, and the stats helpers work on plain
//! lists. Long simulations release the GIL.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use wealth_exchange::exchange::{self as ex, RedistributionPolicy};
use wealth_exchange::experiment::{self as xp, ExperimentError, OptimumCriterion};
use wealth_exchange::probit;
use wealth_exchange::stats::{self, EmpiricalCcdf};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn experiment_err(e: ExperimentError) -> PyErr {
    match e {
        ExperimentError::Params(_) | ExperimentError::Config(_) | ExperimentError::EmptySweep => value_err(e),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn policy_from(name: &str, poorest_fraction: Option<f64>) -> PyResult<RedistributionPolicy> {
    match (name, poorest_fraction) {
        ("uniform_all", None) => Ok(RedistributionPolicy::UniformAll),
        ("uniform_all", Some(_)) => Err(value_err("poorest_fraction only applies to policy 'poorest'")),
        ("poorest", q) => Ok(RedistributionPolicy::PoorestFraction(q.unwrap_or(0.2))),
        (other, _) => Err(value_err(format!(
            "unknown policy {other:?}, expected 'uniform_all' or 'poorest'"
        ))),
    }
}

/// Population size, total wealth, tax rate and redistribution policy.
#[pyclass(frozen, from_py_object, module = "wealth_exchange_py")]
#[derive(Clone, Copy)]
struct ModelParams {
    inner: ex::ModelParams,
}

#[pymethods]
impl ModelParams {
    #[new]
    #[pyo3(signature = (n_agents, total_wealth, tax_rate, policy = "uniform_all", poorest_fraction = None))]
    fn new(
        n_agents: usize,
        total_wealth: f64,
        tax_rate: f64,
        policy: &str,
        poorest_fraction: Option<f64>,
    ) -> PyResult<Self> {
        let policy = policy_from(policy, poorest_fraction)?;
        ex::ModelParams::new(n_agents, total_wealth, tax_rate, policy)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.inner.n_agents
    }

    #[getter]
    fn total_wealth(&self) -> f64 {
        self.inner.total_wealth
    }

    #[getter]
    fn tax_rate(&self) -> f64 {
        self.inner.tax_rate
    }

    #[getter]
    fn policy(&self) -> String {
        self.inner.policy.to_string()
    }

    /// Size of the set that receives the tax.
    fn beneficiary_count(&self) -> usize {
        self.inner.policy.beneficiary_count(self.inner.n_agents)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(n_agents={}, total_wealth={}, tax_rate={}, policy='{}')",
            p.n_agents, p.total_wealth, p.tax_rate, p.policy
        )
    }
}

/// Outcome of one trade.
#[pyclass(get_all, frozen, module = "wealth_exchange_py")]
struct TradeOutcome {
    i: usize,
    j: usize,
    epsilon: f64,
    pool: f64,
    beneficiaries: Vec<usize>,
}

/// One economy with its own random stream.
#[pyclass(module = "wealth_exchange_py")]
struct EconomyState {
    inner: ex::EconomyState,
}

#[pymethods]
impl EconomyState {
    /// Equal shares for every agent, clock at zero.
    #[new]
    fn new(params: ModelParams, seed: u64) -> PyResult<Self> {
        ex::EconomyState::new(params.inner, seed)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn wealth(&self) -> Vec<f64> {
        self.inner.wealth().to_vec()
    }

    #[getter]
    fn time(&self) -> u64 {
        self.inner.time()
    }

    fn total_wealth(&self) -> f64 {
        self.inner.total_wealth()
    }

    fn relative_drift(&self) -> f64 {
        self.inner.relative_drift()
    }

    fn sample_pair(&mut self) -> (usize, usize) {
        self.inner.sample_pair()
    }

    fn trade_step(&mut self) -> TradeOutcome {
        let o = self.inner.trade_step();
        TradeOutcome {
            i: o.i,
            j: o.j,
            epsilon: o.epsilon,
            pool: o.pool,
            beneficiaries: o.beneficiaries,
        }
    }

    fn run_trades(&mut self, py: Python<'_>, n_trades: u64) {
        let state = &mut self.inner;
        py.detach(|| state.run_trades(n_trades));
    }

    /// `n_sweeps * n_agents` trades.
    fn run_sweeps(&mut self, py: Python<'_>, n_sweeps: u64) {
        let state = &mut self.inner;
        py.detach(|| state.run_sweeps(n_sweeps));
    }
}

/// Taxed split of a pair's wealth: `(w_i', w_j', pool)`.
#[pyfunction]
fn exchange(w_i: f64, w_j: f64, epsilon: f64, tax_rate: f64) -> PyResult<(f64, f64, f64)> {
    let e = ex::exchange(w_i, w_j, epsilon, tax_rate).map_err(value_err)?;
    Ok((e.w_i, e.w_j, e.pool))
}

/// Ascending indices of the agents that would receive the tax.
#[pyfunction]
#[pyo3(signature = (wealth, policy = "uniform_all", poorest_fraction = None))]
fn select_beneficiaries(wealth: Vec<f64>, policy: &str, poorest_fraction: Option<f64>) -> PyResult<Vec<usize>> {
    Ok(ex::select_beneficiaries(&wealth, policy_from(policy, poorest_fraction)?))
}

#[pyfunction]
fn inverse_normal_cdf(p: f64) -> PyResult<f64> {
    probit::inverse_normal_cdf(p).map_err(value_err)
}

/// Least-squares tail fit.
#[pyclass(get_all, frozen, skip_from_py_object, module = "wealth_exchange_py")]
#[derive(Clone, Copy)]
struct TailFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    n_points: usize,
}

#[pymethods]
impl TailFit {
    /// `-1 / slope`, the temperature of an exponential fit.
    fn temperature(&self) -> f64 {
        -1.0 / self.slope
    }

    fn __repr__(&self) -> String {
        format!(
            "TailFit(slope={}, intercept={}, r_squared={}, n_points={})",
            self.slope, self.intercept, self.r_squared, self.n_points
        )
    }
}

impl From<stats::TailFit> for TailFit {
    fn from(f: stats::TailFit) -> Self {
        Self {
            slope: f.slope,
            intercept: f.intercept,
            r_squared: f.r_squared,
            n_points: f.n_points,
        }
    }
}

type Series = Vec<(f64, f64)>;

/// Bins `values` and returns `([(bin_center, density)], [(edge, Q)])`.
#[pyfunction]
fn histogram(values: Vec<f64>, bin_width: f64, n_bins: usize) -> PyResult<(Series, Series)> {
    let mut h = stats::WealthHistogram::new(bin_width, n_bins).map_err(value_err)?;
    h.add_snapshot(&values).map_err(value_err)?;
    let ccdf = stats::empirical_ccdf(&h).map_err(value_err)?;
    Ok((h.density_series(), ccdf.points().to_vec()))
}

/// Center of the densest bin of a `(bin_center, density)` series.
#[pyfunction]
fn modal_wealth(density: Vec<(f64, f64)>) -> PyResult<f64> {
    stats::mode_of_series(&density).map_err(value_err)
}

/// Fit of `probit(1 - Q)` against `ln w` past `w_mode`; slope is `1 / sigma`.
#[pyfunction]
fn fit_lognormal_slope(ccdf: Vec<(f64, f64)>, w_mode: f64) -> PyResult<TailFit> {
    stats::fit_lognormal_slope(&EmpiricalCcdf::from_points(ccdf), w_mode)
        .map(Into::into)
        .map_err(value_err)
}

/// Fit of `ln Q` against `w`.
#[pyfunction]
fn fit_exponential(ccdf: Vec<(f64, f64)>) -> PyResult<TailFit> {
    stats::fit_exponential(&EmpiricalCcdf::from_points(ccdf))
        .map(Into::into)
        .map_err(value_err)
}

/// Sampling schedule and binning of an ensemble run.
#[pyclass(frozen, from_py_object, module = "wealth_exchange_py")]
#[derive(Clone)]
struct SimulationConfig {
    inner: xp::SimulationConfig,
}

#[pymethods]
impl SimulationConfig {
    /// Unset fields take the library defaults; `bin_width` defaults to
    /// 5% of the mean wealth.
    #[new]
    #[pyo3(signature = (params, seed, burn_in_sweeps = None, sample_sweeps = None, sample_interval = None,
                        realizations = None, bin_width = None, n_bins = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        params: ModelParams,
        seed: u64,
        burn_in_sweeps: Option<u64>,
        sample_sweeps: Option<u64>,
        sample_interval: Option<u64>,
        realizations: Option<u32>,
        bin_width: Option<f64>,
        n_bins: Option<usize>,
    ) -> PyResult<Self> {
        let d = xp::SimulationConfig::new(params.inner, seed);
        let inner = xp::SimulationConfig {
            burn_in_sweeps: burn_in_sweeps.unwrap_or(d.burn_in_sweeps),
            sample_sweeps: sample_sweeps.unwrap_or(d.sample_sweeps),
            sample_interval_sweeps: sample_interval.unwrap_or(d.sample_interval_sweeps),
            n_realizations: realizations.unwrap_or(d.n_realizations),
            bin_width: bin_width.unwrap_or(d.bin_width),
            n_bins: n_bins.unwrap_or(d.n_bins),
            ..d
        };
        inner.validate().map_err(experiment_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn params(&self) -> ModelParams {
        ModelParams {
            inner: self.inner.params,
        }
    }

    fn snapshots_per_realization(&self) -> u64 {
        self.inner.snapshots_per_realization()
    }
}

/// Observables of one ensemble run.
#[pyclass(get_all, frozen, module = "wealth_exchange_py")]
struct RunResult {
    density: Vec<(f64, f64)>,
    ccdf: Vec<(f64, f64)>,
    overflow_fraction: f64,
    modal_wealth: f64,
    lognormal_fit: Option<TailFit>,
    exponential_fit: Option<TailFit>,
    block_distance: Option<f64>,
    max_drift: f64,
    samples: u64,
}

#[pyfunction]
fn run_simulation(py: Python<'_>, config: SimulationConfig) -> PyResult<RunResult> {
    let run = py.detach(|| xp::run_simulation(&config.inner)).map_err(experiment_err)?;
    Ok(RunResult {
        density: run.histogram.density_series(),
        ccdf: run.ccdf.points().to_vec(),
        overflow_fraction: run.histogram.overflow_fraction(),
        modal_wealth: run.modal_wealth,
        lognormal_fit: run.lognormal_fit.map(Into::into),
        exponential_fit: run.exponential_fit.map(Into::into),
        block_distance: run.block_distance,
        max_drift: run.max_drift,
        samples: run.histogram.total_observations(),
    })
}

/// One row of a tax sweep. `lognormal_slope` is the signed slope of `Q`
/// on log-normal axes, i.e. `-1 / sigma`.
#[pyclass(get_all, frozen, from_py_object, module = "wealth_exchange_py")]
#[derive(Clone, Copy)]
struct SweepRow {
    tax_rate: f64,
    modal_wealth: f64,
    lognormal_slope: Option<f64>,
    r_squared: Option<f64>,
    exponential_temperature: Option<f64>,
    samples: u64,
}

impl From<xp::SweepRow> for SweepRow {
    fn from(r: xp::SweepRow) -> Self {
        Self {
            tax_rate: r.tax_rate,
            modal_wealth: r.modal_wealth,
            lognormal_slope: r.lognormal_slope,
            r_squared: r.r_squared,
            exponential_temperature: r.exponential_temperature,
            samples: r.samples,
        }
    }
}

impl From<SweepRow> for xp::SweepRow {
    fn from(r: SweepRow) -> Self {
        Self {
            tax_rate: r.tax_rate,
            modal_wealth: r.modal_wealth,
            lognormal_slope: r.lognormal_slope,
            r_squared: r.r_squared,
            exponential_temperature: r.exponential_temperature,
            samples: r.samples,
        }
    }
}

/// Runs the ensemble at every tax rate; rows come back sorted by rate.
#[pyfunction]
fn sweep_tax(py: Python<'_>, config: SimulationConfig, tax_rates: Vec<f64>) -> PyResult<Vec<SweepRow>> {
    let sweep = py
        .detach(|| xp::sweep_tax(&config.inner, &tax_rates))
        .map_err(experiment_err)?;
    Ok(sweep.rows.into_iter().map(Into::into).collect())
}

/// Grid point with the largest mode (`"max_mode"`) or smallest lognormal
/// slope (`"min_slope"`).
#[pyfunction]
fn find_optimal_tax(rows: Vec<SweepRow>, criterion: &str) -> PyResult<f64> {
    let criterion = match criterion {
        "max_mode" => OptimumCriterion::MaxMode,
        "min_slope" => OptimumCriterion::MinSlope,
        other => return Err(value_err(format!("unknown criterion {other:?}"))),
    };
    let sweep = xp::SweepResult {
        rows: rows.into_iter().map(Into::into).collect(),
        max_drift: 0.0,
    };
    xp::find_optimal_tax(&sweep, criterion).map_err(experiment_err)
}

#[pymodule]
fn wealth_exchange_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ModelParams>()?;
    m.add_class::<EconomyState>()?;
    m.add_class::<TradeOutcome>()?;
    m.add_class::<TailFit>()?;
    m.add_class::<SimulationConfig>()?;
    m.add_class::<RunResult>()?;
    m.add_class::<SweepRow>()?;
    m.add_function(wrap_pyfunction!(exchange, m)?)?;
    m.add_function(wrap_pyfunction!(select_beneficiaries, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(histogram, m)?)?;
    m.add_function(wrap_pyfunction!(modal_wealth, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lognormal_slope, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_tax, m)?)?;
    m.add_function(wrap_pyfunction!(find_optimal_tax, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
