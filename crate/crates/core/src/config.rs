//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Unknown or repeated keys are rejected. Every key except `n_agents` and
//! `seed` has a default:
//!
//! | key               | default                         |
//! |-------------------|---------------------------------|
//! | `total_wealth`    | `n_agents` (unit mean wealth)   |
//! | `tax_rate`        | `0` (used by `run`)             |
//! | `tax_grid`        | `0:0.95:0.05` (used by `sweep`) |
//! | `policy`          | `uniform_all`                   |
//! | `poorest_fraction`| `0.2` (only with `poorest`)     |
//! | `burn_in_sweeps`  | `2000`                          |
//! | `sample_sweeps`   | `1000`                          |
//! | `sample_interval` | `2`                             |
//! | `realizations`    | `10`                            |
//! | `bin_width`       | `0.05 * total_wealth / n_agents`|
//! | `n_bins`          | `200`                           |
//! | `output_dir`      | `output`                        |
//!
//! `tax_grid` is either a comma list or an inclusive `start:stop:step`
//! range.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::exchange::{ModelParams, RedistributionPolicy};
use crate::experiment::{
    SimulationConfig, DEFAULT_BINS, DEFAULT_BURN_IN_SWEEPS, DEFAULT_REALIZATIONS, DEFAULT_RELATIVE_BIN_WIDTH,
    DEFAULT_SAMPLE_INTERVAL_SWEEPS, DEFAULT_SAMPLE_SWEEPS,
};

pub const DEFAULT_POOREST_FRACTION: f64 = 0.2;
pub const DEFAULT_OUTPUT_DIR: &str = "output";
/// `0, 0.05, ..., 0.95`.
pub const DEFAULT_TAX_GRID: &str = "0:0.95:0.05";

const KEYS: &[&str] = &[
    "n_agents",
    "total_wealth",
    "tax_rate",
    "tax_grid",
    "policy",
    "poorest_fraction",
    "burn_in_sweeps",
    "sample_sweeps",
    "sample_interval",
    "realizations",
    "seed",
    "bin_width",
    "n_bins",
    "output_dir",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: &'static str,
        value: String,
        reason: String,
    },
}

fn invalid(key: &'static str, value: impl ToString, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key,
        value: value.to_string(),
        reason: reason.into(),
    }
}

/// Validated contents of a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Simulation settings; `params.tax_rate` holds `tax_rate`.
    pub simulation: SimulationConfig,
    /// Whether `tax_rate` was given explicitly.
    pub tax_rate_given: bool,
    /// Explicit sweep grid, in file order.
    pub tax_grid: Option<Vec<f64>>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Tax rate for a single run.
    pub fn run_tax_rate(&self) -> Result<f64, ConfigError> {
        match &self.tax_grid {
            Some(grid) if !self.tax_rate_given => Err(invalid(
                "tax_grid",
                format_grid(grid),
                "`run` takes a single `tax_rate`",
            )),
            _ => Ok(self.simulation.params.tax_rate),
        }
    }

    /// Grid for a sweep.
    pub fn sweep_grid(&self) -> Result<Vec<f64>, ConfigError> {
        match &self.tax_grid {
            Some(grid) => Ok(grid.clone()),
            None if self.tax_rate_given => Err(invalid(
                "tax_rate",
                self.simulation.params.tax_rate,
                "`sweep` takes `tax_grid`",
            )),
            None => parse_grid(DEFAULT_TAX_GRID),
        }
    }
}

fn format_grid(grid: &[f64]) -> String {
    grid.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

struct Entries<'a> {
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Entries<'a> {
    fn raw(&self, key: &'static str) -> Option<&'a str> {
        self.map.get(key).copied()
    }

    fn get<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| invalid(key, v, e.to_string())))
            .transpose()
    }

    fn finite(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.get::<f64>(key)? {
            Some(x) if !x.is_finite() => Err(invalid(key, x, "must be finite")),
            x => Ok(x),
        }
    }
}

/// Snaps a grid value to 12 decimals so `0.1 * 3` style drift does not
/// leak into file names or CSV rows.
fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Parses a comma list or an inclusive `start:stop:step` range.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |reason: &str| invalid("tax_grid", text, reason);
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(&format!("`{}` is not a finite number", s.trim())))
    };
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(bad("a range needs exactly `start:stop:step`"));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if step <= 0.0 || stop < start {
            return Err(bad("a range needs step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| snap(start + k as f64 * step)).collect()
    } else {
        text.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    if let Some(f) = grid.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(bad(&format!("tax rate {f} is outside [0, 1]")));
    }
    let mut sorted = grid.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(bad("values must be distinct"));
    }
    Ok(grid)
}

/// Parses and validates a config file. `seed_override` replaces the
/// file's `seed`.
pub fn parse_config(text: &str, seed_override: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: content.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&key) = KEYS.iter().find(|&&k| k == key) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        if map.insert(key, value).is_some() {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
    }
    let e = Entries { map };

    let n_agents: usize = e.get("n_agents")?.ok_or(ConfigError::MissingKey("n_agents"))?;
    if n_agents < 2 {
        return Err(invalid("n_agents", n_agents, "need at least 2 agents"));
    }
    let seed = match seed_override {
        Some(s) => s,
        None => e.get("seed")?.ok_or(ConfigError::MissingKey("seed"))?,
    };
    let total_wealth = e.finite("total_wealth")?.unwrap_or(n_agents as f64);
    if total_wealth <= 0.0 {
        return Err(invalid("total_wealth", total_wealth, "must be positive"));
    }
    let tax_rate = e.finite("tax_rate")?;
    if let Some(f) = tax_rate.filter(|f| !(0.0..=1.0).contains(f)) {
        return Err(invalid("tax_rate", f, "must lie in [0, 1]"));
    }
    let tax_grid = e.raw("tax_grid").map(parse_grid).transpose()?;

    let fraction = e.finite("poorest_fraction")?;
    let policy = match e.raw("policy").unwrap_or("uniform_all") {
        "uniform_all" => {
            if fraction.is_some() {
                return Err(invalid(
                    "poorest_fraction",
                    e.raw("poorest_fraction").unwrap_or_default(),
                    "only applies to `policy = poorest`",
                ));
            }
            RedistributionPolicy::UniformAll
        }
        "poorest" => {
            let q = fraction.unwrap_or(DEFAULT_POOREST_FRACTION);
            if !(q > 0.0 && q <= 1.0) {
                return Err(invalid("poorest_fraction", q, "must lie in (0, 1]"));
            }
            RedistributionPolicy::PoorestFraction(q)
        }
        other => return Err(invalid("policy", other, "expected `uniform_all` or `poorest`")),
    };

    let burn_in_sweeps = e.get("burn_in_sweeps")?.unwrap_or(DEFAULT_BURN_IN_SWEEPS);
    let sample_sweeps: u64 = e.get("sample_sweeps")?.unwrap_or(DEFAULT_SAMPLE_SWEEPS);
    if sample_sweeps < 1 {
        return Err(invalid("sample_sweeps", sample_sweeps, "must be at least 1"));
    }
    let sample_interval: u64 = e.get("sample_interval")?.unwrap_or(DEFAULT_SAMPLE_INTERVAL_SWEEPS);
    if sample_interval < 1 || sample_interval > sample_sweeps {
        return Err(invalid(
            "sample_interval",
            sample_interval,
            format!("must lie in [1, sample_sweeps = {sample_sweeps}]"),
        ));
    }
    let realizations: u32 = e.get("realizations")?.unwrap_or(DEFAULT_REALIZATIONS);
    if realizations < 1 {
        return Err(invalid("realizations", realizations, "must be at least 1"));
    }
    let bin_width = e
        .finite("bin_width")?
        .unwrap_or(DEFAULT_RELATIVE_BIN_WIDTH * total_wealth / n_agents as f64);
    if bin_width <= 0.0 {
        return Err(invalid("bin_width", bin_width, "must be positive"));
    }
    let n_bins: usize = e.get("n_bins")?.unwrap_or(DEFAULT_BINS);
    if n_bins < 2 {
        return Err(invalid("n_bins", n_bins, "need at least 2 bins"));
    }
    let output_dir = PathBuf::from(e.raw("output_dir").unwrap_or(DEFAULT_OUTPUT_DIR));

    let params = ModelParams {
        n_agents,
        total_wealth,
        tax_rate: tax_rate.unwrap_or(0.0),
        policy,
    };
    let simulation = SimulationConfig {
        params,
        burn_in_sweeps,
        sample_sweeps,
        sample_interval_sweeps: sample_interval,
        n_realizations: realizations,
        master_seed: seed,
        bin_width,
        n_bins,
    };
    // belt and braces: the per-key checks above should make this a no-op
    simulation
        .validate()
        .map_err(|err| invalid("config", "", err.to_string()))?;
    Ok(ExperimentConfig {
        simulation,
        tax_rate_given: tax_rate.is_some(),
        tax_grid,
        output_dir,
    })
}
