//! CSV and metadata files.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which round-trips every `f64` exactly. Missing values are written as
//! `NaN`. Files are staged under a temporary name and renamed into place
//! only once every file of a bundle has been written.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::exchange::RedistributionPolicy;
use crate::experiment::{RunResult, SweepResult, SweepRow};

pub const PW_FILE: &str = "pw.csv";
pub const QW_FILE: &str = "qw.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const META_FILE: &str = "run_meta.txt";

pub const PW_HEADER: &str = "w_bin_center,density";
pub const QW_HEADER: &str = "w,Q";
pub const SWEEP_HEADER: &str = "f,w_m,lognormal_slope,r_squared,exponential_T,samples";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}, line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Exact decimal form of a float.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn format_opt(x: Option<f64>) -> String {
    format_float(x.unwrap_or(f64::NAN))
}

fn pairs_csv(header: &str, rows: &[(f64, f64)]) -> String {
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(header);
    out.push('\n');
    for &(x, y) in rows {
        let _ = writeln!(out, "{},{}", format_float(x), format_float(y));
    }
    out
}

/// `P(w)` at bin centers.
pub fn pw_csv(run: &RunResult) -> String {
    pairs_csv(PW_HEADER, &run.histogram.density_series())
}

/// `Q(w)` at bin edges.
pub fn qw_csv(run: &RunResult) -> String {
    pairs_csv(QW_HEADER, run.ccdf.points())
}

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in &sweep.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_float(row.tax_rate),
            format_float(row.modal_wealth),
            format_opt(row.lognormal_slope),
            format_opt(row.r_squared),
            format_opt(row.exponential_temperature),
            row.samples
        );
    }
    out
}

fn check_header(path: &Path, text: &str, header: &str) -> Result<(), OutputError> {
    match text.lines().next() {
        Some(h) if h.trim() == header => Ok(()),
        other => Err(OutputError::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header `{header}`, got `{}`", other.unwrap_or("")),
        }),
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str) -> Result<T, OutputError> {
    field.trim().parse().map_err(|_| OutputError::Parse {
        path: path.to_path_buf(),
        line,
        reason: format!("cannot parse `{field}`"),
    })
}

fn split_fields<'a>(path: &Path, line: usize, text: &'a str, n: usize) -> Result<Vec<&'a str>, OutputError> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != n {
        return Err(OutputError::Parse {
            path: path.to_path_buf(),
            line,
            reason: format!("expected {n} fields, got {}", fields.len()),
        });
    }
    Ok(fields)
}

/// Parses a two-column CSV with the given header.
pub fn parse_pairs(path: &Path, text: &str, header: &str) -> Result<Vec<(f64, f64)>, OutputError> {
    check_header(path, text, header)?;
    data_lines(text)
        .map(|(line, l)| {
            let f = split_fields(path, line, l, 2)?;
            Ok((parse_field(path, line, f[0])?, parse_field(path, line, f[1])?))
        })
        .collect()
}

fn non_nan(x: f64) -> Option<f64> {
    (!x.is_nan()).then_some(x)
}

pub fn parse_sweep_csv(path: &Path, text: &str) -> Result<Vec<SweepRow>, OutputError> {
    check_header(path, text, SWEEP_HEADER)?;
    data_lines(text)
        .map(|(line, l)| {
            let f = split_fields(path, line, l, 6)?;
            let num = |k: usize| parse_field::<f64>(path, line, f[k]);
            Ok(SweepRow {
                tax_rate: num(0)?,
                modal_wealth: num(1)?,
                lognormal_slope: non_nan(num(2)?),
                r_squared: non_nan(num(3)?),
                exponential_temperature: non_nan(num(4)?),
                samples: parse_field(path, line, f[5])?,
            })
        })
        .collect()
}

pub fn read_text(path: &Path) -> Result<String, OutputError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Everything a command writes, held in memory until committed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputBundle {
    pub files: Vec<(&'static str, String)>,
}

impl OutputBundle {
    pub fn push(&mut self, name: &'static str, contents: String) {
        self.files.push((name, contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| *n == name).map(|(_, c)| c.as_str())
    }

    /// Writes every file to `dir`. Staged copies are renamed into place
    /// only after all of them were written; on failure they are removed.
    pub fn commit(&self, dir: &Path) -> Result<(), OutputError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut staged = Vec::with_capacity(self.files.len());
        let result = (|| {
            for (name, contents) in &self.files {
                let tmp = dir.join(format!(".{name}.tmp"));
                fs::write(&tmp, contents).map_err(io_err(&tmp))?;
                staged.push((tmp, dir.join(name)));
            }
            for (tmp, target) in &staged {
                fs::rename(tmp, target).map_err(io_err(target))?;
            }
            Ok(())
        })();
        if result.is_err() {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
        }
        result
    }
}

fn policy_fields(policy: RedistributionPolicy) -> (&'static str, Option<f64>) {
    match policy {
        RedistributionPolicy::UniformAll => ("uniform_all", None),
        RedistributionPolicy::PoorestFraction(q) => ("poorest", Some(q)),
    }
}

/// `key = value` run metadata.
pub struct RunMeta<'a> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    /// Tax rates actually simulated.
    pub tax_rates: &'a [f64],
    pub wall_time_s: f64,
    pub max_relative_drift: f64,
    pub extra: Vec<(&'static str, String)>,
}

impl RunMeta<'_> {
    pub fn render(&self) -> String {
        let s = &self.config.simulation;
        let (policy, fraction) = policy_fields(s.params.policy);
        let mut entries: Vec<(&str, String)> = vec![
            ("command", self.command.to_string()),
            ("version", env!("CARGO_PKG_VERSION").to_string()),
            ("n_agents", s.params.n_agents.to_string()),
            ("total_wealth", format_float(s.params.total_wealth)),
        ];
        if let [f] = self.tax_rates {
            entries.push(("tax_rate", format_float(*f)));
        } else {
            let grid: Vec<String> = self.tax_rates.iter().map(|&f| format_float(f)).collect();
            entries.push(("tax_grid", grid.join(",")));
        }
        entries.push(("policy", policy.to_string()));
        if let Some(q) = fraction {
            entries.push(("poorest_fraction", format_float(q)));
        }
        entries.extend([
            ("burn_in_sweeps", s.burn_in_sweeps.to_string()),
            ("sample_sweeps", s.sample_sweeps.to_string()),
            ("sample_interval", s.sample_interval_sweeps.to_string()),
            ("realizations", s.n_realizations.to_string()),
            ("seed", s.master_seed.to_string()),
            ("bin_width", format_float(s.bin_width)),
            ("n_bins", s.n_bins.to_string()),
            ("wall_time_s", format!("{:.3}", self.wall_time_s)),
            ("max_relative_drift", format_float(self.max_relative_drift)),
        ]);
        entries.extend(self.extra.iter().map(|(k, v)| (*k, v.clone())));
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Reads one value back out of a rendered metadata file.
pub fn meta_value<'a>(meta: &'a str, key: &str) -> Option<&'a str> {
    meta.lines().find_map(|l| {
        let (k, v) = l.split_once('=')?;
        (k.trim() == key).then(|| v.trim())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, 0.1, 1.0 / 3.0, 2.5e-300, 1.7976931348623157e308, 5e-324, -0.75] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn sweep_csv_round_trip() {
        let rows = vec![
            SweepRow {
                tax_rate: 0.1,
                modal_wealth: 0.725,
                lognormal_slope: Some(-1.0 / 3.0),
                r_squared: Some(0.999),
                exponential_temperature: Some(1.0 / 7.0),
                samples: 5_000_000,
            },
            SweepRow {
                tax_rate: 0.95,
                modal_wealth: 1.025,
                lognormal_slope: None,
                r_squared: None,
                exponential_temperature: None,
                samples: 1,
            },
        ];
        let text = sweep_csv(&SweepResult { rows: rows.clone(), max_drift: 0.0 });
        assert!(text.ends_with('\n'));
        assert_eq!(parse_sweep_csv(Path::new("s"), &text).unwrap(), rows);
    }

    #[test]
    fn pairs_round_trip_and_errors() {
        let rows = vec![(0.025, 0.1), (0.075, 1.0 / 3.0)];
        let text = pairs_csv(PW_HEADER, &rows);
        let p = Path::new("pw.csv");
        assert_eq!(parse_pairs(p, &text, PW_HEADER).unwrap(), rows);
        assert!(parse_pairs(p, &text, QW_HEADER).is_err());
        assert!(matches!(
            parse_pairs(p, "w_bin_center,density\n1,2,3\n", PW_HEADER),
            Err(OutputError::Parse { line: 2, .. })
        ));
        assert!(parse_pairs(p, "w_bin_center,density\n1,x\n", PW_HEADER).is_err());
    }

    #[test]
    fn commit_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested");
        let mut bundle = OutputBundle::default();
        bundle.push("a.csv", "x\n".into());
        bundle.push("b.csv", "y\n".into());
        bundle.commit(&out).unwrap();
        assert_eq!(fs::read_to_string(out.join("a.csv")).unwrap(), "x\n");
        assert_eq!(fs::read_to_string(out.join("b.csv")).unwrap(), "y\n");
        let names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
    }

    #[test]
    fn meta_lookup() {
        let meta = "command = run\nmax_relative_drift = 1e-15\n";
        assert_eq!(meta_value(meta, "max_relative_drift"), Some("1e-15"));
        assert_eq!(meta_value(meta, "seed"), None);
    }
}
