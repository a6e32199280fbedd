//! End-to-end runs of the command-line tool.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wealth_exchange::commands::{EXIT_CONFIG, EXIT_RUNTIME};
use wealth_exchange::output::{meta_value, parse_pairs, parse_sweep_csv, PW_HEADER, QW_HEADER};

const SMALL: &str = "\
# small economy, short schedule
n_agents = 200
seed = 31
tax_rate = 0.0
tax_grid = 0.0, 0.3, 0.6
burn_in_sweeps = 300
sample_sweeps = 200
sample_interval = 4
realizations = 2
";

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wealth-exchange"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_into(config: &str, out: &Path, command: &str) -> Output {
    let out = cli(&[command, "--config", config, "--out", out.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.cfg", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_into(&config, &a, "run");
    run_into(&config, &b, "run");
    for file in ["pw.csv", "qw.csv"] {
        let x = fs::read(a.join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(file)).unwrap(), "{file}");
    }
    let meta = fs::read_to_string(a.join("run_meta.txt")).unwrap();
    let drift: f64 = meta_value(&meta, "max_relative_drift").unwrap().parse().unwrap();
    assert!(drift <= 1e-9);
    assert_eq!(meta_value(&meta, "seed"), Some("31"));
}

#[test]
fn seed_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.cfg", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_into(&config, &a, "run");
    let out = cli(&["run", "--config", &config, "--seed", "32", "--out", b.to_str().unwrap()]);
    assert!(out.status.success());
    assert_ne!(fs::read(a.join("pw.csv")).unwrap(), fs::read(b.join("pw.csv")).unwrap());
    let meta = fs::read_to_string(b.join("run_meta.txt")).unwrap();
    assert_eq!(meta_value(&meta, "seed"), Some("32"));
}

#[test]
fn gibbs_run_has_linear_log_ccdf() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.cfg", SMALL);
    let out = dir.path().join("o");
    run_into(&config, &out, "run");
    let qw = parse_pairs(Path::new("qw"), &fs::read_to_string(out.join("qw.csv")).unwrap(), QW_HEADER).unwrap();
    // -ln Q at w = 1 and w = 2 should sit near 1 and 2 for T = 1
    let at = |w: f64| qw.iter().find(|p| (p.0 - w).abs() < 1e-9).unwrap().1;
    assert!((-at(1.0).ln() - 1.0).abs() < 0.1);
    assert!((-at(2.0).ln() - 2.0).abs() < 0.2);
}

#[test]
fn csv_values_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.cfg", SMALL);
    let out = dir.path().join("o");
    run_into(&config, &out, "run");
    for (file, header) in [("pw.csv", PW_HEADER), ("qw.csv", QW_HEADER)] {
        let text = fs::read_to_string(out.join(file)).unwrap();
        let rows = parse_pairs(Path::new(file), &text, header).unwrap();
        let mut again = format!("{header}\n");
        for (x, y) in rows {
            again.push_str(&format!(
                "{},{}\n",
                wealth_exchange::output::format_float(x),
                wealth_exchange::output::format_float(y)
            ));
        }
        assert_eq!(again, text, "{file}");
    }
}

#[test]
fn sweep_writes_rows_and_optima() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.cfg", SMALL);
    let out = dir.path().join("o");
    let res = run_into(&config, &out, "sweep");
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("f*(MaxMode)"), "{stdout}");
    assert!(stdout.contains("f*(MinSlope)"), "{stdout}");
    let rows = parse_sweep_csv(Path::new("s"), &fs::read_to_string(out.join("sweep.csv")).unwrap()).unwrap();
    let fs_: Vec<f64> = rows.iter().map(|r| r.tax_rate).collect();
    assert_eq!(fs_, vec![0.0, 0.3, 0.6]);
    assert!(rows.iter().all(|r| r.samples == 2 * 50 * 200));
    let meta = fs::read_to_string(out.join("run_meta.txt")).unwrap();
    assert!(meta_value(&meta, "f_star_max_mode").is_some());
}

#[test]
fn single_point_grid_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("tax_grid = 0.0, 0.3, 0.6", "tax_grid = 0.3");
    let config = write_config(dir.path(), "c.cfg", &text);
    let out = dir.path().join("o");
    run_into(&config, &out, "sweep");
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn analyze_reproduces_run_fits() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.cfg", SMALL);
    let out = dir.path().join("o");
    run_into(&config, &out, "run");
    let res = cli(&["analyze", "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    let meta = fs::read_to_string(out.join("run_meta.txt")).unwrap();
    let t_meta: f64 = meta_value(&meta, "exponential_T").unwrap().parse().unwrap();
    let t_line = stdout.lines().find(|l| l.starts_with("exponential T")).unwrap();
    let t_cli: f64 = t_line.split_whitespace().last().unwrap().parse().unwrap();
    assert_eq!(t_cli, t_meta);
}

#[test]
fn invalid_config_fails_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    for (name, text) in [
        ("range.cfg", SMALL.replace("tax_rate = 0.0", "tax_rate = 1.5")),
        ("unknown.cfg", format!("{SMALL}temperature = 1\n")),
        ("missing.cfg", SMALL.replace("n_agents = 200", "")),
    ] {
        let config = write_config(dir.path(), name, &text);
        for command in ["run", "sweep"] {
            let res = cli(&[command, "--config", &config, "--out", out.to_str().unwrap()]);
            assert_eq!(res.status.code(), Some(EXIT_CONFIG), "{name} {command}");
            assert!(!String::from_utf8_lossy(&res.stderr).is_empty());
            assert!(!out.exists(), "{name} {command} left files behind");
        }
    }
    let range = String::from_utf8_lossy(&cli(&["run", "--config", &dir.path().join("range.cfg").to_string_lossy()]).stderr)
        .to_string();
    assert!(range.contains("tax_rate") && range.contains("1.5"), "{range}");
    let res = cli(&["run", "--config", &dir.path().join("absent.cfg").to_string_lossy()]);
    assert_eq!(res.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.cfg", SMALL);
    // a regular file where the output directory should go
    let blocker = dir.path().join("taken");
    fs::write(&blocker, "").unwrap();
    let res = cli(&["run", "--config", &config, "--out", blocker.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(EXIT_RUNTIME));
}

#[test]
fn analyze_without_inputs_fails() {
    let dir = tempfile::tempdir().unwrap();
    let res = cli(&["analyze", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(EXIT_CONFIG));
}
