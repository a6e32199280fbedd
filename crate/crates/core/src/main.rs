use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wealth_exchange::commands::{cmd_analyze, cmd_run, cmd_sweep, load_config, CliError, EXIT_CONFIG};
use wealth_exchange::stats::TailFit;

/// Taxed wealth-exchange simulator. Set RUST_LOG (e.g. `info`) for progress logs.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble run at one tax rate; writes pw.csv, qw.csv and run_meta.txt.
    Run(SimArgs),
    /// Sweep over a tax grid; writes sweep.csv and run_meta.txt.
    Sweep(SimArgs),
    /// Recompute the mode and tail fits from an existing pw.csv / qw.csv pair.
    Analyze {
        /// Directory holding pw.csv and qw.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Take the directory from this config's output_dir.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn describe(fit: Option<TailFit>) -> String {
    match fit {
        Some(f) => format!("slope {:.6}, r^2 {:.6}, {} points", f.slope, f.r_squared, f.n_points),
        None => "n/a".to_string(),
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let config = load_config(&args.config, args.seed)?;
            let out = args.out.unwrap_or_else(|| config.output_dir.clone());
            let report = cmd_run(&config, &out)?;
            let r = &report.result;
            println!("modal wealth       {}", r.modal_wealth);
            println!("lognormal tail     {}", describe(r.lognormal_fit));
            match r.exponential_fit {
                Some(f) => println!("exponential T      {}", f.temperature()),
                None => println!("exponential T      n/a"),
            }
            println!("max relative drift {:e}", r.max_drift);
            println!("wrote {}", out.display());
        }
        Command::Sweep(args) => {
            let config = load_config(&args.config, args.seed)?;
            let out = args.out.unwrap_or_else(|| config.output_dir.clone());
            let report = cmd_sweep(&config, &out)?;
            println!("f*(MaxMode)  = {}", report.f_max_mode);
            match report.f_min_slope {
                Some(f) => println!("f*(MinSlope) = {f}"),
                None => println!("f*(MinSlope) = n/a"),
            }
            println!("wrote {}", out.display());
        }
        Command::Analyze { out, config } => {
            let dir = match (out, config) {
                (Some(dir), _) => dir,
                (None, Some(path)) => load_config(&path, Some(0))?.output_dir,
                (None, None) => PathBuf::from(wealth_exchange::config::DEFAULT_OUTPUT_DIR),
            };
            let report = cmd_analyze(&dir)?;
            println!("modal wealth   {}", report.modal_wealth);
            println!("lognormal tail {}", describe(report.lognormal_fit));
            match report.exponential_fit {
                Some(f) => println!("exponential T  {}", f.temperature()),
                None => println!("exponential T  n/a"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG as u8) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
