//! Command line front end: configured runs, refinement sweeps, the
//! decomposition comparison, and the built-in invariant check.
//!
//! Exit codes: 0 on success, 2 on configuration problems, 3 on numerical
//! failure (a non-finite field value or a failed check).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adiwave::config::RunConfig;
use adiwave::error::Error;
use adiwave::harness;

#[derive(Parser)]
#[command(name = "adiwave", about = "Implicit wave solver on embedded boundary meshes")]
struct Cli {
    /// Size of the worker thread pool; defaults to the machine.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to a `key = value` config file.
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a config to its final time, writing snapshot CSVs.
    Run(ConfigArg),
    /// Refinement sweep over the given resolutions; writes refinement.csv.
    Refine {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma separated resolutions, e.g. 20,40,80.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
    },
    /// Three way decomposition comparison at the config's resolution.
    Decomp(ConfigArg),
    /// Runs the built-in invariant suite.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}

/// 3 for a numerical failure mid-run, 2 for everything the user can fix.
fn failure_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite { .. } => 3,
        _ => 2,
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run(arg) => {
            let cfg = RunConfig::from_file(&arg.config)?;
            let report = harness::run(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for snap in &report.snapshots {
                println!("t = {}  l2 = {}  -> {}", snap.t, snap.rms, snap.path.display());
            }
            if let Some(path) = &report.energy_csv {
                println!("energy trace -> {}", path.display());
            }
            println!(
                "done: {} steps to t = {}, max |u| = {}",
                report.steps, report.t_end, report.max_abs
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Refine { config, levels } => {
            let cfg = RunConfig::from_file(&config.config)?;
            let rows = harness::refine(&cfg, &levels)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("refinement.csv");
            harness::write_refine_csv(&path, &rows)?;
            println!("resolution,error,order");
            for row in &rows {
                match row.order {
                    Some(o) => println!("{},{},{}", row.resolution, row.error, o),
                    None => println!("{},{},", row.resolution, row.error),
                }
            }
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Decomp(arg) => {
            let cfg = RunConfig::from_file(&arg.config)?;
            let report = harness::decomp_compare(&cfg)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("decomp.csv");
            harness::write_decomp_csv(&path, &report)?;
            println!("n,dd_error,outflow_error,total_error");
            println!(
                "{},{},{},{}",
                report.n, report.dd, report.outflow, report.total
            );
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check => {
            let results = harness::self_check();
            let mut all_pass = true;
            for check in &results {
                let mark = if check.pass { "ok" } else { "FAIL" };
                println!("{mark:>4}  {} ({})", check.name, check.detail);
                all_pass &= check.pass;
            }
            if all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_user_errors_from_numerical_ones() {
        assert_eq!(failure_code(&Error::NonFinite { step: 7, t: 0.5 }), 3);
        assert_eq!(failure_code(&Error::Config("bad".into())), 2);
        assert_eq!(failure_code(&Error::InvalidInput("bad".into())), 2);
    }
}
