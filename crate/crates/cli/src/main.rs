mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use biot_core::experiments::SweepKind;
use clap::{Parser, Subcommand};

use config::{ConfigFile, ConvergeOptions, InfSupOptions, MandelOptions, SweepOptions};
use run::CliError;

/// Fully-mixed Biot poroelasticity experiments.
#[derive(Debug, Parser)]
#[command(name = "biot", version)]
struct Cli {
    /// TOML file with default options; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV and matrix output (default: results).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spatial convergence study for the manufactured solution.
    Converge(ConvergeOptions),
    /// Splitting iteration counts over the storage scaling.
    SweepGamma1(SweepOptions),
    /// Splitting iteration counts over the Lamé scaling.
    SweepGamma2(SweepOptions),
    /// Splitting iteration counts on Mandel's problem over the stiffness scaling.
    SweepGamma3(SweepOptions),
    /// Mandel's problem against the analytical solution.
    Mandel(MandelOptions),
    /// Discrete inf-sup estimates and kernel probes.
    Infsup(InfSupOptions),
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(CliError::Usage)?,
        None => ConfigFile::default(),
    };
    let out_dir = cli.out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from("results"));
    let jobs = run::job_limit()?;
    match cli.command {
        Command::Converge(o) => {
            let path = run::converge(o.or(file.converge), &out_dir, jobs)?;
            println!("wrote {}", path.display());
        }
        Command::SweepGamma1(o) => report_sweep(SweepKind::Gamma1, o.or(file.sweep_gamma1), &out_dir, jobs)?,
        Command::SweepGamma2(o) => report_sweep(SweepKind::Gamma2, o.or(file.sweep_gamma2), &out_dir, jobs)?,
        Command::SweepGamma3(o) => report_sweep(SweepKind::Gamma3, o.or(file.sweep_gamma3), &out_dir, jobs)?,
        Command::Mandel(o) => {
            let (path, avg) = run::mandel(o.or(file.mandel), &out_dir)?;
            println!("wrote {}", path.display());
            if let Some(avg) = avg {
                println!("average iterations per step: {avg}");
            }
        }
        Command::Infsup(o) => {
            let path = run::infsup(o.or(file.infsup), &out_dir, jobs)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn report_sweep(kind: SweepKind, opts: SweepOptions, out_dir: &std::path::Path, jobs: usize) -> Result<(), CliError> {
    let (path, rows) = run::sweep(kind, opts, out_dir, jobs)?;
    for r in &rows {
        println!("{} = {:<8} {:<6} {}", kind.name(), r.point.gamma, r.point.strategy.name(), r.average);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
