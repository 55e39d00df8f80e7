use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use graflow::run::{converge, simulate, verify};
use graflow::{configure_threads, CliError, EXIT_CHECK_FAILED, EXIT_OK};

/// Forced mean curvature flow of graphs: simulate, verify, converge.
#[derive(Parser)]
#[command(name = "graflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario, run its checks and write flow.csv + manifest.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the checks of a scenario on a stored flow dump.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario at h, h/2, ... and write convergence.csv.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    configure_threads(std::env::var("GRAFLOW_THREADS").ok().as_deref())?;
    match cli.command {
        Command::Simulate { config, out } => report(simulate(&config, out.as_deref())?),
        Command::Verify { config, flow, out } => report(verify(&config, &flow, out.as_deref())?),
        Command::Converge { config, levels, out } => {
            let rows = converge(&config, levels, out.as_deref())?;
            println!("{}", graflow::run::CONVERGENCE_HEADER.join(","));
            for row in rows {
                println!("{}", row.to_record().join(","));
            }
            Ok(EXIT_OK)
        }
    }
}

fn report(m: graflow::manifest::RunManifest) -> Result<i32, CliError> {
    for c in &m.checks {
        println!(
            "{:<18} {} measured {:.3e} tolerance {:.3e}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.measured,
            c.tolerance
        );
    }
    Ok(if m.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
