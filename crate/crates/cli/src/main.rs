//! `estimands`: command-line driver for the estimand toolkit.

mod commands;
mod figures;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Parser, Debug)]
#[command(name = "estimands", version, about = "Marginal and conditional treatment-effect estimands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute MTE, CTEM and PACTE and their equality matrix.
    Estimands {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        quadrature_nodes: Option<usize>,
    },
    /// Check the equality patterns of the canonical figure parameterizations.
    VerifyFigures {
        /// Figure config to check instead of the shipped ones.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the matrices and a summary CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quadrature_nodes: Option<usize>,
    },
    /// Simulate a trial and write its IPD and published-style summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Population-adjusted anchored comparison from index IPD and a competitor summary.
    Adjust {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quadrature_nodes: Option<usize>,
    },
    /// Run an incompatibility bench scenario.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        quadrature_nodes: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Estimands { common, quadrature_nodes } => {
            commands::estimands(&common.config, &common.out, quadrature_nodes)
        }
        Command::VerifyFigures {
            config,
            out,
            quadrature_nodes,
        } => figures::verify(config.as_deref(), out.as_deref(), quadrature_nodes),
        Command::Simulate { common, seed } => commands::simulate(&common.config, &common.out, seed),
        Command::Adjust {
            common,
            seed,
            quadrature_nodes,
        } => commands::adjust(&common.config, &common.out, seed, quadrature_nodes),
        Command::Bench {
            common,
            seed,
            replications,
            quadrature_nodes,
        } => commands::bench(&common.config, &common.out, seed, replications, quadrature_nodes),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            eprint!("error[E_USAGE]: {}", rendered.strip_prefix("error: ").unwrap_or(&rendered));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error[{}]: {}", failure.code(), failure);
            ExitCode::from(failure.exit_code())
        }
    }
}
