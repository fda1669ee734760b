//! Command-line front end: simulate a configured run, re-certify a ledger,
//! run the verification suites and draw norm-versus-bound figures.
//!
//! Exit status is 0 on success, 1 when a verification fails or a run aborts,
//! and 2 on a usage or configuration error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod plot;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "peq", version, about = "Primitive-equations ocean solver with energy-bound monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a configured run, writing the ledger, snapshots and a config copy.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-evaluate every monitored inequality along a ledger.
    Certify {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Calibrate the qualitative multipliers on this ledger instead of using the configured ones.
        #[arg(long)]
        calibrate: bool,
        /// Also write the report as CSV rows to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Draw norm-versus-bound figures from a ledger.
    Plot {
        #[arg(long)]
        ledger: PathBuf,
        /// Directory receiving the PNG files.
        #[arg(long)]
        out: PathBuf,
        /// Run configuration, needed for the temperature decay envelope figure.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum Suite {
    /// Manufactured-solution convergence study on levels 16, 32, 64, ...
    Mms {
        /// Number of grid levels (at least 3).
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = Profile::Steady)]
        profile: Profile,
    },
    /// Compare every linear operator against its dense-matrix assembly.
    Oracle {
        /// Cells per direction; may be repeated. Defaults to 4 and 6.
        #[arg(long = "n")]
        sizes: Vec<usize>,
    },
    /// Twin-run continuous-dependence experiment.
    Twin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Also write the time series of the `eps` run as CSV to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Profile {
    Steady,
    Oscillating,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration.
    Usage(String),
    /// A verification did not pass, or a computation aborted.
    Failed(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Failed(_) => EXIT_FAILED,
        }
    }
}

impl From<peq_core::Error> for Failure {
    fn from(e: peq_core::Error) -> Self {
        match e {
            peq_core::Error::Config(_) | peq_core::Error::Parse { .. } => Failure::Usage(e.to_string()),
            other => Failure::Failed(other.to_string()),
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Run { config, out } => commands::run(&config, out.as_deref()),
        Command::Certify { ledger, config, calibrate, csv } => commands::certify(&ledger, &config, calibrate, csv.as_deref()),
        Command::Verify { suite } => match suite {
            Suite::Mms { levels, profile } => commands::verify_mms(levels, profile == Profile::Oscillating),
            Suite::Oracle { sizes } => commands::verify_oracle(&sizes),
            Suite::Twin { config, eps, csv } => commands::verify_twin(&config, eps, csv.as_deref()),
        },
        Command::Plot { ledger, out, config } => commands::plot(&ledger, &out, config.as_deref()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Failed(m) => eprintln!("failed: {m}"),
            }
            f.exit_code()
        }
    }
}
