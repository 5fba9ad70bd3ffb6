//! `recipstat`: moment generating function of `Σ 1/x_j` for the Laguerre
//! unitary ensemble, its recurrence and Painlevé data, and the identity
//! suites that cross-check them.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails,
//! 2 on a configuration error, 3 on a numerical failure that survived one
//! retry at doubled precision.

mod commands;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{run, CliError};
use crate::output::{to_json, write_csv};

#[derive(Parser, Debug)]
#[command(name = "recipstat", version, about = "Reciprocal linear statistic of the Laguerre unitary ensemble")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// D_n(s)/D_n(0) from the Hankel determinant.
    Mgf(Common),
    /// Recurrence coefficients α_n, β_n and norms h_n.
    Recurrence(Common),
    /// Auxiliary a_n, b_n from the moments, checked against the hierarchy.
    Aux(Common),
    /// a_n(s) from the Painlevé III initial-value problem.
    Painleve(Common),
    /// One identity suite over the grid.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Lax coefficients and their compatibility checks.
    Lax(Common),
    /// Monte Carlo estimate of the MGF.
    Mc(Common),
    /// Hamiltonian forms and the τ-function relation.
    Tau(Common),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Residue,
    Toda,
    Sigma,
    Lax,
    Tau,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Exponent of the weight, as a decimal literal.
    #[arg(long)]
    pub alpha: String,
    #[arg(long, conflicts_with = "s_grid")]
    pub s: Option<String>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Option<Vec<String>>,
    #[arg(long, env = "RECIPSTAT_PREC_BITS", default_value_t = 256)]
    pub prec_bits: u32,
    /// Tolerance for the checks (each suite has its own default).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Relative tolerance handed to the ODE solver.
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, suite, common) = match cli.command {
        Command::Mgf(c) => ("mgf", None, c),
        Command::Recurrence(c) => ("recurrence", None, c),
        Command::Aux(c) => ("aux", None, c),
        Command::Painleve(c) => ("painleve", None, c),
        Command::Verify { suite, common } => ("verify", Some(suite), common),
        Command::Lax(c) => ("lax", None, c),
        Command::Mc(c) => ("mc", None, c),
        Command::Tau(c) => ("tau", None, c),
    };
    let rows = match run(name, suite, &common) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("recipstat: {e}");
            return ExitCode::from(match e {
                CliError::Config(_) => 2,
                CliError::Numeric(_) => 3,
            });
        }
    };
    let sink: io::Result<Box<dyn Write>> = match &common.output {
        Some(path) => File::create(path).map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>),
        None => Ok(Box::new(io::stdout().lock())),
    };
    let written = sink.and_then(|mut out| {
        match common.format {
            Format::Csv => write_csv(&rows, common.prec_bits, &mut out).map_err(io::Error::other)?,
            Format::Json => {
                serde_json::to_writer_pretty(&mut out, &to_json(name, &rows, common.prec_bits))?;
                writeln!(out)?;
            }
        }
        out.flush()
    });
    if let Err(e) = written {
        eprintln!("recipstat: cannot write output: {e}");
        return ExitCode::from(2);
    }
    if rows.iter().any(|r| r.pass == Some(false)) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
