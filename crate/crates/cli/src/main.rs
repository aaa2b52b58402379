//! `schatten`: command-line front end for schatten-core.
//!
//! Exit codes: 0 success, 1 validation or numerical failure, 2 usage error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use output::Format;

#[derive(Debug, Parser)]
#[command(name = "schatten", version, about = "Volumes of Schatten class unit balls, Ullman measures and beta-ensemble partition functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Matrix size / number of particles.
    #[arg(long, global = true, default_value_t = 3)]
    pub n: usize,
    /// Schatten exponent: a number >= 1 or "inf". Comma lists are accepted
    /// by `constants` and `density`.
    #[arg(long, global = true, default_value = "2")]
    pub p: String,
    /// Inverse temperature (1 real, 2 complex, 4 quaternion for volumes).
    #[arg(long, global = true, default_value_t = 2.0)]
    pub beta: f64,
    /// Computation route; accepted values depend on the subcommand.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Monte Carlo sample count.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, global = true, env = "SCHATTEN_SEED", default_value_t = 1)]
    pub seed: u64,
    /// n-grid: "start:stop:step" or a comma list.
    #[arg(long, global = true, default_value = "50:400:50")]
    pub grid: String,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Significant digits in printed numbers.
    #[arg(long, global = true, default_value_t = 12)]
    pub digits: usize,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Ullman constants for each p in --p.
    Constants,
    /// Ullman density and cdf on a grid of x in [-1, 1].
    Density {
        /// Number of equally spaced points.
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Log-volume of the self-adjoint Schatten ball (methods: exact, mc-lp, mc-z, quadrature).
    Volume {
        #[arg(long, value_enum, default_value_t = ProposalArg::GeneralizedGaussian)]
        proposal: ProposalArg,
    },
    /// Log partition function (methods: exact, quadrature, mc).
    Partition {
        #[arg(long, value_enum, default_value_t = ProposalArg::GeneralizedGaussian)]
        proposal: ProposalArg,
    },
    /// Minimize the discrete log-energy and compare with the Ullman cdf.
    Equilibrium {
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        /// Finish with damped Newton steps.
        #[arg(long)]
        newton: bool,
    },
    /// Term-by-term asymptotic expansion with residuals on --grid.
    Expansion {
        #[arg(long, value_enum)]
        target: Target,
    },
    /// Run the self-check suite; exit 1 if any check fails.
    Validate {
        #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
        level: LevelArg,
        /// Deliberately corrupt a constant to confirm the suite can fail.
        #[arg(long, value_enum)]
        fault: Option<FaultArg>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalArg {
    GeneralizedGaussian,
    Widened,
    UllmanMixture,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    VolMain1,
    VolMain2,
    ZLs,
    ZCkm,
    Cn,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelArg {
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultArg {
    TamperVp,
}

/// Why a command did not produce a normal result.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    /// The command ran but a check or computation failed; the table, if
    /// any, is still written.
    Failed(String, Option<output::Table>),
}

impl From<schatten_core::Error> for Failure {
    fn from(e: schatten_core::Error) -> Self {
        match e {
            schatten_core::Error::Domain(msg) => Failure::Usage(msg),
            other => Failure::Failed(other.to_string(), None),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match cli.common.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| commands::run(&cli.command, &cli.common)),
            Err(e) => Err(Failure::Usage(format!("cannot start {t} worker threads: {e}"))),
        },
        None => commands::run(&cli.command, &cli.common),
    };
    let (table, failure) = match result {
        Ok(t) => (Some(t), None),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(Failure::Failed(msg, table)) => (table, Some(msg)),
    };
    if let Some(table) = table {
        let config = run_config(&cli);
        let text = match cli.common.format {
            Format::Csv => output::render_csv(&table, &config, cli.common.digits),
            Format::Json => {
                let header = json!({
                    "tool": "schatten",
                    "version": env!("CARGO_PKG_VERSION"),
                    "unix_time": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
                    "elapsed_seconds": started.elapsed().as_secs_f64(),
                });
                output::render_json(&table, &header, &config, cli.common.digits)
            }
        };
        if let Err(e) = output::emit(&text, cli.common.out.as_deref()) {
            eprintln!("error: cannot write output: {e}");
            return ExitCode::from(1);
        }
    }
    match failure {
        Some(msg) => {
            eprintln!("failed: {msg}");
            ExitCode::from(1)
        }
        None => ExitCode::SUCCESS,
    }
}

/// The full configuration, echoed in every output so a run can be
/// repeated exactly. Output location and thread count are left out: they
/// do not change the payload.
fn run_config(cli: &Cli) -> serde_json::Value {
    let mut params = serde_json::to_value(&cli.common).expect("flags serialize");
    if let Some(m) = params.as_object_mut() {
        m.remove("out");
        m.remove("threads");
    }
    json!({
        "command": cli.command,
        "params": params,
    })
}
