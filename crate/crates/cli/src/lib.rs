//! Command-line driver: problem loading, certificate checks, multiplier
//! search, the grid oracle, derivative tables and property probes.
//!
//! Every report is a human-readable table followed by a `key=value` block.

mod commands;
mod report;

use std::ffi::OsString;

use clap::{Args, Parser, Subcommand};

pub use report::{parse_kv, Report};

/// Exit code of a certified check, a found search, or an oracle run where every class holds.
pub const EXIT_OK: i32 = 0;
/// Usage, parse and shape errors.
pub const EXIT_USAGE: i32 = 1;
/// Certificate violated or a Pareto class refuted.
pub const EXIT_VIOLATED: i32 = 2;
/// Certificate inequalities hold but a convexity hypothesis failed on samples.
pub const EXIT_UNVERIFIED: i32 = 3;
/// Search found no multipliers.
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ivkkt", version, about = "KKT certificates for interval-valued multiobjective problems on Hadamard manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify a certificate at a candidate point.
    Check(CheckArgs),
    /// Search for multipliers that certify a candidate.
    Search(SearchArgs),
    /// Classify a candidate against the six Pareto notions on a grid.
    Oracle(OracleArgs),
    /// Directional derivatives at the candidate toward target points.
    Derivs(DerivsArgs),
    /// Convexity and pseudo-convexity probes for every function.
    Props(PropsArgs),
    /// List the built-in problems.
    List,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Built-in problem name or path to a problem file.
    #[arg(long)]
    pub problem: String,
    /// Candidate point, e.g. "(1,1)" or "sym[1,0,1]"; defaults to the file's candidate.
    #[arg(long)]
    pub candidate: Option<String>,
    #[arg(long, default_value_t = ivkkt::kkt::DEFAULT_SEED)]
    pub seed: u64,
    /// Overrides the sample box, e.g. "0.5:1.5,0.5:1.5".
    #[arg(long = "box")]
    pub sample_box: Option<String>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, default_value_t = ivkkt::kkt::DEFAULT_PROBES)]
    pub probes: usize,
    /// Probe sources: `feasible` or `box`; defaults to the problem's setting.
    #[arg(long)]
    pub scope: Option<String>,
    #[arg(long, default_value_t = ivkkt::kkt::INEQ_TOL)]
    pub tol: f64,
    /// α values per pair in hypothesis convexity probes.
    #[arg(long, default_value_t = 9)]
    pub alphas: usize,
    /// Skip the convexity and pseudo-convexity hypothesis probes.
    #[arg(long)]
    pub no_hypotheses: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub probe: ProbeArgs,
    /// Theorem tag; selects the problem file's certificate for it.
    #[arg(long)]
    pub theorem: Option<String>,
    /// Certificate text, e.g. "theorem=T32a lamL=1,1 lamU=1,1 mu=1,7,0,0,4.5".
    #[arg(long)]
    pub cert: Option<String>,
    /// Print per-probe gH condition intervals.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub probe: ProbeArgs,
    #[arg(long)]
    pub theorem: String,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid points per axis.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Comma-separated: `lu`, `cw`, or class names such as `type-I`, `strong-II`.
    #[arg(long, default_value = "lu,cw")]
    pub classes: String,
    /// Shift the grid by a seeded random fraction of a step.
    #[arg(long)]
    pub jitter: bool,
}

#[derive(Debug, Args)]
pub struct DerivsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Target point; repeatable.
    #[arg(long)]
    pub target: Vec<String>,
    /// Number of random targets drawn from the sample box.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
}

#[derive(Debug, Args)]
pub struct PropsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Point pairs for convexity probes.
    #[arg(long, default_value_t = 200)]
    pub pairs: usize,
    #[arg(long, default_value_t = 9)]
    pub alphas: usize,
    /// Sample points for pseudo-convexity probes at the candidate.
    #[arg(long, default_value_t = ivkkt::kkt::DEFAULT_PROBES)]
    pub probes: usize,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn report(code: i32, report: Report) -> Self {
        Self {
            code,
            stdout: report.render(),
            stderr: String::new(),
        }
    }

    fn error(err: anyhow::Error) -> Self {
        Self {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {err:#}\n"),
        }
    }
}

/// Parses arguments (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Check(a) => commands::check(a),
        Command::Search(a) => commands::search(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Derivs(a) => commands::derivs(a),
        Command::Props(a) => commands::props(a),
        Command::List => Ok((EXIT_OK, commands::list())),
    };
    match result {
        Ok((code, report)) => Outcome::report(code, report),
        Err(e) => Outcome::error(e),
    }
}
