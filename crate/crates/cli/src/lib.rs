//! Command-line front end for the Tikhonov-Fenichel reduction library.
//!
//! The binary is a thin wrapper around [`run`], which parses arguments,
//! merges them over an optional config file, dispatches to the subcommand
//! implementations in [`commands`], prints the resulting report, and
//! returns the exit code. Keeping everything in the library makes the
//! whole CLI testable in-process.

pub mod commands;
pub mod config;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{EXIT_USAGE, UsageError};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "tfred",
    about = "Tikhonov-Fenichel reductions of singularly perturbed ODE systems",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the built-in example systems.
    List,
    /// Compute the reduced vector field and report decomposition quality.
    Reduce(RunArgs),
    /// Certify the convergence hypotheses for a system.
    Check(RunArgs),
    /// Build and verify a Lyapunov certificate for the reduced flow.
    Lyapunov(RunArgs),
    /// Sweep eps and compare full trajectories against the reduced flow.
    Converge(RunArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// Name of the system to operate on.
    #[arg(long)]
    system: Option<String>,
    /// Plain-text config file; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated eps values, strictly decreasing.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    eps: Option<Vec<f64>>,
    /// Start of the comparison window.
    #[arg(long)]
    tau0: Option<f64>,
    /// End of the integration window.
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Directory for run.cfg, reports, and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for all sampling in this run.
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter override, name=value; repeatable.
    #[arg(long = "set")]
    set: Vec<String>,
    /// Run the sweep even if the condition checks fail.
    #[arg(long)]
    force: bool,
    /// Tail error must stay below this fraction of the sup error.
    #[arg(long = "tail-factor")]
    tail_factor: Option<f64>,
    /// Relative tolerance for the integrators.
    #[arg(long)]
    rtol: Option<f64>,
    /// Absolute tolerance for the integrators.
    #[arg(long)]
    atol: Option<f64>,
    /// Record wall-clock times in the CSV output.
    #[arg(long)]
    timing: bool,
}

fn parse_override(spec: &str) -> Result<(String, f64), UsageError> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| UsageError(format!("--set expects name=value, got '{spec}'")))?;
    let parsed: f64 = value
        .trim()
        .parse()
        .map_err(|_| UsageError(format!("--set {name}: '{value}' is not a number")))?;
    Ok((name.trim().to_string(), parsed))
}

fn build_config(args: &RunArgs) -> Result<RunConfig, UsageError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                UsageError(format!("cannot read config {}: {e}", path.display()))
            })?;
            text.parse::<RunConfig>().map_err(|e| UsageError(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = &args.system {
        cfg.system = s.clone();
    }
    if let Some(eps) = &args.eps {
        cfg.eps_list = eps.clone();
    }
    if let Some(t) = args.tau0 {
        cfg.tau0 = t;
    }
    if let Some(t) = args.t_end {
        cfg.t_end = t;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    for spec in &args.set {
        cfg.overrides.push(parse_override(spec)?);
    }
    if args.force {
        cfg.force = true;
    }
    if let Some(f) = args.tail_factor {
        cfg.tail_factor = f;
    }
    if let Some(r) = args.rtol {
        cfg.rtol = r;
    }
    if let Some(a) = args.atol {
        cfg.atol = a;
    }
    if args.timing {
        cfg.timing = true;
    }
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(cfg)
}

fn dispatch(cmd: &Cmd) -> Result<(i32, String), UsageError> {
    match cmd {
        Cmd::List => Ok(commands::cmd_list()),
        Cmd::Reduce(args) => commands::cmd_reduce(&build_config(args)?),
        Cmd::Check(args) => commands::cmd_check(&build_config(args)?),
        Cmd::Lyapunov(args) => commands::cmd_lyapunov(&build_config(args)?),
        Cmd::Converge(args) => commands::cmd_converge(&build_config(args)?),
    }
}

/// Parse `argv` (including the program name), run the subcommand, print
/// its report to stdout (or the parse error to stderr), and return the
/// process exit code. Never panics: internal panics are caught and
/// reported as exit code 2.
pub fn run(argv: &[&str]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits in clap.
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| dispatch(&cli.cmd)));
    match outcome {
        Ok(Ok((exit, text))) => {
            print!("{text}");
            exit
        }
        Ok(Err(usage)) => {
            eprintln!("error: {usage}");
            EXIT_USAGE
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            eprintln!("internal error: {msg}");
            EXIT_USAGE
        }
    }
}
