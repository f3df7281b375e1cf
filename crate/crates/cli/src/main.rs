//! Batch front end for the cache-and-multicast analysis toolkit: config
//! ingestion, single-point analysis and simulation, parameter sweeps, and
//! bundled experiment presets, all persisted as self-describing CSV.

// Validation guards are written as `!(x > 0.0)` so that NaN fails them; the
// de-negated `x <= 0.0` the lint suggests would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod csvout;
mod presets;
mod runner;
mod spec;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use spec::{Mode, RawSpec};

#[derive(Parser)]
#[command(
    name = "cachecast",
    version,
    about = "Success probability of randomized caching with multicast delivery \
             in Poisson cellular networks",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Experiment description (JSON). Required for analyze/optimize/simulate/
    /// sweep; for reproduce it is an optional override merged onto the preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Random seed recorded in output headers (overrides the config).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Directory artifacts are written into.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Full-fidelity Monte Carlo: 4e6 realizations on a window of side 260
    /// (the desk-scale default is 1e5 on side 100).
    #[arg(long, global = true)]
    paper_fidelity: bool,

    /// Number of worker threads (default: one per CPU core).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a caching policy's success probability analytically.
    Analyze,
    /// Solve for a caching distribution; writes it with its evaluation.
    Optimize,
    /// Estimate a policy's success probability by Monte Carlo.
    Simulate,
    /// Evaluate a policy across a grid of one network parameter.
    Sweep,
    /// Run a bundled experiment preset (one CSV per panel).
    Reproduce {
        /// Which experiment to rebuild.
        #[arg(value_enum)]
        target: presets::Target,
    },
}

/// Failure modes with distinct exit codes: invalid configuration (2, with
/// the complete violation list) vs. runtime failure (1).
enum Failure {
    Config(Vec<String>),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: applying --jobs {n}: {e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(errs)) => {
            eprintln!(
                "configuration is invalid ({} problem{}):",
                errs.len(),
                if errs.len() == 1 { "" } else { "s" }
            );
            for e in &errs {
                eprintln!("  - {e}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let mode = match &cli.cmd {
        Cmd::Analyze => Mode::Analyze,
        Cmd::Optimize => Mode::Optimize,
        Cmd::Simulate => Mode::Simulate,
        Cmd::Sweep => Mode::Sweep,
        Cmd::Reproduce { .. } => Mode::Reproduce,
    };

    let raw: RawSpec = match &cli.cmd {
        Cmd::Reproduce { target } => {
            let mut doc = presets::base_spec(*target);
            if let Some(path) = &cli.config {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                // Shape-check the override on its own (unknown fields, wrong
                // types) before merging, so errors point at the user's file.
                spec::parse(&text).map_err(|e| Failure::Config(vec![e]))?;
                let patch: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| Failure::Config(vec![format!("config parse error: {e}")]))?;
                spec::merge(&mut doc, &patch);
            }
            serde_json::from_value(doc)
                .map_err(|e| Failure::Config(vec![format!("config parse error: {e}")]))?
        }
        _ => {
            let path = cli.config.as_ref().ok_or_else(|| {
                Failure::Config(vec![format!(
                    "--config <path> is required for '{}'",
                    mode.name()
                )])
            })?;
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            spec::parse(&text).map_err(|e| Failure::Config(vec![e]))?
        }
    };

    let mut resolved = spec::validate(&raw, mode).map_err(Failure::Config)?;
    if cli.paper_fidelity {
        resolved.sim.realizations = spec::PAPER_REALIZATIONS;
        resolved.sim.window_side = spec::PAPER_WINDOW_SIDE;
    }
    if let Some(seed) = cli.seed {
        resolved.sim.seed = seed;
    }

    fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;
    match &cli.cmd {
        Cmd::Reproduce { target } => presets::run(*target, &resolved, &cli.out)?,
        _ => runner::run(&resolved, &cli.out)?,
    }
    Ok(())
}
