//! Batch front-end for the game-option lattice.
//!
//! Every command reads one JSON config (file path or inline document),
//! applies flag overrides, prints a JSON result on standard output with the
//! effective config echoed under `"config"`, and writes CSV artifacts into
//! the output directory. A one-line summary goes to standard error.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 numerical
//! or runtime failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gamelattice::Execution;
use serde_json::Value;

use crate::commands::Context;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "gamelattice",
    version,
    about = "Game option pricing on recombining trinomial trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Lattice value of the configured payoff.
    Price,
    /// Buyer and seller stopping regions as CSV.
    Region,
    /// Sweep over s0_list × n_list.
    Converge,
    /// Path-level statistics of one embedding step.
    VerifyEmbedding,
    /// Monte Carlo value of the lattice stop rules.
    McValue,
    /// Brute-force Dynkin game value on a tree with n <= 3.
    Oracle,
}

#[derive(Args)]
struct Common {
    /// Config file path or inline JSON document.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Directory for CSV artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker thread cap; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config initial spot.
    #[arg(long, global = true)]
    s0: Option<f64>,
    /// Overrides the config step count.
    #[arg(long, global = true)]
    n: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command, &cli.common) {
        Ok((doc, summary)) => {
            println!("{}", serde_json::to_string_pretty(&doc).expect("JSON output"));
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command, common: &Common) -> Result<(Value, String), CliError> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(s0) = common.s0 {
        config.s0 = s0;
    }
    if let Some(n) = common.n {
        config.n = n;
    }
    config.validate()?;
    let execution = configure_threads(common.threads)?;
    let mut ctx = Context {
        config,
        out: common.out.clone(),
        execution,
    };
    let doc = match command {
        Command::Price => commands::price(&ctx)?,
        Command::Region => commands::region(&ctx)?,
        Command::Converge => commands::converge(&mut ctx)?,
        Command::VerifyEmbedding => commands::verify_embedding(&mut ctx)?,
        Command::McValue => commands::mc_value(&mut ctx)?,
        Command::Oracle => commands::oracle(&ctx)?,
    };
    let summary = summarize(command, &doc);
    Ok((doc, summary))
}

fn configure_threads(threads: Option<usize>) -> Result<Execution, CliError> {
    match threads {
        None => Ok(Execution::Parallel),
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        Some(t) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))?;
            #[cfg(not(feature = "parallel"))]
            let _ = t;
            Ok(Execution::Parallel)
        }
    }
}

/// Six significant digits for human-readable output.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let decimals = (5 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn num(doc: &Value, key: &str) -> String {
    doc[key].as_f64().map_or_else(|| "-".to_string(), sig6)
}

fn summarize(command: Command, doc: &Value) -> String {
    match command {
        Command::Price => format!(
            "price: V = {} (n = {}, {} ms)",
            num(doc, "value"),
            doc["n"],
            num(doc, "wall_time_ms")
        ),
        Command::Region => format!(
            "region: V = {}; seller last active at t = {}, buyer region written",
            num(doc, "value"),
            doc["seller"]["last_active_time"]
                .as_f64()
                .map_or_else(|| "never".to_string(), sig6)
        ),
        Command::Converge => format!("converge: {} cells", doc["rows"].as_array().map_or(0, Vec::len)),
        Command::VerifyEmbedding => format!(
            "verify-embedding: up {} mid {} down {}, mean step {} years, max z-score {}",
            num(&doc["freq_up"], "mean"),
            num(&doc["freq_mid"], "mean"),
            num(&doc["freq_down"], "mean"),
            num(&doc["mean_duration"], "mean"),
            num(doc, "max_z_score")
        ),
        Command::McValue => format!(
            "mc-value: mean {} ± {} (lattice {})",
            num(doc, "mean"),
            num(doc, "std_error"),
            num(doc, "lattice_value")
        ),
        Command::Oracle => format!(
            "oracle: solver {} inf-sup {} sup-inf {}",
            num(doc, "solver_value"),
            num(doc, "oracle_infsup"),
            num(doc, "oracle_supinf")
        ),
    }
}
