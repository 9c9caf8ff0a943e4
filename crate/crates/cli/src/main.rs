use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use surrogate_mcmc::config::parse_config;
use surrogate_mcmc::runner::{compare_dirs, run_scenario, summarize_dir, RunOptions};
use surrogate_mcmc::RunError;

/// Adaptive surrogate-based Bayesian inversion for groundwater source identification.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML or JSON config (`-` reads stdin).
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: runs/<scenario>-<method>-<seed>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue an interrupted adaptive run in `--out`.
        #[arg(long)]
        resume: bool,
        /// Use the full-resolution grid.
        #[arg(long)]
        full_grid: bool,
        /// Use the long iteration counts.
        #[arg(long)]
        long: bool,
    },
    /// Recompute posterior_summary.json and densities.csv of a run.
    Summarize { dir: PathBuf },
    /// Compare run B against reference run A.
    Compare { a: PathBuf, b: PathBuf },
}

fn run(cmd: Command) -> Result<serde_json::Value, RunError> {
    match cmd {
        Command::Run { config, seed, out, resume, full_grid, long } => {
            let mut cfg = parse_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.full_grid |= full_grid;
            cfg.long |= long;
            let out = out.unwrap_or_else(|| {
                Path::new("runs").join(format!("{}-{}-{}", cfg.scenario.as_str(), cfg.method, cfg.seed))
            });
            let report = run_scenario(&cfg, &RunOptions { out, resume })?;
            Ok(json!({
                "status": "complete",
                "out": report.out,
                "high_fidelity_calls": report.metadata.high_fidelity_calls,
                "summary": report.summary,
            }))
        }
        Command::Summarize { dir } => Ok(serde_json::to_value(summarize_dir(&dir)?.0).expect("summaries serialise")),
        Command::Compare { a, b } => Ok(json!({ "params": compare_dirs(&a, &b)? })),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json values serialise"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
