//! `minimax-lab` command-line runner.
//!
//! Exit status: 0 when every requested assertion passes, 2 for config or
//! name errors, 3 for failed assertions and numerical failures, 1 for I/O.

mod args;
mod artifacts;
mod commands;

use args::{Cli, Command};
use clap::Parser;
use minimax_lab::config::ExperimentConfig;
use minimax_lab::presets::PresetRegistry;
use minimax_lab::{LabError, Result};
use std::process::ExitCode;

/// Worker count for the thread pool.
const WORKERS_ENV: &str = "MMLAB_WORKERS";

fn exit_code(e: &LabError) -> u8 {
    if e.is_schema_error() {
        2
    } else if matches!(e, LabError::Io(_) | LabError::Csv(_)) {
        1
    } else {
        3
    }
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| LabError::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?;
    if n == 0 {
        return Err(LabError::Config(format!("{WORKERS_ENV} must be positive")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| LabError::InvalidArgument(e.to_string()))
}

fn write_or_print(out: Option<&std::path::Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<commands::Status> {
    let done = || commands::Status {
        passed: true,
        lines: Vec::new(),
        error: None,
        dir: None,
    };
    match cli.command {
        Command::SolveEvolution {
            common,
            p_index,
            q_index,
        } => commands::solve_evolution(&common, p_index, q_index),
        Command::Value {
            common,
            t0,
            state_id,
            sweep,
        } => commands::value(&common, t0, state_id, sweep),
        Command::Game {
            common,
            eps,
            partitions,
        } => commands::game(&common, &eps, &partitions),
        Command::Verify {
            suite,
            common,
            candidate,
        } => commands::verify(&common, &suite, candidate),
        Command::Schema { out } => {
            let text = serde_json::to_string_pretty(&ExperimentConfig::schema())? + "\n";
            write_or_print(out.as_deref(), &text)?;
            Ok(done())
        }
        Command::Presets => {
            let reg = PresetRegistry::builtin();
            for name in reg.names() {
                println!("{name:28} {}", reg.get(name)?.summary());
            }
            Ok(done())
        }
        Command::Config { preset, out } => {
            let cfg = PresetRegistry::builtin().config(&preset)?;
            let text = serde_json::to_string_pretty(&cfg)? + "\n";
            write_or_print(out.as_deref(), &text)?;
            Ok(done())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    match run(cli) {
        Ok(status) => {
            for l in &status.lines {
                println!("{l}");
            }
            if let Some(d) = &status.dir {
                println!("artifacts: {}", d.display());
            }
            if let Some(e) = &status.error {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(e));
            }
            if status.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
