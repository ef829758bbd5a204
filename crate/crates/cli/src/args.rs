use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "minimax-lab", version, about = "Numerical laboratory for path-dependent Hamilton-Jacobi equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Shipped preset name (see `presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Artifact directory; defaults to `output.dir` or `out/<name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrates the state equation under constant controls and writes the path.
    SolveEvolution {
        #[command(flatten)]
        common: Common,
        /// Index into P; defaults to the entry closest to zero.
        #[arg(long)]
        p_index: Option<usize>,
        /// Index into Q; defaults to the entry closest to zero.
        #[arg(long)]
        q_index: Option<usize>,
    },
    /// Exhaustive tree value at one state, or a sweep over a bundle.
    Value {
        #[command(flatten)]
        common: Common,
        /// Initial time, a node of the solver grid.
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        /// 0 is the configured initial path; k ≥ 1 is member k−1 of the
        /// certification bundle.
        #[arg(long, default_value_t = 0)]
        state_id: usize,
        /// Values of every bundle member at every control-grid time.
        #[arg(long)]
        sweep: bool,
    },
    /// Guaranteed results of extremal-shift strategies over an ε × |π| ladder.
    Game {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ε values.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Comma-separated numbers of partition intervals. Lists of equal
        /// length are paired; otherwise every combination is run.
        #[arg(long, value_delimiter = ',')]
        partitions: Vec<usize>,
    },
    /// Runs verification suites.
    Verify {
        /// Suite name, or `all` for the suites listed in the config.
        suite: String,
        #[command(flatten)]
        common: Common,
        /// Candidate functional for the minimax suite.
        #[arg(long)]
        candidate: Option<String>,
    },
    /// Prints the JSON schema of the config format.
    Schema {
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lists shipped presets.
    Presets,
    /// Writes the config of a preset as JSON.
    Config {
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
