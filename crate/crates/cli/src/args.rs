use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Risk-bounded policy synthesis for temporal-logic driving tasks.
#[derive(Debug, Clone, Parser)]
#[command(name = "riskplan", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// A full invocation. Manifests store it so `replay` can run it again.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Build the product MDP and solve the occupation-measure LP.
    Synthesize(SynthesizeArgs),
    /// Compare a policy's LP values with exact evaluation and rollouts.
    Evaluate(EvaluateArgs),
    /// Run the closed-loop vehicle simulation under a policy.
    Simulate(SimulateArgs),
    /// Write per-cell occupation mass as plot-ready CSV.
    ExportRiskField(ExportArgs),
    /// Write a built-in scenario to a file.
    Generate(GenerateArgs),
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Risk threshold; overrides the scenario value.
    #[arg(long, conflicts_with = "rth_grid")]
    pub rth: Option<f64>,
    /// Solve once per threshold, each into its own subdirectory.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(default)]
    pub rth_grid: Vec<f64>,
    /// Use the scenario's bundled threshold grid.
    #[arg(long, conflicts_with_all = ["rth", "rth_grid"])]
    #[serde(default)]
    pub scenario_grid: bool,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Allow threshold violations at a penalty instead of failing.
    #[arg(long)]
    #[serde(default)]
    pub relaxed: bool,
    /// `builtin` or `external:<command>`.
    #[arg(long, default_value = "builtin")]
    pub solver: String,
    /// Also write the product, both automata and the LP.
    #[arg(long)]
    #[serde(default)]
    pub dump_product: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Monte-Carlo trajectories; 0 reports the exact evaluation only.
    #[arg(long, default_value_t = 0)]
    pub rollouts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `metrics.json`; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Abstract steps; defaults to the scenario value.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Switch off the process noise.
    #[arg(long)]
    #[serde(default)]
    pub zero_noise: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Toml,
    Json,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Scenario name, or `all`.
    pub name: String,
    #[arg(long, value_enum, default_value = "toml")]
    pub format: FileFormat,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Where to write the re-run; defaults to `replay/` next to the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    /// Same invocation with its output directory replaced.
    pub fn with_out(&self, out: PathBuf) -> Command {
        let mut c = self.clone();
        match &mut c {
            Command::Synthesize(a) => a.out = out,
            Command::Evaluate(a) => a.out = Some(out),
            Command::Simulate(a) => a.out = out,
            Command::ExportRiskField(a) => a.out = out,
            Command::Generate(a) => a.out = out,
            Command::Replay(a) => a.out = Some(out),
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn threshold_grid_splits_on_commas() {
        let cli = Cli::try_parse_from(["riskplan", "synthesize", "--scenario", "s.toml", "--rth-grid", "0.1,1,5"]).unwrap();
        let Command::Synthesize(a) = cli.command else { panic!() };
        assert_eq!(a.rth_grid, vec![0.1, 1.0, 5.0]);
        assert_eq!(a.solver, "builtin");
        assert_eq!(a.out, PathBuf::from("."));
    }

    #[test]
    fn with_out_only_touches_the_output() {
        let cli = Cli::try_parse_from(["riskplan", "simulate", "--policy", "p.json", "--scenario", "s.toml", "--seed", "4"]).unwrap();
        let moved = cli.command.with_out(PathBuf::from("elsewhere"));
        let Command::Simulate(a) = moved else { panic!() };
        assert_eq!((a.seed, a.out), (4, PathBuf::from("elsewhere")));
        assert_eq!(a.policy, PathBuf::from("p.json"));
    }
}
