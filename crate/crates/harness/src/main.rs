use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lvx_harness::{run, Command, HarnessError, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "lvx",
    version,
    about = "Concept-tree explanations for vision-model embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Ask the language model for an initial tree per class.
    BuildTree(Common),
    /// Prune and grow the initial trees against training embeddings.
    Refine(Common),
    /// Route test embeddings through the refined trees.
    Explain(Common),
    /// Write Random, Constant and Subtree explanations.
    Baseline(Common),
    /// Score explanations against ground-truth trees.
    Evaluate(Common),
    /// Compare explanations of clean and perturbed embeddings.
    Stability(Common),
    /// Render explanations as Graphviz DOT files.
    ExportDot(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Number of nodes selected per explanation.
    #[arg(long)]
    k: Option<usize>,
    /// Refinement rounds.
    #[arg(long)]
    t_max: Option<u32>,
    /// Stabilizer of the log-ratio distance.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replay this transcript instead of calling a model.
    #[arg(long)]
    replay: Option<PathBuf>,
}

fn execute(cli: Cli) -> Result<String, HarnessError> {
    let (command, common) = match cli.command {
        Sub::BuildTree(c) => (Command::BuildTree, c),
        Sub::Refine(c) => (Command::Refine, c),
        Sub::Explain(c) => (Command::Explain, c),
        Sub::Baseline(c) => (Command::Baseline, c),
        Sub::Evaluate(c) => (Command::Evaluate, c),
        Sub::Stability(c) => (Command::Stability, c),
        Sub::ExportDot(c) => (Command::ExportDot, c),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply(&Overrides {
        k: common.k,
        t_max: common.t_max,
        epsilon: common.epsilon,
        seed: common.seed,
        replay: common.replay,
    });
    let outcome = run(command, &cfg)?;
    Ok(format!(
        "{}: {} (manifest {})",
        command.name(),
        outcome.summary,
        outcome.manifest.display()
    ))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
