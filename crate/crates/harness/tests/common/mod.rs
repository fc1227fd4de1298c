#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use lvx_core::synthetic::{generate, vectors_jsonl, Fixture, FixtureConfig};
use lvx_harness::{run, Command, RunConfig};

pub const PIPELINE: [Command; 5] = [
    Command::BuildTree,
    Command::Refine,
    Command::Explain,
    Command::Baseline,
    Command::Evaluate,
];

pub fn fixture_config() -> FixtureConfig {
    FixtureConfig {
        t_max: 2,
        ..FixtureConfig::default()
    }
}

/// Writes the fixture and a config into `dir`; returns the config path.
pub fn setup(dir: &Path, fx: &Fixture, extra: &str) -> PathBuf {
    fx.write_to(dir).unwrap();
    fs::write(dir.join("perturbed.jsonl"), vectors_jsonl(&fx.test)).unwrap();
    let cfg = format!(
        r#"seed = 3

[paths]
output_dir = "out"
classes = "classes.txt"
supports = "supports.jsonl"
train = "train.jsonl"
test = "test.jsonl"
perturbed = "perturbed.jsonl"
ground_truth = "ground_truth.jsonl"
transcript = "transcript.jsonl"

[refine]
t_max = {}

[routing]
k = 2
{extra}"#,
        fx.config.t_max
    );
    let path = dir.join("lvx.toml");
    fs::write(&path, cfg).unwrap();
    path
}

pub fn small_fixture() -> Fixture {
    generate(&FixtureConfig {
        test_per_category: 20,
        train_per_node: 5,
        ..fixture_config()
    })
}

pub fn run_all(config: &Path, commands: &[Command]) -> RunConfig {
    let cfg = RunConfig::load(config).unwrap();
    for &c in commands {
        run(c, &cfg).unwrap_or_else(|e| panic!("{}: {e}", c.name()));
    }
    cfg
}
