//! Acceptance checks. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lvx_core::embedding::{pair_distance, squared_distance};
use lvx_core::metrics::{mcs, mcs_score, ted, tk_score, tree_kernel, MetricConfig};
use lvx_core::routing::{
    explain_multilabel, MultiLabelPrediction, RoutingConfig, HAS_FINDINGS, NO_FINDINGS,
};
use lvx_core::synthetic::{generate, Fixture, FixtureConfig};
use lvx_core::{AttributeTree, DistanceConfig};
use lvx_harness::commands::load_trees;
use lvx_harness::{run, Command, RunConfig};
use lvx_oracle::{mcs_size_exhaustive, random_tree, relabeled, ted_exhaustive, tree_kernel_direct};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const ALPHABET: &[&str] = &["a", "b", "c", "d"];
const ORACLE_PAIRS: usize = 500;
const ORACLE_MAX_NODES: usize = 6;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const IDENTITY_TREES: usize = 200;
const SCORE_TOL: f64 = 1e-9;
const DISTANCE_TOL: f64 = 1e-6;
const ORDERING_TRIPLES: usize = 10_000;
const MIN_MCS: f64 = 90.0;
const PRUNE_WITHIN: u32 = 2;
const END_TO_END_BUDGET: Duration = Duration::from_secs(120);
const MIN_MSCD_MARGIN: f64 = 0.1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let cfg = MetricConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut mismatches = Vec::new();
    for i in 0..ORACLE_PAIRS {
        let a = random_tree(&mut rng, ORACLE_MAX_NODES, ALPHABET);
        let b = random_tree(&mut rng, ORACLE_MAX_NODES, ALPHABET);
        let ok = ted(&a, &b) == ted_exhaustive(Some(&a), Some(&b))
            && mcs(&a, &b).len() == mcs_size_exhaustive(&a, &b)
            && tree_kernel(&a, &b, &cfg) == tree_kernel_direct(&a, &b, cfg.tk_lambda());
        if !ok {
            mismatches.push(i);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches.is_empty() && elapsed <= ORACLE_BUDGET,
        format!(
            "{ORACLE_PAIRS} pairs (<= {ORACLE_MAX_NODES} nodes), {} mismatch(es) {:?}, {:.2}s of {}s",
            mismatches.len(),
            &mismatches[..mismatches.len().min(5)],
            elapsed.as_secs_f64(),
            ORACLE_BUDGET.as_secs()
        ),
    )
}

fn normalization_identities() -> Verdict {
    let cfg = MetricConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..IDENTITY_TREES {
        let t = random_tree(&mut rng, 10, ALPHABET);
        let other = relabeled(&random_tree(&mut rng, 10, ALPHABET), "z_");
        let m = mcs_score(&t, &t);
        let k = tk_score(&t, &t, &cfg);
        worst = worst.max((m - 100.0).abs()).max((k - 100.0).abs());
        let disjoint = mcs_score(&t, &other) == 0.0 && tk_score(&t, &other, &cfg) == 0.0;
        if ted(&t, &t) != 0
            || (m - 100.0).abs() > SCORE_TOL
            || (k - 100.0).abs() > SCORE_TOL
            || !disjoint
        {
            failures += 1;
        }
    }
    verdict(
        failures == 0,
        format!("{IDENTITY_TREES} trees, {failures} failure(s), max self-score deviation {worst:e} (tol {SCORE_TOL:e})"),
    )
}

fn distance_contract() -> Verdict {
    let d = DistanceConfig::default();
    let eps = d.epsilon();
    let mut worst = 0.0f64;
    for s in [0.0f64, 1.0, 1e12] {
        // squared distance s along the first axis
        let q = [s.sqrt(), 0.0];
        let got = pair_distance(&q, &[0.0, 0.0], &d).unwrap();
        let expected = -((s + 1.0) / (s + eps)).ln();
        worst = worst.max((got - expected).abs());
    }
    let anchors = [
        (0.0f64, -13.815_510_557_964_274),
        (1.0, -0.693_146_180_559_945),
        (1e12, 0.0),
    ];
    for (s, value) in anchors {
        let got = pair_distance(&[s.sqrt()], &[0.0], &d).unwrap();
        worst = worst.max((got - value).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xd157);
    let mut disagreements = 0;
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..8).map(|_| rng.random_range(-3.0..3.0)).collect()
    };
    for _ in 0..ORDERING_TRIPLES {
        let (q, a, b) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let raw = squared_distance(&q, &a)
            .unwrap()
            .partial_cmp(&squared_distance(&q, &b).unwrap());
        let log = pair_distance(&q, &a, &d)
            .unwrap()
            .partial_cmp(&pair_distance(&q, &b, &d).unwrap());
        if raw != log {
            disagreements += 1;
        }
    }
    verdict(
        worst <= DISTANCE_TOL && disagreements == 0,
        format!(
            "closed-form max error {worst:e} (tol {DISTANCE_TOL:e}); {disagreements} ordering disagreement(s) in {ORDERING_TRIPLES} triples"
        ),
    )
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct Run {
    config: RunConfig,
    end_to_end: Duration,
}

fn pipeline(dir: &Path, fx: &Fixture) -> Run {
    let path = common::setup(dir, fx, "");
    let config = RunConfig::load(&path).unwrap();
    let start = Instant::now();
    for c in common::PIPELINE {
        run(c, &config).unwrap_or_else(|e| panic!("{}: {e}", c.name()));
    }
    Run {
        end_to_end: start.elapsed(),
        config,
    }
}

fn stability_clean(cfg: &RunConfig) -> Verdict {
    if let Err(e) = run(Command::Stability, cfg) {
        return verdict(false, format!("stability failed: {e}"));
    }
    let out = &cfg.paths.output_dir;
    let summary = read_json(&out.join("stability.json"));
    let csv = fs::read_to_string(out.join("stability.csv")).unwrap();
    let rows_exact = csv.lines().skip(1).all(|l| l.ends_with(",100,100"));
    let (m, t) = (
        summary["mcs"].as_f64().unwrap(),
        summary["tk"].as_f64().unwrap(),
    );
    verdict(
        m == 100.0 && t == 100.0 && rows_exact,
        format!(
            "{} samples, mean MCS {m}, mean TK {t}, every row 100/100: {rows_exact}",
            summary["samples"]
        ),
    )
}

fn method_summaries(cfg: &RunConfig) -> BTreeMap<String, Value> {
    let report = read_json(&cfg.paths.output_dir.join("report.json"));
    report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| (m["method"].as_str().unwrap().to_string(), m.clone()))
        .collect()
}

fn end_to_end(run_a: &Run, fx: &Fixture) -> Verdict {
    let s = method_summaries(&run_a.config);
    let mcs_of = |m: &str| s[m]["mcs"].as_f64().unwrap();
    let (lvx, random, constant) = (mcs_of("lvx"), mcs_of("random"), mcs_of("constant"));
    let refined = load_trees(&run_a.config.refined_trees_dir()).unwrap();
    let survivors: usize = fx
        .spurious
        .iter()
        .map(|(c, labels)| {
            labels
                .iter()
                .filter(|l| refined[c].find_label(l).is_some())
                .count()
        })
        .sum();
    let planted: usize = fx.spurious.values().map(Vec::len).sum();
    let t_max = run_a.config.refine.t_max;
    let pass = lvx >= MIN_MCS
        && lvx > random
        && lvx > constant
        && survivors == 0
        && t_max <= PRUNE_WITHIN
        && run_a.end_to_end <= END_TO_END_BUDGET;
    verdict(
        pass,
        format!(
            "MCS lvx {lvx:.2} (>= {MIN_MCS}), random {random:.2}, constant {constant:.2}; \
             {survivors}/{planted} spurious nodes left after {t_max} iteration(s); {:.2}s of {}s",
            run_a.end_to_end.as_secs_f64(),
            END_TO_END_BUDGET.as_secs()
        ),
    )
}

fn faithfulness(run_a: &Run) -> Verdict {
    let s = method_summaries(&run_a.config);
    let (lvx, random) = (s["lvx"]["mscd"].as_f64(), s["random"]["mscd"].as_f64());
    match (lvx, random) {
        (Some(l), Some(r)) => verdict(
            r - l >= MIN_MSCD_MARGIN,
            format!(
                "MSCD lvx {l:.4}, random {r:.4}, margin {:.4} (>= {MIN_MSCD_MARGIN})",
                r - l
            ),
        ),
        _ => verdict(false, "MSCD missing from report"),
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(a: &Run, b: &Run) -> Verdict {
    let (ra, rb) = (&a.config.paths.output_dir, &b.config.paths.output_dir);
    let fa = files_under(ra);
    let fb = files_under(rb);
    if fa != fb {
        return verdict(false, format!("output file sets differ: {fa:?} vs {fb:?}"));
    }
    let differing: Vec<String> = fa
        .iter()
        .filter(|p| fs::read(ra.join(p)).unwrap() != fs::read(rb.join(p)).unwrap())
        .map(|p| p.display().to_string())
        .collect();
    let trees = fa.iter().filter(|p| p.starts_with("trees")).count();
    let reports = fa
        .iter()
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv" || e == "json") && !p.starts_with("trees")
        })
        .count();
    verdict(
        differing.is_empty() && trees > 0 && reports > 0,
        format!(
            "{} files compared byte for byte ({trees} tree files, {reports} reports and manifests); differing {differing:?}",
            fa.len()
        ),
    )
}

fn multilabel(fx: &Fixture) -> Verdict {
    let findings: Vec<AttributeTree> = fx.ground_truth.values().cloned().collect();
    let names: Vec<String> = fx.ground_truth.keys().cloned().collect();
    let route = RoutingConfig::new(2).unwrap();
    let dist = DistanceConfig::default();
    let n = findings.len();
    let mut failures = Vec::new();
    for q in fx.test.iter().take(10) {
        for mask in 0..(1u32 << n) {
            let bits: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
            let e = explain_multilabel(
                &q.vector,
                &MultiLabelPrediction::from_bits(&bits),
                &findings,
                &fx.store,
                &route,
                &dist,
            )
            .unwrap();
            let t = &e.tree;
            let ok = if mask == 0 {
                t.len() == 1 && t.category() == NO_FINDINGS
            } else {
                let children: Vec<&str> = t
                    .children(t.root())
                    .iter()
                    .map(|&c| t.label(c).unwrap())
                    .collect();
                let expected: Vec<&str> = (0..n)
                    .filter(|i| bits[*i] == 1)
                    .map(|i| names[i].as_str())
                    .collect();
                t.category() == HAS_FINDINGS && children == expected
            };
            if !ok {
                failures.push(format!("{}:{mask:04b}", q.id));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{} flag patterns x 10 samples, {} failure(s) {failures:?}",
            1u32 << n,
            failures.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Verdict)> = vec![
        ("metric oracle equivalence", oracle_equivalence()),
        ("normalization identities", normalization_identities()),
        ("distance contract", distance_contract()),
    ];

    let fx = generate(&FixtureConfig {
        t_max: PRUNE_WITHIN,
        ..FixtureConfig::default()
    });
    let (dir_a, dir_b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run_a = pipeline(dir_a.path(), &fx);
    let run_b = pipeline(dir_b.path(), &fx);

    results.push(("synthetic end-to-end recovery", end_to_end(&run_a, &fx)));
    results.push(("faithfulness direction", faithfulness(&run_a)));
    results.push(("determinism", determinism(&run_a, &run_b)));
    results.push((
        "stability with clean inputs",
        stability_clean(&run_a.config),
    ));
    results.push(("multi-label composition", multilabel(&fx)));

    for (name, v) in &results {
        println!(
            "{} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    let failed = results.iter().filter(|(_, v)| !v.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
