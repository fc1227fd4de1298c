mod common;

use std::fs;
use std::process::Command as Process;

use common::{run_all, setup, small_fixture, PIPELINE};
use lvx_core::llm::Transcript;
use lvx_core::routing::ExplanationRecord;
use lvx_core::synthetic::vectors_jsonl;
use lvx_core::tree::parse_tree;
use lvx_core::EmbeddingVector;
use lvx_harness::commands::load_records;
use lvx_harness::{run, Command, ErrorKind, RunConfig};

fn lvx(args: &[&str]) -> (i32, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_lvx"))
        .args(args)
        .output()
        .unwrap();
    let text =
        String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

#[test]
fn build_tree_writes_one_file_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let fx = small_fixture();
    let cfg = run_all(&setup(dir.path(), &fx, ""), &[Command::BuildTree]);
    let files = fs::read_dir(cfg.initial_trees_dir()).unwrap().count();
    assert_eq!(files, 4);
    let heron =
        parse_tree(&fs::read_to_string(cfg.initial_trees_dir().join("heron.json")).unwrap())
            .unwrap();
    assert!(heron.same_structure(&fx.initial["heron"]));
    assert!(heron
        .nodes()
        .filter(|n| n.id != heron.root())
        .all(|n| n.support.len() == 10));
    assert!(cfg
        .paths
        .output_dir
        .join("manifests/build-tree.json")
        .exists());
}

#[test]
fn missing_replay_key_names_the_class() {
    let dir = tempfile::tempdir().unwrap();
    let fx = small_fixture();
    let config = setup(dir.path(), &fx, "");
    fs::write(dir.path().join("classes.txt"), "heron\nwombat\n").unwrap();
    let cfg = RunConfig::load(&config).unwrap();
    let err = run(Command::BuildTree, &cfg).unwrap_err();
    assert_eq!(err.kind, ErrorKind::Llm);
    assert!(err.message.contains("wombat"), "{}", err.message);
    let (code, text) = lvx(&["build-tree", "--config", config.to_str().unwrap()]);
    assert_eq!(code, 4, "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let fx = small_fixture();
    let config = setup(dir.path(), &fx, "");
    let c = config.to_str().unwrap();
    assert_eq!(lvx(&["explain", "--config", "/nonexistent/lvx.toml"]).0, 2);
    assert_eq!(lvx(&["explain", "--config", c, "--k", "0"]).0, 2);
    assert_eq!(lvx(&["explain", "--config", c, "--epsilon", "2"]).0, 2);
    for cmd in ["build-tree", "refine", "explain"] {
        let (code, text) = lvx(&[cmd, "--config", c]);
        assert_eq!(code, 0, "{cmd}: {text}");
    }
    // a category with no tree
    let mut test = fx.test.clone();
    test[0].label = Some("wombat".into());
    fs::write(dir.path().join("test.jsonl"), vectors_jsonl(&test)).unwrap();
    let (code, text) = lvx(&["explain", "--config", c]);
    assert_eq!(code, 3, "{text}");
    // k larger than the supported nodes
    fs::write(dir.path().join("test.jsonl"), vectors_jsonl(&fx.test)).unwrap();
    assert_eq!(lvx(&["explain", "--config", c, "--k", "50"]).0, 3);
}

#[test]
fn identical_predictions_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let fx = small_fixture();
    let config = setup(dir.path(), &fx, "");
    let cfg = RunConfig::load(&config).unwrap();
    fs::create_dir_all(&cfg.paths.output_dir).unwrap();
    fs::copy(
        dir.path().join("ground_truth.jsonl"),
        cfg.explanations_path(),
    )
    .unwrap();
    run(Command::Evaluate, &cfg).unwrap();
    let summary = fs::read_to_string(cfg.paths.output_dir.join("summary.csv")).unwrap();
    let lvx_row = summary.lines().nth(1).unwrap();
    assert!(lvx_row.starts_with("lvx,80,0,100,100,"), "{lvx_row}");
}

#[test]
fn evaluate_reports_unmatched_and_rejects_disjoint_ids() {
    let dir = tempfile::tempdir().unwrap();
    let fx = small_fixture();
    let config = setup(dir.path(), &fx, "[baselines]\nenabled = []\n");
    let cfg = run_all(
        &config,
        &[Command::BuildTree, Command::Refine, Command::Explain],
    );
    let mut records: Vec<ExplanationRecord> = load_records(&cfg.explanations_path())
        .unwrap()
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    records[0].sample_id = "stray".into();
    let text: String = records.iter().map(|r| r.to_json_line() + "\n").collect();
    fs::write(cfg.explanations_path(), &text).unwrap();
    run(Command::Evaluate, &cfg).unwrap();
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(cfg.paths.output_dir.join("report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["unmatched"]["lvx"]["without_truth"][0], "stray");
    assert_eq!(report["methods"][0]["samples"], 79);

    for r in &mut records {
        r.sample_id = format!("other-{}", r.sample_id);
    }
    let text: String = records.iter().map(|r| r.to_json_line() + "\n").collect();
    fs::write(cfg.explanations_path(), &text).unwrap();
    let err = run(Command::Evaluate, &cfg).unwrap_err();
    assert_eq!(err.kind, ErrorKind::DataMismatch);
    assert!(err.message.contains("other-test-heron-001"));
}

#[test]
fn evaluate_aggregates_are_row_means() {
    let dir = tempfile::tempdir().unwrap();
    let fx = small_fixture();
    let cfg = run_all(&setup(dir.path(), &fx, ""), &PIPELINE);
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(cfg.paths.output_dir.join("report.json")).unwrap(),
    )
    .unwrap();
    for s in report["methods"].as_array().unwrap() {
        let method = s["method"].as_str().unwrap();
        let csv =
            fs::read_to_string(cfg.paths.output_dir.join(format!("report_{method}.csv"))).unwrap();
        let rows: Vec<Vec<f64>> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
            .collect();
        for (col, key) in ["ted", "mcs", "tk"].iter().enumerate() {
            let mean = rows.iter().map(|r| r[col]).sum::<f64>() / rows.len() as f64;
            assert!(
                (mean - s[key].as_f64().unwrap()).abs() <= 1e-9,
                "{method} {key}"
            );
        }
    }
    let lvx_ted = report["methods"][0]["ted"].as_f64().unwrap();
    let constant = report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["method"] == "constant")
        .unwrap();
    assert!(constant["ted"].as_f64().unwrap() > lvx_ted);
    assert!(report["methods"][0]["mscd"].is_f64());
}

#[test]
fn stability_pairs_and_detects_shift() {
    let dir = tempfile::tempdir().unwrap();
    let fx = small_fixture();
    let config = setup(dir.path(), &fx, "");
    let cfg = run_all(
        &config,
        &[Command::BuildTree, Command::Refine, Command::Stability],
    );
    let s: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(cfg.paths.output_dir.join("stability.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(
        (s["mcs"].as_f64(), s["tk"].as_f64()),
        (Some(100.0), Some(100.0))
    );

    // move each sample onto the supports of two other nodes of its tree
    let trees = lvx_harness::commands::load_trees(&cfg.refined_trees_dir()).unwrap();
    let shifted: Vec<EmbeddingVector> = fx
        .test
        .iter()
        .map(|q| {
            let c = q.label.as_deref().unwrap();
            let truth = &fx.truth[&q.id].tree;
            let tree = &trees[c];
            let others: Vec<&str> = tree
                .nodes()
                .filter(|n| {
                    n.id != tree.root()
                        && !n.support.is_empty()
                        && truth.find_label(&n.label).is_none()
                })
                .map(|n| n.support[0].as_str())
                .take(2)
                .collect();
            let a = &fx.support_pool.get(others[0]).unwrap().vector;
            let b = &fx.support_pool.get(others[1]).unwrap().vector;
            let mid = a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
            EmbeddingVector::new(q.id.clone(), q.label.clone(), mid)
        })
        .collect();
    fs::write(dir.path().join("perturbed.jsonl"), vectors_jsonl(&shifted)).unwrap();
    run(Command::Stability, &cfg).unwrap();
    let s: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(cfg.paths.output_dir.join("stability.json")).unwrap(),
    )
    .unwrap();
    assert!(s["mcs"].as_f64().unwrap() < 100.0);
    assert!(s["tk"].as_f64().unwrap() < 100.0);

    fs::write(
        dir.path().join("perturbed.jsonl"),
        vectors_jsonl(&shifted[1..]),
    )
    .unwrap();
    let err = run(Command::Stability, &cfg).unwrap_err();
    assert_eq!(err.kind, ErrorKind::DataMismatch);
    assert!(err.message.contains(&fx.test[0].id));
}

#[test]
fn dot_export_escapes_labels() {
    let dir = tempfile::tempdir().unwrap();
    let fx = small_fixture();
    let config = setup(dir.path(), &fx, "");
    let cfg = RunConfig::load(&config).unwrap();
    fs::create_dir_all(&cfg.paths.output_dir).unwrap();
    let odd = r#"{"sample_id":"s/1","predicted":"x","explanation":{"name":"x","children":[{"name":"say \"hi\"\\"},{"name":"two\nlines"}]}}"#;
    let lone =
        r#"{"sample_id":"s2","predicted":"No Findings","explanation":{"name":"No Findings"}}"#;
    fs::write(cfg.explanations_path(), format!("{odd}\n{lone}\n")).unwrap();
    let out = run(Command::ExportDot, &cfg).unwrap();
    assert_eq!(out.outputs.len(), 2);
    let dot = fs::read_to_string(&out.outputs[0]).unwrap();
    assert_eq!(dot.matches("->").count(), 2);
    // parse the quoted labels back
    let labels: Vec<String> = dot
        .lines()
        .filter_map(|l| l.split_once("[label=\"").map(|(_, rest)| rest))
        .map(|rest| {
            let mut s = String::new();
            let mut chars = rest.chars();
            while let Some(c) = chars.next() {
                match c {
                    '\\' => match chars.next().unwrap() {
                        'n' => s.push('\n'),
                        other => s.push(other),
                    },
                    '"' => break,
                    c => s.push(c),
                }
            }
            s
        })
        .collect();
    assert_eq!(labels, ["x", "say \"hi\"\\", "two\nlines"]);
    let single = fs::read_to_string(&out.outputs[1]).unwrap();
    assert_eq!(
        (
            single.matches("[label=").count(),
            single.matches("->").count()
        ),
        (1, 0)
    );

    fs::write(cfg.explanations_path(), "{not json}\n").unwrap();
    assert_eq!(
        run(Command::ExportDot, &cfg).unwrap_err().kind,
        ErrorKind::Validation
    );
}

#[test]
fn replay_override_and_manifest_digests() {
    let dir = tempfile::tempdir().unwrap();
    let fx = small_fixture();
    let config = setup(dir.path(), &fx, "[llm]\nmode = \"live\"\n");
    let copy = dir.path().join("copy.jsonl");
    Transcript::load(dir.path().join("transcript.jsonl"))
        .unwrap()
        .save(&copy)
        .unwrap();
    let (code, text) = lvx(&[
        "build-tree",
        "--config",
        config.to_str().unwrap(),
        "--replay",
        copy.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/manifests/build-tree.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["llm_mode"], "replay");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["transcript_digest"].as_str().unwrap().len(), 64);
    assert!(manifest["outputs"]["trees/initial/heron.json"].is_string());
}
