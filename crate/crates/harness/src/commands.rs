//! The `lvx` subcommands. Each reads what the config points at, writes its
//! outputs under `paths.output_dir`, and finishes with a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use lvx_core::baselines::{constant_baseline, random_baseline, subtree_baseline, BaselineKind};
use lvx_core::embedding::{load_embeddings, EmbeddingStore, EmbeddingVector};
use lvx_core::llm::{
    parse_attribute_response, render_prompt, LiveClient, LiveConfig, LlmClient, LlmError,
    PromptKind, ReplayClient, RequestKey, Transcript,
};
use lvx_core::metrics::{mcs_score, mscd, tk_score, MetricReport, MetricSummary};
use lvx_core::refine::{refine, supply_supports, StoreSupportSource};
use lvx_core::routing::{explain, CategoryTrees, ExplanationRecord};
use lvx_core::tree::{parse_tree, NodeId};
use lvx_core::{AttributeTree, ExplanationTree};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{require, LlmMode, RunConfig};
use crate::dot;
use crate::error::HarnessError;
use crate::manifest::{sample_seed, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BuildTree,
    Refine,
    Explain,
    Baseline,
    Evaluate,
    Stability,
    ExportDot,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::BuildTree => "build-tree",
            Command::Refine => "refine",
            Command::Explain => "explain",
            Command::Baseline => "baseline",
            Command::Evaluate => "evaluate",
            Command::Stability => "stability",
            Command::ExportDot => "export-dot",
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub summary: String,
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    cfg.validate()?;
    let out = &cfg.paths.output_dir;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    match command {
        Command::BuildTree => cmd_build_tree(cfg),
        Command::Refine => cmd_refine(cfg),
        Command::Explain => cmd_explain(cfg),
        Command::Baseline => cmd_baseline(cfg),
        Command::Evaluate => cmd_evaluate(cfg),
        Command::Stability => cmd_stability(cfg),
        Command::ExportDot => cmd_export_dot(cfg),
    }
}

// ---- language model -------------------------------------------------------

enum Llm {
    Replay(ReplayClient, PathBuf),
    Live(LiveClient),
}

impl Llm {
    fn from_config(cfg: &RunConfig) -> Result<Llm, HarnessError> {
        match cfg.llm.mode {
            LlmMode::Replay => {
                let path = require(&cfg.paths.transcript, "transcript")?;
                let t =
                    Transcript::load(&path).map_err(|e| HarnessError::from(e).in_file(&path))?;
                Ok(Llm::Replay(ReplayClient::new(t), path))
            }
            LlmMode::Live => Ok(Llm::Live(LiveClient::new(LiveConfig::from_env()?)?)),
        }
    }

    /// Records the transcript digest; live runs also save what they recorded.
    fn finish(&self, cfg: &RunConfig, m: &mut Manifest) -> Result<(), HarnessError> {
        let path = match self {
            Llm::Replay(_, path) => path.clone(),
            Llm::Live(client) => {
                let path = cfg
                    .paths
                    .output_dir
                    .join(format!("transcript.{}.jsonl", m.command));
                client.transcript().save(&path)?;
                m.output(&cfg.paths.output_dir, &path)?;
                path
            }
        };
        m.transcript_digest = Some(crate::manifest::file_digest(&path)?);
        Ok(())
    }
}

impl LlmClient for Llm {
    fn complete(&self, key: &RequestKey, prompt: &str) -> Result<String, LlmError> {
        match self {
            Llm::Replay(c, _) => c.complete(key, prompt),
            Llm::Live(c) => c.complete(key, prompt),
        }
    }
}

// ---- file helpers ---------------------------------------------------------

fn write_file(path: &Path, text: &str) -> Result<PathBuf, HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))?;
    Ok(path.to_path_buf())
}

fn load_store(path: &Path) -> Result<EmbeddingStore, HarnessError> {
    load_embeddings(path).map_err(|e| HarnessError::from(e).in_file(path))
}

/// Embeddings in file order; each must carry a category label.
fn load_labeled(path: &Path) -> Result<Vec<EmbeddingVector>, HarnessError> {
    let store = load_store(path)?;
    let out: Vec<EmbeddingVector> = store.iter().cloned().collect();
    if let Some(bad) = out.iter().find(|e| e.label.is_none()) {
        return Err(HarnessError::validation(format!(
            "embedding {:?} has no category label",
            bad.id
        ))
        .in_file(path));
    }
    Ok(out)
}

fn category_of(e: &EmbeddingVector) -> &str {
    e.label.as_deref().expect("labels checked on load")
}

/// Every `*.json` tree in `dir`, keyed by category.
pub fn load_trees(dir: &Path) -> Result<CategoryTrees, HarnessError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| {
            HarnessError::validation(format!("cannot read tree directory {}: {e}", dir.display()))
        })?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut trees = CategoryTrees::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| HarnessError::io(&f, e))?;
        let tree = parse_tree(&text).map_err(|e| HarnessError::from(e).in_file(&f))?;
        if let Some(prev) = trees.insert(tree.category().to_string(), tree) {
            return Err(HarnessError::validation(format!(
                "category {:?} defined twice",
                prev.category()
            ))
            .in_file(&f));
        }
    }
    if trees.is_empty() {
        return Err(HarnessError::validation(format!(
            "no trees in {}",
            dir.display()
        )));
    }
    Ok(trees)
}

/// Replaces the `*.json` files of `dir` with one file per tree.
fn write_trees(dir: &Path, trees: &CategoryTrees) -> Result<Vec<PathBuf>, HarnessError> {
    if dir.exists() {
        for e in fs::read_dir(dir)
            .map_err(|e| HarnessError::io(dir, e))?
            .filter_map(Result::ok)
        {
            let p = e.path();
            if p.extension().is_some_and(|x| x == "json") {
                fs::remove_file(&p).map_err(|e| HarnessError::io(&p, e))?;
            }
        }
    }
    let mut out = Vec::new();
    for (category, tree) in trees {
        let path = dir.join(format!("{}.json", dot::file_stem(category)));
        out.push(write_file(&path, &(tree.to_json_pretty() + "\n"))?);
    }
    Ok(out)
}

/// Explanation records of a JSONL file, in file order.
pub fn load_records(path: &Path) -> Result<Vec<(ExplanationRecord, AttributeTree)>, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::validation(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad =
            |msg: String| HarnessError::validation(format!("line {}: {msg}", i + 1)).in_file(path);
        let record: ExplanationRecord =
            serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let tree = record.tree().map_err(|e| bad(e.to_string()))?;
        if !seen.insert(record.sample_id.clone()) {
            return Err(bad(format!("duplicate sample id {:?}", record.sample_id)));
        }
        out.push((record, tree));
    }
    Ok(out)
}

fn records_jsonl(records: &[ExplanationRecord]) -> String {
    records.iter().map(|r| r.to_json_line() + "\n").collect()
}

/// Rebuilds an explanation with ids of the tree it was cut from, so MSCD can
/// look up supports.
fn as_explanation(tree: AttributeTree) -> ExplanationTree {
    ExplanationTree {
        tree,
        source_sample: None,
        selected: Vec::new(),
    }
}

fn classes(path: &Path) -> Result<Vec<String>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let list: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    if list.is_empty() {
        return Err(HarnessError::validation("class list is empty").in_file(path));
    }
    Ok(list)
}

// ---- commands -------------------------------------------------------------

fn cmd_build_tree(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let class_file = require(&cfg.paths.classes, "classes")?;
    let support_file = require(&cfg.paths.supports, "supports")?;
    let names = classes(&class_file)?;
    let llm = Llm::from_config(cfg)?;
    let example = cfg.in_context_example()?;
    let mut store = load_store(&support_file)?;
    let source = StoreSupportSource::new(store.clone());

    let mut trees = CategoryTrees::new();
    for class in &names {
        let bindings = [("class", class.as_str())].into_iter().collect();
        let prompt = render_prompt(PromptKind::InitialAttributes, &bindings, &example)?;
        let key = RequestKey::new(PromptKind::InitialAttributes, class, class, 0);
        let response = llm.complete(&key, &prompt)?;
        let mut tree = parse_attribute_response(&response).map_err(|e| {
            HarnessError::new(
                crate::error::ErrorKind::Llm,
                format!("class {class:?}: {e}"),
            )
        })?;
        if tree.category() != class {
            tree = tree.with_label(tree.root(), class)?;
        }
        let tops: Vec<NodeId> = tree.children(tree.root()).to_vec();
        let tree = supply_supports(tree, &tops, &mut store, &source, cfg.refine.k_support)?;
        trees.insert(class.clone(), tree);
    }

    let out_dir = &cfg.paths.output_dir;
    let mut m = Manifest::new(Command::BuildTree.name(), cfg);
    m.input(&class_file)?;
    m.input(&support_file)?;
    let outputs = write_trees(&cfg.initial_trees_dir(), &trees)?;
    for p in &outputs {
        m.output(out_dir, p)?;
    }
    llm.finish(cfg, &mut m)?;
    m.details = serde_json::json!({ "categories": names, "k_support": cfg.refine.k_support });
    Ok(Outcome {
        manifest: m.write(out_dir)?,
        summary: format!("built {} tree(s)", outputs.len()),
        outputs,
    })
}

fn cmd_refine(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let support_file = require(&cfg.paths.supports, "supports")?;
    let train_file = require(&cfg.paths.train, "train")?;
    let initial_dir = cfg.initial_trees_dir();
    let initial = load_trees(&initial_dir)?;
    let mut store = load_store(&support_file)?;
    let train = load_labeled(&train_file)?;
    let llm = Llm::from_config(cfg)?;
    let rc = cfg.refinement_config()?;
    let dist = cfg.distance_config()?;

    let pairs: Vec<(&EmbeddingVector, &str)> = train.iter().map(|e| (e, category_of(e))).collect();
    let source = StoreSupportSource::new(store.clone());
    let result = refine(&initial, &pairs, &mut store, &llm, &source, &dist, &rc)?;

    let out_dir = &cfg.paths.output_dir;
    let mut m = Manifest::new(Command::Refine.name(), cfg);
    m.input(&initial_dir)?;
    m.input(&support_file)?;
    m.input(&train_file)?;
    let mut outputs = write_trees(&cfg.refined_trees_dir(), &result.trees)?;
    let log = serde_json::to_string_pretty(&result.history).expect("history serializes") + "\n";
    outputs.push(write_file(&out_dir.join("refine_log.json"), &log)?);
    for p in &outputs {
        m.output(out_dir, p)?;
    }
    llm.finish(cfg, &mut m)?;
    m.details = serde_json::json!({
        "categories": result.trees.keys().collect::<Vec<_>>(),
        "t_max": rc.t_max,
        "prune_count": rc.prune_count,
        "grow_count": rc.grow_count,
        "k_support": rc.k_support,
        "epsilon": dist.epsilon(),
        "transcript": cfg.paths.transcript.as_ref().map(|p| m.relative(p)),
    });
    let sizes: Vec<String> = result
        .trees
        .iter()
        .map(|(c, t)| format!("{c}: {}", t.len()))
        .collect();
    Ok(Outcome {
        manifest: m.write(out_dir)?,
        summary: format!(
            "refined {} tree(s) over {} round(s) [{}]",
            result.trees.len(),
            rc.t_max,
            sizes.join(", ")
        ),
        outputs,
    })
}

/// Routes every sample through its predicted category's tree.
fn explain_all(
    samples: &[EmbeddingVector],
    trees: &CategoryTrees,
    store: &EmbeddingStore,
    cfg: &RunConfig,
) -> Result<Vec<ExplanationRecord>, HarnessError> {
    let route = cfg.routing_config()?;
    let dist = cfg.distance_config()?;
    samples
        .par_iter()
        .map(|q| {
            let predicted = category_of(q);
            let routed = explain(&q.vector, predicted, trees, store, &route, &dist)
                .map_err(|e| HarnessError::from(e).in_file(Path::new(&q.id)))?;
            Ok(ExplanationRecord::new(
                &q.id,
                predicted,
                Some("lvx"),
                &routed.explanation,
                routed.distances,
            ))
        })
        .collect()
}

fn cmd_explain(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let support_file = require(&cfg.paths.supports, "supports")?;
    let test_file = require(&cfg.paths.test, "test")?;
    let trees_dir = cfg.refined_trees_dir();
    let trees = load_trees(&trees_dir)?;
    let store = load_store(&support_file)?;
    let test = load_labeled(&test_file)?;
    let records = explain_all(&test, &trees, &store, cfg)?;

    let out_dir = &cfg.paths.output_dir;
    let path = write_file(&cfg.explanations_path(), &records_jsonl(&records))?;
    let mut m = Manifest::new(Command::Explain.name(), cfg);
    m.input(&trees_dir)?;
    m.input(&support_file)?;
    m.input(&test_file)?;
    m.output(out_dir, &path)?;
    m.details = serde_json::json!({ "k": cfg.routing.k, "epsilon": cfg.distance.epsilon });
    Ok(Outcome {
        manifest: m.write(out_dir)?,
        summary: format!("explained {} sample(s)", records.len()),
        outputs: vec![path],
    })
}

pub fn baseline_path(cfg: &RunConfig, kind: BaselineKind) -> PathBuf {
    cfg.paths.output_dir.join(format!("baseline_{kind}.jsonl"))
}

fn cmd_baseline(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let test_file = require(&cfg.paths.test, "test")?;
    let test = load_labeled(&test_file)?;
    let out_dir = &cfg.paths.output_dir;
    let mut m = Manifest::new(Command::Baseline.name(), cfg);
    m.input(&test_file)?;
    let mut outputs = Vec::new();

    for &kind in &cfg.baselines.enabled {
        let records: Vec<ExplanationRecord> = match kind {
            BaselineKind::Random => {
                let dir = cfg.refined_trees_dir();
                let trees = load_trees(&dir)?;
                m.input(&dir)?;
                test.iter()
                    .map(|q| {
                        let c = category_of(q);
                        let tree = trees.get(c).ok_or_else(|| {
                            HarnessError::mismatch(format!("no tree for category {c:?}"))
                        })?;
                        let e = random_baseline(
                            tree,
                            cfg.baselines.random_nodes,
                            sample_seed(cfg.seed, &q.id),
                        )?;
                        Ok(ExplanationRecord::new(
                            &q.id,
                            c,
                            Some(kind.as_str()),
                            &e,
                            Vec::new(),
                        ))
                    })
                    .collect::<Result<_, HarnessError>>()?
            }
            BaselineKind::Constant => {
                let dir = cfg.initial_trees_dir();
                let trees = load_trees(&dir)?;
                m.input(&dir)?;
                test.iter()
                    .map(|q| {
                        let e = constant_baseline(category_of(q), &trees)?;
                        Ok(ExplanationRecord::new(
                            &q.id,
                            category_of(q),
                            Some(kind.as_str()),
                            &e,
                            Vec::new(),
                        ))
                    })
                    .collect::<Result<_, HarnessError>>()?
            }
            BaselineKind::Subtree => {
                let dir = cfg.refined_trees_dir();
                let trees = load_trees(&dir)?;
                let support_file = require(&cfg.paths.supports, "supports")?;
                let store = load_store(&support_file)?;
                let held_file = match &cfg.paths.held_out {
                    Some(_) => require(&cfg.paths.held_out, "held_out")?,
                    None => test_file.clone(),
                };
                let held = load_labeled(&held_file)?;
                m.input(&dir)?;
                m.input(&support_file)?;
                m.input(&held_file)?;
                let mut by_category: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
                for h in &held {
                    by_category
                        .entry(category_of(h))
                        .or_default()
                        .push(&h.vector);
                }
                let route = cfg.routing_config()?;
                let dist = cfg.distance_config()?;
                let mut fixed: BTreeMap<&str, ExplanationTree> = BTreeMap::new();
                for q in &test {
                    let c = category_of(q);
                    if !fixed.contains_key(c) {
                        let qs = by_category.get(c).map(Vec::as_slice).unwrap_or(&[]);
                        fixed.insert(c, subtree_baseline(c, qs, &trees, &store, &route, &dist)?);
                    }
                }
                test.iter()
                    .map(|q| {
                        ExplanationRecord::new(
                            &q.id,
                            category_of(q),
                            Some(kind.as_str()),
                            &fixed[category_of(q)],
                            Vec::new(),
                        )
                    })
                    .collect()
            }
        };
        let path = write_file(&baseline_path(cfg, kind), &records_jsonl(&records))?;
        m.output(out_dir, &path)?;
        outputs.push(path);
    }
    m.details = serde_json::json!({
        "enabled": cfg.baselines.enabled,
        "random_nodes": cfg.baselines.random_nodes,
        "k": cfg.routing.k,
    });
    Ok(Outcome {
        manifest: m.write(out_dir)?,
        summary: format!("wrote {} baseline file(s)", outputs.len()),
        outputs,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Unmatched {
    /// Predicted samples with no ground truth.
    pub without_truth: Vec<String>,
    /// Ground-truth samples with no prediction.
    pub without_prediction: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub methods: Vec<MetricSummary>,
    pub unmatched: BTreeMap<String, Unmatched>,
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let truth_file = require(&cfg.paths.ground_truth, "ground_truth")?;
    let truth = load_records(&truth_file)?;
    let truth_by_id: BTreeMap<&str, &AttributeTree> = truth
        .iter()
        .map(|(r, t)| (r.sample_id.as_str(), t))
        .collect();
    let metric = cfg.metric_config()?;

    let mut methods = vec![("lvx".to_string(), cfg.explanations_path())];
    for &kind in &cfg.baselines.enabled {
        let p = baseline_path(cfg, kind);
        if p.exists() {
            methods.push((kind.to_string(), p));
        }
    }
    if !methods[0].1.exists() {
        return Err(HarnessError::validation(format!(
            "no explanations at {}",
            methods[0].1.display()
        )));
    }

    // Faithfulness needs the sample embeddings and the supports.
    let faith = match (&cfg.paths.test, &cfg.paths.supports) {
        (Some(t), Some(s)) if t.exists() && s.exists() => {
            let store = load_store(s)?;
            let test: BTreeMap<String, Vec<f64>> = load_store(t)?
                .iter()
                .map(|e| (e.id.clone(), e.vector.clone()))
                .collect();
            Some((store, test))
        }
        _ => None,
    };

    let out_dir = &cfg.paths.output_dir;
    let mut m = Manifest::new(Command::Evaluate.name(), cfg);
    m.input(&truth_file)?;
    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    let mut unmatched = BTreeMap::new();
    let dist = cfg.distance_config()?;

    for (method, path) in &methods {
        let predictions = load_records(path)?;
        m.input(path)?;
        let mut miss = Unmatched::default();
        let mut pairs = Vec::new();
        for (r, t) in &predictions {
            match truth_by_id.get(r.sample_id.as_str()) {
                Some(gt) => pairs.push((r.sample_id.clone(), t, *gt)),
                None => miss.without_truth.push(r.sample_id.clone()),
            }
        }
        let predicted: BTreeSet<&str> = predictions
            .iter()
            .map(|(r, _)| r.sample_id.as_str())
            .collect();
        miss.without_prediction = truth_by_id
            .keys()
            .filter(|id| !predicted.contains(*id))
            .map(|s| s.to_string())
            .collect();
        if pairs.is_empty() {
            let mut ids = miss.without_truth.clone();
            ids.extend(miss.without_prediction.iter().cloned());
            return Err(HarnessError::mismatch(format!(
                "{method}: no sample id is shared by predictions and ground truth; unmatched: {}",
                ids.join(", ")
            )));
        }
        if !miss.without_truth.is_empty() || !miss.without_prediction.is_empty() {
            log::warn!(
                "{method}: {} prediction(s) without ground truth, {} ground-truth sample(s) without prediction",
                miss.without_truth.len(),
                miss.without_prediction.len()
            );
        }
        let refs: Vec<(String, &AttributeTree, &AttributeTree)> = pairs
            .iter()
            .map(|(id, p, g)| (id.clone(), *p, *g))
            .collect();
        let mut report = MetricReport::evaluate(method, &refs, &metric);
        if let Some((store, test)) = &faith {
            let explained: Vec<(&[f64], ExplanationTree)> = pairs
                .iter()
                .filter_map(|(id, p, _)| {
                    test.get(id)
                        .map(|q| (q.as_slice(), as_explanation((*p).clone())))
                })
                .collect();
            let borrowed: Vec<(&[f64], &ExplanationTree)> =
                explained.iter().map(|(q, e)| (*q, e)).collect();
            match mscd(&borrowed, store, &dist) {
                Ok(v) => report = report.with_mscd(v),
                Err(e) => log::warn!("{method}: MSCD unavailable: {e}"),
            }
        }
        outputs.push(write_file(
            &out_dir.join(format!("report_{method}.csv")),
            &report.to_csv(),
        )?);
        summaries.push(report.summary());
        unmatched.insert(method.clone(), miss);
    }

    let mut csv = String::from("method,samples,ted,mcs,tk,mscd\n");
    for s in &summaries {
        let mscd = s.mscd.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.method, s.samples, s.ted, s.mcs, s.tk, mscd
        ));
    }
    outputs.push(write_file(&out_dir.join("summary.csv"), &csv)?);
    let report = EvaluationReport {
        methods: summaries.clone(),
        unmatched,
    };
    outputs.push(write_file(
        &out_dir.join("report.json"),
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )?);
    for p in &outputs {
        m.output(out_dir, p)?;
    }
    m.details = serde_json::json!({ "tk_lambda": cfg.metrics.tk_lambda, "methods": methods.iter().map(|(n, _)| n).collect::<Vec<_>>() });
    let line: Vec<String> = summaries
        .iter()
        .map(|s| format!("{} mcs {:.2}", s.method, s.mcs))
        .collect();
    Ok(Outcome {
        manifest: m.write(out_dir)?,
        summary: line.join("; "),
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySummary {
    pub samples: usize,
    pub mcs: f64,
    pub tk: f64,
}

fn cmd_stability(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let support_file = require(&cfg.paths.supports, "supports")?;
    let clean_file = require(&cfg.paths.test, "test")?;
    let perturbed_file = require(&cfg.paths.perturbed, "perturbed")?;
    let trees_dir = cfg.refined_trees_dir();
    let trees = load_trees(&trees_dir)?;
    let store = load_store(&support_file)?;
    let clean = load_labeled(&clean_file)?;
    let mut perturbed = load_store(&perturbed_file)?
        .iter()
        .cloned()
        .collect::<Vec<_>>();

    let clean_ids: BTreeSet<&str> = clean.iter().map(|e| e.id.as_str()).collect();
    let perturbed_ids: BTreeSet<&str> = perturbed.iter().map(|e| e.id.as_str()).collect();
    let unpaired: Vec<&str> = clean_ids
        .symmetric_difference(&perturbed_ids)
        .copied()
        .collect();
    if !unpaired.is_empty() {
        return Err(HarnessError::mismatch(format!(
            "unpaired sample ids: {}",
            unpaired.join(", ")
        )));
    }
    // a perturbed sample without its own prediction keeps the clean one
    let predicted: BTreeMap<&str, &str> = clean
        .iter()
        .map(|e| (e.id.as_str(), category_of(e)))
        .collect();
    for p in &mut perturbed {
        if p.label.is_none() {
            p.label = Some(predicted[p.id.as_str()].to_string());
        }
    }
    let perturbed_by_id: BTreeMap<String, EmbeddingVector> =
        perturbed.into_iter().map(|e| (e.id.clone(), e)).collect();
    let paired: Vec<EmbeddingVector> = clean
        .iter()
        .map(|e| perturbed_by_id[&e.id].clone())
        .collect();

    let a = explain_all(&clean, &trees, &store, cfg)?;
    let b = explain_all(&paired, &trees, &store, cfg)?;
    let metric = cfg.metric_config()?;
    let mut csv = String::from("sample_id,mcs,tk\n");
    let (mut mcs_sum, mut tk_sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        let (tx, ty) = (x.tree()?, y.tree()?);
        let (m, t) = (mcs_score(&tx, &ty), tk_score(&tx, &ty, &metric));
        mcs_sum += m;
        tk_sum += t;
        csv.push_str(&format!("{},{m},{t}\n", csv_field(&x.sample_id)));
    }
    let n = a.len().max(1) as f64;
    let summary = StabilitySummary {
        samples: a.len(),
        mcs: mcs_sum / n,
        tk: tk_sum / n,
    };

    let out_dir = &cfg.paths.output_dir;
    let mut m = Manifest::new(Command::Stability.name(), cfg);
    m.input(&trees_dir)?;
    m.input(&support_file)?;
    m.input(&clean_file)?;
    m.input(&perturbed_file)?;
    let outputs = vec![
        write_file(&out_dir.join("stability.csv"), &csv)?,
        write_file(
            &out_dir.join("stability.json"),
            &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
        )?,
    ];
    for p in &outputs {
        m.output(out_dir, p)?;
    }
    m.details = serde_json::json!({ "k": cfg.routing.k, "epsilon": cfg.distance.epsilon });
    Ok(Outcome {
        manifest: m.write(out_dir)?,
        summary: format!(
            "stability over {} sample(s): mcs {:.2}, tk {:.2}",
            summary.samples, summary.mcs, summary.tk
        ),
        outputs,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_export_dot(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let input = cfg.explanations_path();
    if !input.exists() {
        return Err(HarnessError::validation(format!(
            "no explanations at {}",
            input.display()
        )));
    }
    let records = load_records(&input)?;
    let out_dir = &cfg.paths.output_dir;
    let dot_dir = out_dir.join("dot");
    let mut m = Manifest::new(Command::ExportDot.name(), cfg);
    m.input(&input)?;
    let mut outputs = Vec::new();
    let mut used = BTreeSet::new();
    for (r, tree) in &records {
        let mut stem = dot::file_stem(&r.sample_id);
        if !used.insert(stem.clone()) {
            stem = format!("{stem}-{}", outputs.len());
            used.insert(stem.clone());
        }
        let path = write_file(
            &dot_dir.join(format!("{stem}.dot")),
            &dot::render(&r.sample_id, tree),
        )?;
        m.output(out_dir, &path)?;
        outputs.push(path);
    }
    Ok(Outcome {
        manifest: m.write(out_dir)?,
        summary: format!("wrote {} DOT file(s)", outputs.len()),
        outputs,
    })
}
