//! Planted Gaussian fixture for end-to-end checks.
//!
//! Every node of every category gets its own coordinate axis; its support
//! embeddings are a Gaussian cluster around a point on that axis, so any two
//! cluster centers of one category sit exactly `separation * sigma` apart.
//! Test samples are drawn around the midpoint of two planted nodes, whose
//! root paths form the sample's ground-truth explanation.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::embedding::{EmbeddingStore, EmbeddingVector};
use crate::llm::{
    render_prompt, PromptKind, RequestKey, Transcript, TranscriptRecord, DEFAULT_IN_CONTEXT_EXAMPLE,
};
use crate::routing::{CategoryTrees, ExplanationRecord};
use crate::tree::{merge_paths, ExplanationTree, NodeId, NodeKind, TreeBuilder};

const NAMES: [&str; 8] = [
    "heron", "otter", "lynx", "moth", "gecko", "plover", "marten", "newt",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub categories: usize,
    /// Nodes per planted tree, root included. At least 2.
    pub tree_nodes: usize,
    /// Unvisited nodes added to each initial tree.
    pub spurious: usize,
    pub sigma: f64,
    /// Distance between cluster centers, in units of `sigma`.
    pub separation: f64,
    pub supports_per_node: usize,
    pub train_per_node: usize,
    pub test_per_category: usize,
    /// Spread of test samples around their midpoint, in units of `sigma`.
    pub sample_noise: f64,
    /// Refinement rounds the recorded transcript covers.
    pub t_max: u32,
    pub seed: u64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            categories: 4,
            tree_nodes: 8,
            spurious: 4,
            sigma: 0.1,
            separation: 10.0,
            supports_per_node: 10,
            train_per_node: 20,
            test_per_category: 200,
            sample_noise: 1.0,
            t_max: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub config: FixtureConfig,
    pub categories: Vec<String>,
    /// Planted trees with support ids.
    pub ground_truth: CategoryTrees,
    /// Planted trees plus spurious nodes, with support ids.
    pub initial: CategoryTrees,
    /// Labels of the spurious nodes per category.
    pub spurious: BTreeMap<String, Vec<String>>,
    /// Supports of every node of the initial trees.
    pub store: EmbeddingStore,
    /// `store` plus supports for attributes the transcript may grow, each
    /// labeled `category/attribute`.
    pub support_pool: EmbeddingStore,
    /// Labeled with their true category.
    pub train: Vec<EmbeddingVector>,
    /// Labeled with their predicted (here: true) category.
    pub test: Vec<EmbeddingVector>,
    /// Planted explanation of every test sample, by id.
    pub truth: BTreeMap<String, ExplanationTree>,
    /// Initial-tree and growth answers for a replayed run.
    pub transcript: Transcript,
}

struct Sampler {
    rng: ChaCha8Rng,
    noise: Normal<f64>,
}

impl Sampler {
    fn around(&mut self, center: &[f64], scale: f64) -> Vec<f64> {
        center
            .iter()
            .map(|c| c + scale * self.noise.sample(&mut self.rng))
            .collect()
    }
}

fn category_name(i: usize) -> String {
    if i < NAMES.len() {
        NAMES[i].to_string()
    } else {
        format!("class{i}")
    }
}

/// Shape used for every planted tree: the root gets a few branches of two
/// children each, the remainder hangs off the root directly.
fn planted_parents(n: usize) -> Vec<usize> {
    let mut parents = vec![0; n];
    let mut i = 1;
    while i < n {
        let branch = i;
        parents[i] = 0;
        i += 1;
        for _ in 0..2 {
            if i + 1 < n {
                parents[i] = branch;
                i += 1;
            }
        }
    }
    parents
}

fn grown_label(label: &str, iteration: u32) -> String {
    format!("{label} variant {iteration}")
}

pub fn generate(cfg: &FixtureConfig) -> Fixture {
    assert!(
        cfg.tree_nodes >= 2,
        "a planted tree needs at least one attribute"
    );
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        noise: Normal::new(0.0, 1.0).expect("unit normal"),
    };
    let per_tree = cfg.tree_nodes - 1 + cfg.spurious;
    let dim = per_tree + 1;
    let radius = cfg.separation * cfg.sigma / std::f64::consts::SQRT_2;
    let axis_point = |axis: usize, scale: f64| {
        let mut v = vec![0.0; dim];
        v[axis] = scale;
        v
    };
    let parents = planted_parents(cfg.tree_nodes);

    let categories: Vec<String> = (0..cfg.categories).map(category_name).collect();
    let mut fx = Fixture {
        config: cfg.clone(),
        categories: categories.clone(),
        ground_truth: CategoryTrees::new(),
        initial: CategoryTrees::new(),
        spurious: BTreeMap::new(),
        store: EmbeddingStore::new(),
        support_pool: EmbeddingStore::new(),
        train: Vec::new(),
        test: Vec::new(),
        truth: BTreeMap::new(),
        transcript: Transcript::new(),
    };

    for category in &categories {
        let mut axes: Vec<usize> = (0..per_tree).collect();
        axes.shuffle(&mut s.rng);
        let mut centers: BTreeMap<String, Vec<f64>> = BTreeMap::new();

        let mut b = TreeBuilder::new(category).expect("category names are valid");
        let mut ids = vec![b.root()];
        for (i, &p) in parents.iter().enumerate().skip(1) {
            let label = format!("{category} trait {i}");
            ids.push(
                b.child(ids[p], &label, NodeKind::Leaf)
                    .expect("labels are unique"),
            );
            centers.insert(label, axis_point(axes[i - 1], radius));
        }
        let planted = b.build();

        let mut padded = planted.clone();
        let mut spurious = Vec::new();
        for j in 0..cfg.spurious {
            // alternate between the root and the first branches
            let branches = padded.children(padded.root()).to_vec();
            let host = if j % 2 == 0 {
                padded.root()
            } else {
                branches[j / 2 % branches.len()]
            };
            let label = format!("{category} oddity {j}");
            let one = TreeBuilder::new(&label).expect("valid label").build();
            padded = padded
                .with_attached(host, &one)
                .expect("unique spurious label")
                .0;
            centers.insert(
                label.clone(),
                axis_point(axes[cfg.tree_nodes - 1 + j], radius),
            );
            spurious.push(label);
        }

        let mut supported = padded.clone();
        let mut gt = planted.clone();
        for id in padded.preorder().into_iter().skip(1) {
            let label = padded.label(id).unwrap().to_string();
            let support = support_cluster(&mut s, category, &label, &centers[&label], cfg, &mut fx);
            if let Some(g) = gt.find_label(&label) {
                gt = gt.with_support(g, support.clone()).unwrap();
            }
            supported = supported.with_support(id, support).unwrap();
        }

        // Growth answers: each attribute may sprout one far-away variant per round.
        let far = 10.0 * cfg.separation * cfg.sigma;
        let mut offset = 0usize;
        for id in planted.preorder().into_iter().skip(1) {
            let label = planted.label(id).unwrap();
            for iteration in 1..=cfg.t_max {
                let child = grown_label(label, iteration);
                let center = axis_point(dim - 1, far + offset as f64 * cfg.separation * cfg.sigma);
                offset += 1;
                for k in 0..cfg.supports_per_node {
                    let v = s.around(&center, cfg.sigma);
                    let id = format!(
                        "{category}.grow.{}.{iteration}.{k}",
                        label.replace(' ', "_")
                    );
                    fx.support_pool
                        .insert(EmbeddingVector::new(
                            id,
                            Some(format!("{category}/{child}")),
                            v,
                        ))
                        .expect("unique fixture ids");
                }
                let bindings = [("node", label), ("class", category.as_str())]
                    .into_iter()
                    .collect();
                let prompt = render_prompt(PromptKind::Grow, &bindings, DEFAULT_IN_CONTEXT_EXAMPLE)
                    .expect("bound");
                let response = json!({"name": label, "children": [{"name": child}]});
                fx.transcript
                    .push(TranscriptRecord {
                        key: RequestKey::new(PromptKind::Grow, category, label, iteration),
                        prompt,
                        response: format!("{}\n", serde_json::to_string_pretty(&response).unwrap()),
                    })
                    .expect("unique keys");
            }
        }

        let bindings = [("class", category.as_str())].into_iter().collect();
        let prompt = render_prompt(
            PromptKind::InitialAttributes,
            &bindings,
            DEFAULT_IN_CONTEXT_EXAMPLE,
        )
        .expect("bound");
        fx.transcript
            .push(TranscriptRecord {
                key: RequestKey::new(PromptKind::InitialAttributes, category, category, 0),
                prompt,
                response: format!("Here is the tree:\n{}\n", padded.to_json_pretty()),
            })
            .expect("unique keys");

        for id in planted.preorder().into_iter().skip(1) {
            let label = planted.label(id).unwrap();
            for n in 0..cfg.train_per_node {
                let v = s.around(&centers[label], cfg.sigma);
                let sample = format!("train-{category}-{id}-{n}");
                fx.train
                    .push(EmbeddingVector::new(sample, Some(category.clone()), v));
            }
        }

        let attrs: Vec<NodeId> = planted.preorder().into_iter().skip(1).collect();
        for n in 0..cfg.test_per_category {
            let picked = pick_two(&mut s.rng, &attrs);
            let mid: Vec<f64> = centers[planted.label(picked[0]).unwrap()]
                .iter()
                .zip(&centers[planted.label(picked[1]).unwrap()])
                .map(|(a, b)| (a + b) / 2.0)
                .collect();
            let v = s.around(&mid, cfg.sample_noise * cfg.sigma);
            let sample = format!("test-{category}-{n:03}");
            let truth = merge_paths(&gt, &picked)
                .unwrap()
                .with_sample(sample.clone());
            fx.truth.insert(sample.clone(), truth);
            fx.test
                .push(EmbeddingVector::new(sample, Some(category.clone()), v));
        }

        fx.ground_truth.insert(category.clone(), gt);
        fx.initial.insert(category.clone(), supported);
        fx.spurious.insert(category.clone(), spurious);
    }
    fx
}

fn pick_two(rng: &mut ChaCha8Rng, from: &[NodeId]) -> Vec<NodeId> {
    if from.len() < 2 {
        return from.to_vec();
    }
    let a = rng.random_range(0..from.len());
    let mut b = rng.random_range(0..from.len() - 1);
    if b >= a {
        b += 1;
    }
    vec![from[a], from[b]]
}

fn support_cluster(
    s: &mut Sampler,
    category: &str,
    label: &str,
    center: &[f64],
    cfg: &FixtureConfig,
    fx: &mut Fixture,
) -> Vec<String> {
    let mut ids = Vec::with_capacity(cfg.supports_per_node);
    for k in 0..cfg.supports_per_node {
        let id = format!("{category}.{}.{k}", label.replace(' ', "_"));
        let e = EmbeddingVector::new(
            id.clone(),
            Some(format!("{category}/{label}")),
            s.around(center, cfg.sigma),
        );
        fx.store.insert(e.clone()).expect("unique fixture ids");
        fx.support_pool.insert(e).expect("unique fixture ids");
        ids.push(id);
    }
    ids
}

impl Fixture {
    pub fn dim(&self) -> usize {
        self.store.dim().unwrap_or(0)
    }

    /// Training samples paired with their category, as refinement takes them.
    pub fn training_pairs(&self) -> Vec<(&EmbeddingVector, &str)> {
        self.train
            .iter()
            .map(|e| (e, e.label.as_deref().expect("fixture samples are labeled")))
            .collect()
    }

    /// Test samples with Gaussian noise of `scale * sigma` added per coordinate.
    pub fn perturbed_test(&self, scale: f64, seed: u64) -> Vec<EmbeddingVector> {
        let mut s = Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise: Normal::new(0.0, 1.0).expect("unit normal"),
        };
        self.test
            .iter()
            .map(|e| {
                EmbeddingVector::new(
                    e.id.clone(),
                    e.label.clone(),
                    s.around(&e.vector, scale * self.config.sigma),
                )
            })
            .collect()
    }

    pub fn truth_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, t) in &self.truth {
            let record = ExplanationRecord::new(id, t.tree.category(), None, t, Vec::new());
            out.push_str(&record.to_json_line());
            out.push('\n');
        }
        out
    }

    /// Writes the fixture as interchange files: `supports.jsonl`,
    /// `train.jsonl`, `test.jsonl`, `ground_truth.jsonl`, `transcript.jsonl`
    /// and `classes.txt`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("supports.jsonl"), self.support_pool.to_jsonl())?;
        fs::write(dir.join("train.jsonl"), vectors_jsonl(&self.train))?;
        fs::write(dir.join("test.jsonl"), vectors_jsonl(&self.test))?;
        fs::write(dir.join("ground_truth.jsonl"), self.truth_jsonl())?;
        fs::write(dir.join("transcript.jsonl"), self.transcript.to_jsonl())?;
        fs::write(dir.join("classes.txt"), self.categories.join("\n") + "\n")?;
        Ok(())
    }
}

pub fn vectors_jsonl(vectors: &[EmbeddingVector]) -> String {
    let mut out = String::new();
    for v in vectors {
        out.push_str(&v.to_json_line());
        out.push('\n');
    }
    out
}

/// True when no attribute label occurs in two categories, so discrimination
/// has nothing to do.
pub fn labels_are_private(trees: &CategoryTrees) -> bool {
    crate::refine::shared_labels(trees).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::squared_distance;

    fn small() -> FixtureConfig {
        FixtureConfig {
            test_per_category: 20,
            train_per_node: 3,
            t_max: 2,
            ..FixtureConfig::default()
        }
    }

    #[test]
    fn shape() {
        let fx = generate(&small());
        assert_eq!(fx.categories.len(), 4);
        for c in &fx.categories {
            assert_eq!(fx.ground_truth[c].len(), 8);
            assert_eq!(fx.initial[c].len(), 12);
            assert_eq!(fx.spurious[c].len(), 4);
            fx.initial[c].validate().unwrap();
        }
        assert_eq!(fx.test.len(), 80);
        assert_eq!(fx.train.len(), 4 * 7 * 3);
        assert!(labels_are_private(&fx.initial));
        assert_eq!(planted_parents(8), [0, 0, 1, 1, 0, 4, 4, 0]);
    }

    #[test]
    fn centers_are_separated() {
        let cfg = small();
        let fx = generate(&cfg);
        let tree = &fx.initial["heron"];
        let means: Vec<Vec<f64>> = tree
            .preorder()
            .into_iter()
            .skip(1)
            .map(|id| {
                let members: Vec<&EmbeddingVector> = tree
                    .node(id)
                    .unwrap()
                    .support
                    .iter()
                    .map(|s| fx.store.get(s).unwrap())
                    .collect();
                (0..fx.dim())
                    .map(|d| {
                        members.iter().map(|m| m.vector[d]).sum::<f64>() / members.len() as f64
                    })
                    .collect()
            })
            .collect();
        let want = cfg.separation * cfg.sigma;
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                let d = squared_distance(&means[i], &means[j]).unwrap().sqrt();
                assert!((d - want).abs() < 0.3 * want, "{d}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small());
        let b = generate(&small());
        assert_eq!(vectors_jsonl(&a.test), vectors_jsonl(&b.test));
        assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
        assert_eq!(a.truth_jsonl(), b.truth_jsonl());
    }
}
