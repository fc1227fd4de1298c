//! Run configuration, read from a TOML file and adjusted by command-line
//! overrides. Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use lvx_core::baselines::{BaselineKind, DEFAULT_RANDOM_NODES};
use lvx_core::llm::DEFAULT_IN_CONTEXT_EXAMPLE;
use lvx_core::metrics::MetricConfig;
use lvx_core::refine::RefinementConfig;
use lvx_core::routing::RoutingConfig;
use lvx_core::DistanceConfig;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub llm: LlmSection,
    #[serde(default)]
    pub refine: RefineSection,
    #[serde(default)]
    pub routing: RoutingSection,
    #[serde(default)]
    pub distance: DistanceSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub baselines: BaselineSection,
    /// Directory relative paths were resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub output_dir: PathBuf,
    /// One category name per line.
    pub classes: Option<PathBuf>,
    /// Support embeddings for every node, labeled `category/attribute`.
    pub supports: Option<PathBuf>,
    /// Training embeddings labeled with their category.
    pub train: Option<PathBuf>,
    /// Test embeddings labeled with their predicted category.
    pub test: Option<PathBuf>,
    /// Perturbed copies of the test embeddings, same ids.
    pub perturbed: Option<PathBuf>,
    /// Held-out embeddings for the subtree baseline; defaults to `test`.
    pub held_out: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
    /// Defaults to `<output_dir>/trees/initial`.
    pub initial_trees: Option<PathBuf>,
    /// Defaults to `<output_dir>/trees/refined`.
    pub refined_trees: Option<PathBuf>,
    /// Defaults to `<output_dir>/explanations.jsonl`.
    pub explanations: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmMode {
    #[default]
    Replay,
    Live,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    #[serde(default)]
    pub mode: LlmMode,
    /// File holding the worked example prepended to every prompt.
    pub in_context_example: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineSection {
    pub t_max: u32,
    pub prune_count: usize,
    pub grow_count: usize,
    pub k_support: usize,
    pub prune_unvisited: bool,
    pub discriminate: bool,
}

impl Default for RefineSection {
    fn default() -> Self {
        let d = RefinementConfig::default();
        RefineSection {
            t_max: d.t_max,
            prune_count: d.prune_count,
            grow_count: d.grow_count,
            k_support: d.k_support,
            prune_unvisited: d.prune_unvisited,
            discriminate: d.discriminate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingSection {
    pub k: usize,
}

impl Default for RoutingSection {
    fn default() -> Self {
        RoutingSection {
            k: RoutingConfig::DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceSection {
    pub epsilon: f64,
}

impl Default for DistanceSection {
    fn default() -> Self {
        DistanceSection {
            epsilon: DistanceConfig::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub tk_lambda: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            tk_lambda: MetricConfig::DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub enabled: Vec<BaselineKind>,
    pub random_nodes: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            enabled: BaselineKind::ALL.to_vec(),
            random_nodes: DEFAULT_RANDOM_NODES,
        }
    }
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub k: Option<usize>,
    pub t_max: Option<u32>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    /// Forces replay mode with this transcript.
    pub replay: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::validation(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads `path` and makes every relative path absolute against its
    /// directory.
    pub fn load(path: &Path) -> Result<RunConfig, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| {
            HarnessError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = RunConfig::from_toml(&text).map_err(|e| e.in_file(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        self.base = base.to_path_buf();
        self.for_each_path(|p| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        });
    }

    /// The configuration as TOML with paths relative to the config
    /// directory, so that relocating a run leaves its digest unchanged.
    pub fn portable_toml(&self) -> String {
        let mut c = self.clone();
        let base = self.base.clone();
        c.for_each_path(|p| {
            if let Ok(r) = p.strip_prefix(&base) {
                *p = r.to_path_buf();
            }
        });
        c.to_toml()
    }

    fn for_each_path(&mut self, mut f: impl FnMut(&mut PathBuf)) {
        let p = &mut self.paths;
        f(&mut p.output_dir);
        for path in [
            &mut p.classes,
            &mut p.supports,
            &mut p.train,
            &mut p.test,
            &mut p.perturbed,
            &mut p.held_out,
            &mut p.ground_truth,
            &mut p.transcript,
            &mut p.initial_trees,
            &mut p.refined_trees,
            &mut p.explanations,
            &mut self.llm.in_context_example,
        ]
        .into_iter()
        .flatten()
        {
            f(path);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(k) = o.k {
            self.routing.k = k;
        }
        if let Some(t) = o.t_max {
            self.refine.t_max = t;
        }
        if let Some(e) = o.epsilon {
            self.distance.epsilon = e;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = &o.replay {
            self.llm.mode = LlmMode::Replay;
            self.paths.transcript = Some(t.clone());
        }
    }

    /// Checks numeric parameters.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.routing_config()?;
        self.distance_config()?;
        self.metric_config()?;
        if self.baselines.random_nodes == 0 {
            return Err(HarnessError::validation(
                "baselines.random_nodes must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn routing_config(&self) -> Result<RoutingConfig, HarnessError> {
        Ok(RoutingConfig::new(self.routing.k)?)
    }

    pub fn distance_config(&self) -> Result<DistanceConfig, HarnessError> {
        Ok(DistanceConfig::new(self.distance.epsilon)?)
    }

    pub fn metric_config(&self) -> Result<MetricConfig, HarnessError> {
        Ok(MetricConfig::new(
            self.metrics.tk_lambda,
            MetricConfig::DEFAULT_ORACLE_MAX_NODES,
        )?)
    }

    pub fn in_context_example(&self) -> Result<String, HarnessError> {
        match &self.llm.in_context_example {
            None => Ok(DEFAULT_IN_CONTEXT_EXAMPLE.to_string()),
            Some(p) => fs::read_to_string(p).map_err(|e| {
                HarnessError::validation(format!(
                    "cannot read in-context example {}: {e}",
                    p.display()
                ))
            }),
        }
    }

    pub fn refinement_config(&self) -> Result<RefinementConfig, HarnessError> {
        let r = &self.refine;
        Ok(RefinementConfig {
            t_max: r.t_max,
            prune_count: r.prune_count,
            grow_count: r.grow_count,
            k_support: r.k_support,
            prune_unvisited: r.prune_unvisited,
            discriminate: r.discriminate,
            in_context_example: self.in_context_example()?,
        })
    }

    pub fn initial_trees_dir(&self) -> PathBuf {
        self.paths
            .initial_trees
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("trees").join("initial"))
    }

    pub fn refined_trees_dir(&self) -> PathBuf {
        self.paths
            .refined_trees
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("trees").join("refined"))
    }

    pub fn explanations_path(&self) -> PathBuf {
        self.paths
            .explanations
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("explanations.jsonl"))
    }
}

/// The path behind an optional config entry, which must exist.
pub fn require(entry: &Option<PathBuf>, name: &str) -> Result<PathBuf, HarnessError> {
    let p = entry
        .as_ref()
        .ok_or_else(|| HarnessError::validation(format!("config is missing paths.{name}")))?;
    if !p.exists() {
        return Err(HarnessError::validation(format!(
            "paths.{name}: {} does not exist",
            p.display()
        )));
    }
    Ok(p.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_toml("[paths]\noutput_dir = \"out\"\n").unwrap();
        assert_eq!(cfg.routing.k, 5);
        assert_eq!(cfg.refine.t_max, 5);
        assert_eq!(cfg.distance.epsilon, 1e-6);
        assert_eq!(cfg.llm.mode, LlmMode::Replay);
        assert_eq!(cfg.baselines.enabled.len(), 3);
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err =
            RunConfig::from_toml("[paths]\noutput_dir = \"o\"\n[routing]\nkk = 3\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_win() {
        let mut cfg =
            RunConfig::from_toml("[paths]\noutput_dir = \"o\"\n[llm]\nmode = \"live\"\n").unwrap();
        cfg.apply(&Overrides {
            k: Some(2),
            t_max: Some(0),
            epsilon: Some(1e-3),
            seed: Some(9),
            replay: Some("t.jsonl".into()),
        });
        assert_eq!((cfg.routing.k, cfg.refine.t_max, cfg.seed), (2, 0, 9));
        assert_eq!(cfg.llm.mode, LlmMode::Replay);
        cfg.routing.k = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_config() {
        let mut cfg =
            RunConfig::from_toml("[paths]\noutput_dir = \"o\"\ntest = \"t.jsonl\"\n").unwrap();
        cfg.resolve(Path::new("/data/run"));
        assert_eq!(cfg.paths.output_dir, Path::new("/data/run/o"));
        assert_eq!(
            cfg.paths.test.as_deref(),
            Some(Path::new("/data/run/t.jsonl"))
        );
        assert_eq!(
            cfg.refined_trees_dir(),
            Path::new("/data/run/o/trees/refined")
        );
    }
}
