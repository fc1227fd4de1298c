//! Run manifests: enough to repeat a command bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::HarnessError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn file_digest(path: &Path) -> Result<String, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Seed for one sample, derived from the run seed and the sample id so that
/// results do not depend on sample order.
pub fn sample_seed(seed: u64, sample_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(sample_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub llm_mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript_digest: Option<String>,
    /// Input file name to content digest.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory, to content digest.
    pub outputs: BTreeMap<String, String>,
    /// Command-specific settings.
    pub details: serde_json::Value,
    #[serde(skip)]
    base: PathBuf,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Manifest {
        Manifest {
            command: command.to_string(),
            config_digest: sha256_hex(cfg.portable_toml().as_bytes()),
            seed: cfg.seed,
            llm_mode: format!("{:?}", cfg.llm.mode).to_lowercase(),
            transcript_digest: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            details: serde_json::Value::Null,
            base: cfg.base.clone(),
        }
    }

    /// `path` as recorded in the manifest: relative to the config directory
    /// when it lies below it.
    pub fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.base)
            .unwrap_or(path)
            .display()
            .to_string()
    }

    pub fn input(&mut self, path: &Path) -> Result<(), HarnessError> {
        let name = self.relative(path);
        if path.is_dir() {
            let mut entries: Vec<_> = fs::read_dir(path)
                .map_err(|e| HarnessError::io(path, e))?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            let mut all = Vec::new();
            for e in entries {
                all.extend(e.file_name().unwrap_or_default().as_encoded_bytes());
                all.extend(file_digest(&e)?.as_bytes());
            }
            self.inputs.insert(name, sha256_hex(&all));
        } else {
            self.inputs.insert(name, file_digest(path)?);
        }
        Ok(())
    }

    pub fn output(&mut self, output_dir: &Path, path: &Path) -> Result<(), HarnessError> {
        let rel = path.strip_prefix(output_dir).unwrap_or(path);
        self.outputs
            .insert(rel.display().to_string(), file_digest(path)?);
        Ok(())
    }

    /// Writes `<output_dir>/manifests/<command>.json`.
    pub fn write(&self, output_dir: &Path) -> Result<PathBuf, HarnessError> {
        let dir = output_dir.join("manifests");
        fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        let path = dir.join(format!("{}.json", self.command));
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}
