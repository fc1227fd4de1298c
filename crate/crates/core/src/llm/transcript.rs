use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LlmError, PromptKind};

/// Identity of one model request. Keys are unique within a transcript, which
/// lets concurrent requests replay deterministically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RequestKey {
    pub kind: PromptKind,
    pub category: String,
    pub node: String,
    pub iteration: u32,
}

impl RequestKey {
    pub fn new(kind: PromptKind, category: &str, node: &str, iteration: u32) -> RequestKey {
        RequestKey {
            kind,
            category: category.to_string(),
            node: node.to_string(),
            iteration,
        }
    }
}

impl fmt::Display for RequestKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, category {:?}, node {:?}, iteration {})",
            self.kind, self.category, self.node, self.iteration
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub key: RequestKey,
    pub prompt: String,
    pub response: String,
}

/// Ordered request/response log, stored as JSONL.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
    index: HashMap<RequestKey, usize>,
}

impl Transcript {
    pub fn new() -> Transcript {
        Transcript::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn get(&self, key: &RequestKey) -> Option<&TranscriptRecord> {
        self.index.get(key).map(|&i| &self.records[i])
    }

    pub fn push(&mut self, record: TranscriptRecord) -> Result<(), LlmError> {
        if self.index.contains_key(&record.key) {
            return Err(LlmError::DuplicateKey(record.key));
        }
        self.index.insert(record.key.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn from_jsonl(text: &str) -> Result<Transcript, LlmError> {
        let mut t = Transcript::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord =
                serde_json::from_str(line).map_err(|e| LlmError::Transcript {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            t.push(record)?;
        }
        Ok(t)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Transcript, LlmError> {
        Transcript::from_jsonl(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LlmError> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}
