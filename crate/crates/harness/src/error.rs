use std::path::Path;

use lvx_core::baselines::BaselineError;
use lvx_core::embedding::EmbeddingError;
use lvx_core::llm::LlmError;
use lvx_core::metrics::MetricError;
use lvx_core::refine::RefineError;
use lvx_core::routing::RoutingError;
use lvx_core::tree::TreeError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unexpected I/O while writing outputs.
    Io,
    /// Bad configuration or malformed input file.
    Validation,
    /// Inputs that parse but do not fit together: unknown categories,
    /// unmatched sample ids, dimension conflicts.
    DataMismatch,
    /// The language model could not be reached or replayed.
    Llm,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Io => 1,
            ErrorKind::Validation => 2,
            ErrorKind::DataMismatch => 3,
            ErrorKind::Llm => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct HarnessError {
    pub kind: ErrorKind,
    pub message: String,
}

impl HarnessError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> HarnessError {
        HarnessError {
            kind,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> HarnessError {
        HarnessError::new(ErrorKind::Validation, message)
    }

    pub fn mismatch(message: impl Into<String>) -> HarnessError {
        HarnessError::new(ErrorKind::DataMismatch, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(mut self, path: &Path) -> HarnessError {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }

    pub fn io(path: &Path, e: std::io::Error) -> HarnessError {
        HarnessError::new(ErrorKind::Io, format!("{}: {e}", path.display()))
    }
}

impl From<TreeError> for HarnessError {
    fn from(e: TreeError) -> Self {
        HarnessError::validation(e.to_string())
    }
}

impl From<EmbeddingError> for HarnessError {
    fn from(e: EmbeddingError) -> Self {
        let kind = match e {
            EmbeddingError::UnknownId(_) | EmbeddingError::Dimension(..) => ErrorKind::DataMismatch,
            _ => ErrorKind::Validation,
        };
        HarnessError::new(kind, e.to_string())
    }
}

impl From<LlmError> for HarnessError {
    fn from(e: LlmError) -> Self {
        let kind = match e {
            LlmError::Transcript { .. } | LlmError::DuplicateKey(_) => ErrorKind::Validation,
            _ => ErrorKind::Llm,
        };
        HarnessError::new(kind, e.to_string())
    }
}

impl From<RefineError> for HarnessError {
    fn from(e: RefineError) -> Self {
        match e {
            RefineError::Llm(e) => e.into(),
            RefineError::Embedding(e) => e.into(),
            RefineError::Tree(e) => e.into(),
            other => HarnessError::mismatch(other.to_string()),
        }
    }
}

impl From<RoutingError> for HarnessError {
    fn from(e: RoutingError) -> Self {
        match e {
            RoutingError::Embedding(e) => e.into(),
            RoutingError::Tree(e) => e.into(),
            RoutingError::ZeroK => HarnessError::validation(e.to_string()),
            other => HarnessError::mismatch(other.to_string()),
        }
    }
}

impl From<BaselineError> for HarnessError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Routing(e) => e.into(),
            BaselineError::Tree(e) => e.into(),
            BaselineError::UnknownKind(_) => HarnessError::validation(e.to_string()),
            other => HarnessError::mismatch(other.to_string()),
        }
    }
}

impl From<MetricError> for HarnessError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::InvalidLambda(_) => HarnessError::validation(e.to_string()),
            MetricError::Embedding(e) => e.into(),
            other => HarnessError::mismatch(other.to_string()),
        }
    }
}
