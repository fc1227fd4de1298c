//! Language-model interactions: prompt templates, the request/response
//! transcript, and clients that either call a chat-completion endpoint or
//! replay a recorded transcript.

mod client;
mod prompt;
mod response;
mod transcript;

pub use client::{LiveClient, LiveConfig, LlmClient, ReplayClient};
pub use prompt::{render_prompt, PromptKind, PromptTemplate, DEFAULT_IN_CONTEXT_EXAMPLE};
pub use response::{extract_json_object, parse_attribute_response};
pub use transcript::{RequestKey, Transcript, TranscriptRecord};

use thiserror::Error;

use crate::tree::TreeError;

pub const ENV_BASE_URL: &str = "LVX_LLM_BASE_URL";
pub const ENV_MODEL: &str = "LVX_LLM_MODEL";
pub const ENV_API_KEY: &str = "LVX_LLM_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("placeholder {{{0}}} is not bound")]
    UnboundPlaceholder(String),
    #[error("no recorded response for {0}")]
    ReplayMiss(RequestKey),
    #[error("duplicate transcript key {0}")]
    DuplicateKey(RequestKey),
    #[error("transcript line {line}: {message}")]
    Transcript { line: usize, message: String },
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    Protocol(String),
    #[error("missing environment variable {0}")]
    MissingEnv(&'static str),
    #[error("response contains no JSON object")]
    NoJsonObject,
    #[error("response JSON is not a valid attribute tree: {0}")]
    BadFragment(#[from] TreeError),
    #[error("transcript I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl LlmError {
    /// Errors a caller may skip (a bad answer) as opposed to ones that stop a
    /// run (a missing recording, an unreachable provider).
    pub fn is_unparsable_response(&self) -> bool {
        matches!(self, LlmError::NoJsonObject | LlmError::BadFragment(_))
    }
}
