//! Text-generation backend abstraction. The core crate only defines the
//! contract; concrete transports (HTTP, scripted) live with their callers.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// What a completion request is for; errors carry this so a failed call can
/// be attributed to a pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestTag {
    DoctorTurn,
    PatientTurn,
    Classifier,
    FedGeneration,
}

impl core::fmt::Display for RequestTag {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let name = match self {
            RequestTag::DoctorTurn => "doctor_turn",
            RequestTag::PatientTurn => "patient_turn",
            RequestTag::Classifier => "classifier",
            RequestTag::FedGeneration => "fed_generation",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    /// "system" | "user" | "assistant" on the wire.
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub tag: RequestTag,
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    /// Soft output budget, enforced by truncation on the caller side.
    pub max_chars: usize,
    pub temperature: f64,
}

/// Transport settings for a remote backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key; the key itself
    /// never appears in config files.
    pub auth_env: String,
    pub timeout_s: u64,
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_mult: f64,
    pub max_concurrent: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: String::from("http://localhost:8080/v1/chat/completions"),
            model: String::from("local-chat"),
            auth_env: String::from("DIASIM_API_KEY"),
            timeout_s: 30,
            max_retries: 3,
            backoff_initial_ms: 250,
            backoff_mult: 2.0,
            max_concurrent: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// The request did not complete within the configured timeout.
    Timeout { tag: RequestTag },
    /// Transport-level or non-success HTTP response.
    Http { tag: RequestTag, status: Option<u16>, message: String },
    /// The response arrived but could not be interpreted.
    Malformed { tag: RequestTag, message: String },
}

impl BackendError {
    pub fn tag(&self) -> RequestTag {
        match self {
            BackendError::Timeout { tag }
            | BackendError::Http { tag, .. }
            | BackendError::Malformed { tag, .. } => *tag,
        }
    }
}

impl core::fmt::Display for BackendError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BackendError::Timeout { tag } => write!(f, "backend timeout during {tag}"),
            BackendError::Http { tag, status: Some(s), message } => {
                write!(f, "backend HTTP {s} during {tag}: {message}")
            }
            BackendError::Http { tag, status: None, message } => {
                write!(f, "backend transport error during {tag}: {message}")
            }
            BackendError::Malformed { tag, message } => {
                write!(f, "malformed backend response during {tag}: {message}")
            }
        }
    }
}

/// A synchronous completion provider.
pub trait Backend {
    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError>;
}
