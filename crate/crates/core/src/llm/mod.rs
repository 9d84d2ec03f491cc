//! Language-model side: prompts, chat backends, program extraction, the
//! stand-alone solving loop and the syntactic feedback hook.

mod backend;
mod extract;
mod feedback;
mod prompts;
mod standalone;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    make_backend, query, Backend, BackendConfig, BackendKind, MockBackend, RemoteBackend, DEFAULT_TOKEN_ENV,
};
pub use extract::{
    extract_all, extract_program, helper_to_fundef, lisp_to_smtlib, ConvertError, ExtractError, ExtractedFun,
};
pub use feedback::SyntacticFeedback;
pub use prompts::{problem_text, render_prompt, PromptContext, PromptKind};
pub use standalone::{standalone_solve, Conversion, StandaloneError, StandaloneResult, DEFAULT_ATTEMPTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// Append-only chat history.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Conversation {
    messages: Vec<Message>,
}

impl Conversation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, role: Role, content: impl Into<String>) {
        self.messages.push(Message {
            role,
            content: content.into(),
        });
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("prompt needs {0}")]
    MissingContext(&'static str),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("rate limited by backend")]
    RateLimited,
    #[error("mock script has no replies left")]
    ScriptExhausted,
    #[error("bad mock script: {0}")]
    Script(String),
    #[error("backend configuration: {0}")]
    Config(String),
}
