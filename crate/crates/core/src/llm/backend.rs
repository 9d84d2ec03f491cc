use std::collections::VecDeque;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Conversation, LlmError, Message, Role};

pub const DEFAULT_TOKEN_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model: String,
    /// Unset means the mode's default.
    pub temperature: Option<f64>,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// First retry delay; doubled on every further attempt.
    pub retry_backoff_s: f64,
    pub endpoint: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    /// Mock replies, one JSON object per line.
    pub script: Option<PathBuf>,
    /// Appends every exchange to this file as JSON lines.
    pub transcript: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Remote,
            model: "gpt-3.5-turbo".into(),
            temperature: None,
            timeout_s: 60.0,
            max_retries: 3,
            retry_backoff_s: 1.0,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            token_env: DEFAULT_TOKEN_ENV.into(),
            script: None,
            transcript: None,
        }
    }
}

pub trait Backend: Send {
    /// The assistant's reply to the conversation so far.
    fn complete(&mut self, conv: &Conversation) -> Result<String, LlmError>;
}

/// Sends `prompt` as a user message and records the reply.
pub fn query(backend: &mut dyn Backend, conv: &mut Conversation, prompt: &str) -> Result<String, LlmError> {
    conv.push(Role::User, prompt);
    let reply = backend.complete(conv)?;
    conv.push(Role::Assistant, reply.clone());
    Ok(reply)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptLine {
    reply: Option<String>,
    error: Option<String>,
}

/// Replays canned replies in order.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    replies: VecDeque<Result<String, LlmError>>,
}

impl MockBackend {
    pub fn new(replies: impl IntoIterator<Item = String>) -> MockBackend {
        MockBackend {
            replies: replies.into_iter().map(Ok).collect(),
        }
    }

    /// Parses a script: `{"reply": "..."}` per line, or `{"error": "rate_limited"}`
    /// / `{"error": "unavailable"}` to simulate failures. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<MockBackend, LlmError> {
        let mut replies = VecDeque::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ScriptLine =
                serde_json::from_str(line).map_err(|e| LlmError::Script(format!("line {}: {e}", i + 1)))?;
            replies.push_back(match (rec.reply, rec.error.as_deref()) {
                (Some(r), None) => Ok(r),
                (None, Some("rate_limited")) => Err(LlmError::RateLimited),
                (None, Some(other)) => Err(LlmError::BackendUnavailable(other.to_string())),
                _ => return Err(LlmError::Script(format!("line {}: need exactly one of reply, error", i + 1))),
            });
        }
        Ok(MockBackend { replies })
    }

    pub fn remaining(&self) -> usize {
        self.replies.len()
    }
}

impl Backend for MockBackend {
    fn complete(&mut self, _conv: &Conversation) -> Result<String, LlmError> {
        self.replies.pop_front().unwrap_or(Err(LlmError::ScriptExhausted))
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [Message],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

/// Chat-completion endpoint over HTTPS.
pub struct RemoteBackend {
    cfg: BackendConfig,
    agent: ureq::Agent,
    token: Option<String>,
}

impl RemoteBackend {
    pub fn new(cfg: BackendConfig) -> RemoteBackend {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s.max(0.0))))
            .http_status_as_error(false)
            .build()
            .into();
        let token = std::env::var(&cfg.token_env).ok();
        RemoteBackend { cfg, agent, token }
    }

    fn attempt(&self, conv: &Conversation) -> Result<String, LlmError> {
        let body = ChatRequest {
            model: &self.cfg.model,
            temperature: self.cfg.temperature.unwrap_or(1.0),
            messages: conv.messages(),
        };
        let mut req = self.agent.post(&self.cfg.endpoint);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 {
            return Err(LlmError::RateLimited);
        }
        if status >= 400 {
            return Err(LlmError::BackendUnavailable(format!("HTTP {status}")));
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::BackendUnavailable(format!("bad response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .find_map(|c| c.message.content)
            .ok_or_else(|| LlmError::BackendUnavailable("response without assistant message".into()))
    }
}

impl Backend for RemoteBackend {
    fn complete(&mut self, conv: &Conversation) -> Result<String, LlmError> {
        let mut delay = self.cfg.retry_backoff_s.max(0.0);
        let mut last = LlmError::BackendUnavailable("no attempt made".into());
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                thread::sleep(Duration::from_secs_f64(delay));
                delay *= 2.0;
            }
            match self.attempt(conv) {
                Ok(r) => return Ok(r),
                Err(e) => {
                    log::warn!("LLM request failed (attempt {}): {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(last)
    }
}

#[derive(Serialize)]
struct TranscriptEntry<'a> {
    prompt: &'a str,
    reply: Result<&'a str, String>,
}

struct Logged {
    inner: Box<dyn Backend>,
    path: PathBuf,
}

impl Backend for Logged {
    fn complete(&mut self, conv: &Conversation) -> Result<String, LlmError> {
        let r = self.inner.complete(conv);
        let prompt = conv.messages().last().map(|m| m.content.as_str()).unwrap_or("");
        let entry = TranscriptEntry {
            prompt,
            reply: r.as_deref().map_err(|e| e.to_string()),
        };
        let line = serde_json::to_string(&entry).expect("serializable");
        match OpenOptions::new().create(true).append(true).open(&self.path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{line}");
            }
            Err(e) => log::warn!("cannot write transcript {}: {e}", self.path.display()),
        }
        r
    }
}

pub fn make_backend(cfg: &BackendConfig) -> Result<Box<dyn Backend>, LlmError> {
    if let Some(t) = cfg.temperature.filter(|t| !(0.0..=2.0).contains(t)) {
        return Err(LlmError::Config(format!("temperature {t} outside [0, 2]")));
    }
    let inner: Box<dyn Backend> = match cfg.kind {
        BackendKind::Mock => {
            let path = cfg
                .script
                .as_ref()
                .ok_or_else(|| LlmError::Config("mock backend needs a script path".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))?;
            Box::new(MockBackend::parse(&text)?)
        }
        BackendKind::Remote => Box::new(RemoteBackend::new(cfg.clone())),
    };
    Ok(match &cfg.transcript {
        Some(path) => Box::new(Logged {
            inner,
            path: path.clone(),
        }),
        None => inner,
    })
}
