use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatError, ChatMessage, Role, Transcript};

pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    /// Extra attempts after a transport failure or 5xx.
    pub retries: u32,
    pub timeout_secs: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            retries: 1,
            timeout_secs: 60,
        }
    }
}

/// Client for any endpoint speaking the chat-completions JSON shape.
pub struct RemoteChat {
    config: RemoteConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct Response {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    role: Option<Role>,
    content: Option<String>,
}

impl RemoteChat {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Request<'_>) -> Result<ChatMessage, ChatError> {
        let mut req = self.agent.post(&self.endpoint());
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ChatError::Status { status, body: text });
        }
        decode_response(&text)
    }
}

fn decode_response(text: &str) -> Result<ChatMessage, ChatError> {
    let parsed: Response =
        serde_json::from_str(text).map_err(|e| ChatError::Malformed(e.to_string()))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ChatError::Malformed("no choices".into()))?;
    if let Some(role) = choice.message.role {
        if role != Role::Assistant {
            return Err(ChatError::Malformed(format!("unexpected role {role:?}")));
        }
    }
    let content = choice
        .message
        .content
        .filter(|c| !c.trim().is_empty())
        .ok_or_else(|| ChatError::Malformed("empty content".into()))?;
    ChatMessage::assistant(content)
}

impl ChatBackend for RemoteChat {
    fn complete(&self, transcript: &Transcript) -> Result<ChatMessage, ChatError> {
        let body = Request {
            model: &self.config.model,
            temperature: self.config.temperature,
            messages: transcript.messages(),
        };
        let mut last = None;
        for _ in 0..=self.config.retries {
            match self.attempt(&body) {
                Ok(m) => return Ok(m),
                Err(e @ ChatError::Transport(_)) => last = Some(e),
                Err(ChatError::Status { status, body }) if status >= 500 => {
                    last = Some(ChatError::Status { status, body })
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn kind(&self) -> &'static str {
        "remote"
    }
}
