use std::sync::OnceLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Artifact, SceneFacts};
use crate::pddl::tabletop_domain;
use crate::tools::registry;

/// Chat-completion endpoint settings. The key is never serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub retries: u32,
}

fn default_timeout() -> u64 {
    30_000
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: None,
            model: model.into(),
            temperature: 0.0,
            timeout_ms: default_timeout(),
            retries: 0,
        }
    }

    /// Reads `SYMWRAP_LLM_URL`, `SYMWRAP_LLM_MODEL` and `SYMWRAP_LLM_KEY`.
    pub fn from_env() -> Result<Self, String> {
        let url = std::env::var("SYMWRAP_LLM_URL").map_err(|_| "SYMWRAP_LLM_URL is not set".to_string())?;
        let model = std::env::var("SYMWRAP_LLM_MODEL").map_err(|_| "SYMWRAP_LLM_MODEL is not set".to_string())?;
        let mut cfg = Self::new(url, model);
        cfg.api_key = std::env::var("SYMWRAP_LLM_KEY").ok();
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptParts {
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Option<TokenUsage>,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TransportError {
    Connect { message: String, attempts: u32 },
    Status { code: u16, body: String, attempts: u32 },
    Timeout { attempts: u32 },
    Malformed { message: String, attempts: u32 },
}

impl TransportError {
    pub fn attempts(&self) -> u32 {
        match self {
            Self::Connect { attempts, .. }
            | Self::Status { attempts, .. }
            | Self::Timeout { attempts }
            | Self::Malformed { attempts, .. } => *attempts,
        }
    }
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Connect { message, attempts } => write!(f, "connect failed after {attempts} attempt(s): {message}"),
            Self::Status { code, body, .. } => write!(f, "endpoint returned {code}: {body}"),
            Self::Timeout { attempts } => write!(f, "timed out after {attempts} attempt(s)"),
            Self::Malformed { message, .. } => write!(f, "malformed response: {message}"),
        }
    }
}

impl std::error::Error for TransportError {}

/// Sends one chat request and returns the first choice's content untouched.
/// Connection failures, timeouts and 5xx responses are retried up to
/// `cfg.retries` times; anything else fails at once.
pub fn chat_complete(cfg: &EndpointConfig, parts: &PromptParts) -> Result<Completion, TransportError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
        .http_status_as_error(false)
        .build()
        .into();
    let body = json!({
        "model": cfg.model,
        "temperature": cfg.temperature,
        "messages": [
            {"role": "system", "content": parts.system},
            {"role": "user", "content": parts.user},
        ],
    })
    .to_string();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let mut req = agent.post(&cfg.url).header("Content-Type", "application/json");
        if let Some(key) = &cfg.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let err = match req.send(body.as_str()) {
            Ok(mut resp) => {
                let code = resp.status().as_u16();
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                if (200..300).contains(&code) {
                    return parse_response(&text, attempts);
                }
                let e = TransportError::Status { code, body: text, attempts };
                if code < 500 {
                    return Err(e);
                }
                e
            }
            Err(ureq::Error::Timeout(_)) => TransportError::Timeout { attempts },
            Err(e) => TransportError::Connect {
                message: e.to_string(),
                attempts,
            },
        };
        if attempts > cfg.retries {
            return Err(err);
        }
    }
}

fn parse_response(text: &str, attempts: u32) -> Result<Completion, TransportError> {
    let malformed = |m: &str| TransportError::Malformed {
        message: m.into(),
        attempts,
    };
    let v: Value = serde_json::from_str(text).map_err(|e| malformed(&e.to_string()))?;
    let content = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| malformed("no choices[0].message.content"))?;
    let usage = v.get("usage").and_then(|u| {
        Some(TokenUsage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64()?,
        })
    });
    Ok(Completion {
        text: content.to_string(),
        usage,
        attempts,
    })
}

/// Versioned prompt templates with `{types}`, `{predicates}`, `{tools}`,
/// `{scene}` and `{instruction}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Prompts {
    pub version: u32,
    pub pddl_system: String,
    pub direct_system: String,
    pub user: String,
}

pub const BUNDLED_PROMPTS: &str = include_str!("../../data/prompts.toml");

impl Prompts {
    pub fn bundled() -> &'static Prompts {
        static P: OnceLock<Prompts> = OnceLock::new();
        P.get_or_init(|| toml::from_str(BUNDLED_PROMPTS).expect("bundled prompts parse"))
    }

    pub(super) fn render(&self, artifact: Artifact, instruction: &str, scene: &SceneFacts) -> PromptParts {
        let domain = tabletop_domain();
        let types: Vec<String> = domain.types.iter().map(|t| format!("{} - {}", t.name, t.parent)).collect();
        let predicates: Vec<String> = domain
            .predicates
            .iter()
            .map(|p| {
                let params: String = p.params.iter().map(|t| format!(" {} - {}", t.name, t.ty)).collect();
                format!("({}{params})", p.name)
            })
            .collect();
        let tools: Vec<String> = registry()
            .iter()
            .map(|t| {
                let args: Vec<String> = t.args.iter().map(|a| serde_json::to_string(a).unwrap()).collect();
                format!("{} args={} pre={}", t.name, args.join(","), t.precondition)
            })
            .collect();
        let system = match artifact {
            Artifact::Problem => &self.pddl_system,
            Artifact::Subtasks => &self.direct_system,
        };
        PromptParts {
            system: system
                .replace("{types}", &types.join(", "))
                .replace("{predicates}", &predicates.join("\n"))
                .replace("{tools}", &tools.join("\n"))
                .trim()
                .to_string(),
            user: self
                .user
                .replace("{scene}", &serde_json::to_string_pretty(scene).unwrap())
                .replace("{instruction}", instruction)
                .trim()
                .to_string(),
        }
    }
}
