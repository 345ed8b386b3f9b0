//! Chat-completion client used as a label oracle.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that answers a labeling prompt with free text.
pub trait LabelOracle: Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

impl<F> LabelOracle for F
where
    F: Fn(&str) -> Result<String> + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String> {
        self(prompt)
    }
}

#[derive(Clone, Debug)]
pub struct LabelClientConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    pub retries: usize,
    /// Environment variable holding the bearer token; no auth header when unset.
    pub token_env: Option<String>,
    pub backoff_base: Duration,
}

impl LabelClientConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout: Duration::from_secs(60),
            retries: 3,
            token_env: None,
            backoff_base: Duration::from_millis(250),
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

pub struct HttpLabelOracle {
    cfg: LabelClientConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpLabelOracle {
    pub fn new(cfg: LabelClientConfig) -> Result<Self> {
        let token = match &cfg.token_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| Error::Service(format!("auth token variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, token, agent })
    }

    fn send_once(&self, body: &ChatRequest) -> std::result::Result<String, String> {
        let mut req = self.agent.post(&self.cfg.endpoint);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {}", status.as_u16()));
        }
        let parsed: ChatResponse = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| "response has no choices".to_string())
    }
}

impl LabelOracle for HttpLabelOracle {
    fn complete(&self, prompt: &str) -> Result<String> {
        let body = ChatRequest {
            model: self.cfg.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.into(),
            }],
        };
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                std::thread::sleep(self.cfg.backoff_base * 2u32.saturating_pow(attempt as u32 - 1));
            }
            match self.send_once(&body) {
                Ok(text) => return Ok(text),
                Err(e) => last = e,
            }
            log::warn!("label request attempt {} failed: {last}", attempt + 1);
        }
        Err(Error::Service(format!(
            "label request to {} failed after {} attempt(s): {last}",
            self.cfg.endpoint,
            self.cfg.retries + 1
        )))
    }
}
