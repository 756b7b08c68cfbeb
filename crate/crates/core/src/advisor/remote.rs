//! Chat-completion backend. Two calls per query: phase, then impedance.

use std::time::{Duration, Instant};

use serde_json::{json, Value};
use ureq::Agent;

use crate::error::{Error, Result};
use crate::phase::fuse;

use super::parse::{parse_impedance_response, parse_phase_response};
use super::prompt::{build_impedance_prompt, build_phase_prompt, SYSTEM_MESSAGE};
use super::{Advice, AdvisorContext};

pub const ENV_URL: &str = "ADVISOR_URL";
pub const ENV_KEY: &str = "ADVISOR_KEY";
pub const ENV_MODEL: &str = "ADVISOR_MODEL";
pub const ENV_TIMEOUT: &str = "ADVISOR_TIMEOUT";

pub const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Clone)]
pub struct RemoteConfig {
    /// Full chat-completions endpoint URL.
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl std::fmt::Debug for RemoteConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteConfig")
            .field("url", &self.url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("model", &self.model)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), api_key: None, model: DEFAULT_MODEL.into(), timeout: DEFAULT_TIMEOUT }
    }

    /// Reads `ADVISOR_URL` (required), `ADVISOR_KEY`, `ADVISOR_MODEL` and
    /// `ADVISOR_TIMEOUT` (seconds).
    pub fn from_env() -> Result<Self> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| Error::Config(format!("{ENV_URL} must be set for the remote advisor")))?;
        let mut cfg = Self::new(url);
        cfg.api_key = std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty());
        if let Ok(m) = std::env::var(ENV_MODEL) {
            cfg.model = m;
        }
        if let Ok(t) = std::env::var(ENV_TIMEOUT) {
            let secs: f64 = t
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_TIMEOUT} must be a number of seconds, got `{t}`")))?;
            if !(secs > 0.0 && secs.is_finite()) {
                return Err(Error::Config(format!("{ENV_TIMEOUT} must be positive")));
            }
            cfg.timeout = Duration::from_secs_f64(secs);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteAdvisor {
    cfg: RemoteConfig,
    agent: Agent,
}

impl RemoteAdvisor {
    pub fn new(cfg: RemoteConfig) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(true)
            .build()
            .into();
        Self { cfg, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    /// One chat completion at temperature 0; returns the first choice's content.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_MESSAGE},
                {"role": "user", "content": prompt},
            ],
        });
        let mut req = self.agent.post(&self.cfg.url);
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| Error::Advisor(e.to_string()))?;
        let v: Value = resp.body_mut().read_json().map_err(|e| Error::Advisor(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| Error::Advisor("response has no choices[0].message.content".into()))
    }

    /// Phase query, fusion with the sensed phase, then impedance query.
    pub fn query(&self, ctx: &AdvisorContext) -> Result<Advice> {
        let started = Instant::now();
        let semantic = match self.complete(&build_phase_prompt(ctx)).and_then(|t| parse_phase_response(&t)) {
            Ok(p) => Some(p),
            Err(Error::Parse(e)) => {
                log::warn!("advisor phase reply unusable: {e}");
                None
            }
            Err(e) => return Err(e),
        };
        let mut fused = ctx.clone();
        fused.phase = fuse(semantic, ctx.phase);
        let text = self.complete(&build_impedance_prompt(&fused))?;
        let mut advice = parse_impedance_response(&text, &ctx.range)?;
        advice.phase_claim = semantic;
        advice.latency = started.elapsed().as_secs_f64();
        Ok(advice)
    }
}
