use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    check_action, fallback_action, parse_action, render_prompt, Agent, Attempt, Decision, Message,
    Observation, TemplateSet,
};

fn default_temperature() -> f64 {
    0.7
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

/// Chat-completion endpoint settings. Secrets are referenced by environment
/// variable name only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSpec {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_header: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    /// Prefix such as `Bearer` placed before the secret.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_scheme: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Repair prompts after the first attempt.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

impl RemoteSpec {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> RemoteSpec {
        RemoteSpec {
            endpoint: endpoint.into(),
            model: model.into(),
            auth_header: None,
            auth_env: None,
            auth_scheme: None,
            temperature: default_temperature(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(format!("endpoint `{}` is not an http(s) URL", self.endpoint));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err("timeout_secs must be positive".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err("temperature must be a non-negative number".into());
        }
        if self.auth_header.is_some() != self.auth_env.is_some() {
            return Err("auth_header and auth_env must be given together".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Request(String),
    #[error("malformed completion body: {0}")]
    Body(String),
    #[error("environment variable `{0}` is not set")]
    MissingSecret(String),
}

/// Agent backed by a chat-completion endpoint.
pub struct RemoteAgent {
    spec: RemoteSpec,
    templates: TemplateSet,
    http: ureq::Agent,
}

impl RemoteAgent {
    pub fn new(spec: RemoteSpec, templates: TemplateSet) -> RemoteAgent {
        let http: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(spec.timeout_secs.max(0.001))))
            .build()
            .into();
        RemoteAgent {
            spec,
            templates,
            http,
        }
    }

    pub fn complete(&self, messages: &[Message]) -> Result<String, TransportError> {
        let body = json!({
            "model": self.spec.model,
            "messages": messages,
            "temperature": self.spec.temperature,
        });
        let mut request = self.http.post(&self.spec.endpoint);
        if let (Some(header), Some(var)) = (&self.spec.auth_header, &self.spec.auth_env) {
            let secret =
                std::env::var(var).map_err(|_| TransportError::MissingSecret(var.clone()))?;
            let value = match &self.spec.auth_scheme {
                Some(scheme) => format!("{scheme} {secret}"),
                None => secret,
            };
            request = request.header(header.as_str(), value.as_str());
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| TransportError::Request(e.to_string()))?;
        let reply: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Body(e.to_string()))?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| TransportError::Body("missing choices[0].message.content".into()))
    }

    /// Prompts, parses and validates, repairing up to `max_retries` times.
    ///
    /// Returns `Err` only when no attempt reached the endpoint.
    pub fn remote_decide(&self, obs: &Observation) -> Result<Decision, TransportError> {
        let messages = match render_prompt(obs, &self.templates) {
            Ok(m) => m,
            Err(e) => {
                let mut d = Decision::fallback(obs);
                d.attempts.push(Attempt {
                    raw: String::new(),
                    error: Some(e.to_string()),
                });
                return Ok(d);
            }
        };
        let mut conversation = messages.clone();
        let mut attempts = Vec::new();
        let mut last_transport = None;
        let mut reached = false;
        for _ in 0..=self.spec.max_retries {
            let raw = match self.complete(&conversation) {
                Ok(raw) => raw,
                Err(e) => {
                    log::warn!("seat {}: {e}", obs.seat);
                    attempts.push(Attempt {
                        raw: String::new(),
                        error: Some(e.to_string()),
                    });
                    last_transport = Some(e);
                    continue;
                }
            };
            reached = true;
            let outcome = parse_action(&raw, obs.stage)
                .map_err(|e| e.reason)
                .and_then(|a| check_action(obs, &a).map(|_| a).map_err(|v| v.message));
            match outcome {
                Ok(action) => {
                    attempts.push(Attempt { raw, error: None });
                    return Ok(Decision {
                        action,
                        messages,
                        attempts,
                        fallback: false,
                        degraded: false,
                    });
                }
                Err(reason) => {
                    attempts.push(Attempt {
                        raw: raw.clone(),
                        error: Some(reason.clone()),
                    });
                    conversation.push(Message::assistant(raw));
                    conversation.push(Message::user(format!(
                        "Your reply could not be used: {reason}. Answer again with only the JSON object."
                    )));
                }
            }
        }
        if !reached {
            if let Some(e) = last_transport {
                return Err(e);
            }
        }
        Ok(Decision {
            action: fallback_action(obs),
            messages,
            attempts,
            fallback: true,
            degraded: false,
        })
    }
}

impl Agent for RemoteAgent {
    fn decide(&mut self, obs: &Observation) -> Decision {
        match self.remote_decide(obs) {
            Ok(d) => d,
            Err(e) => {
                let mut d = Decision::fallback(obs);
                d.degraded = true;
                d.attempts.push(Attempt {
                    raw: String::new(),
                    error: Some(e.to_string()),
                });
                d
            }
        }
    }

    fn interactive(&self) -> bool {
        true
    }
}
