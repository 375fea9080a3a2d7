//! Chat-completions client for the remote planner.

use std::time::Duration;

use motion_agent_core::agent::{ChatRequest, ChatTransport, Role};
use serde_json::{json, Value};

use crate::config::PlannerConfig;

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpTransport {
    /// Reads the API key from the configured environment variable, if set.
    pub fn new(cfg: &PlannerConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs.max(1)))
            .build()
            .expect("http client");
        Self {
            client,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            api_key: std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty()),
        }
    }
}

pub fn request_body(model: &str, request: &ChatRequest) -> Value {
    let mut messages = vec![json!({ "role": "system", "content": request.system })];
    for m in &request.messages {
        let role = match m.role {
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        messages.push(json!({ "role": role, "content": m.content }));
    }
    json!({ "model": model, "temperature": 0, "messages": messages })
}

impl ChatTransport for HttpTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, String> {
        let mut req = self.client.post(&self.endpoint).json(&request_body(&self.model, request));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().and_then(|r| r.error_for_status()).map_err(|e| e.to_string())?;
        let body: Value = resp.json().map_err(|e| e.to_string())?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| format!("reply has no choices[0].message.content: {body}"))
    }
}
