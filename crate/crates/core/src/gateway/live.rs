//! HTTP backend.
//!
//! Generation and prompted tasks go to OpenAI-style completion endpoints;
//! NLI and QA go to inference endpoints taking `{premise, hypothesis}` and
//! `{question, context}` respectively.

use std::thread;
use std::time::Duration;

use log::{debug, warn};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{Backend, BackendConfig, EntailmentLabel, GatewayError, Label, QaResult, TemplateId};

pub const API_KEY_ENV: &str = "RELIC_API_KEY";

#[derive(Debug)]
pub struct LiveBackend {
    client: Client,
    api_key: Option<String>,
    backoff: Duration,
}

impl LiveBackend {
    /// Reads the credential from `RELIC_API_KEY`; its absence is an error.
    pub fn from_env(config: &BackendConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| GatewayError::MissingCredential(API_KEY_ENV.into()))?;
        Self::new(config, Some(key))
    }

    pub fn new(config: &BackendConfig, api_key: Option<String>) -> Result<Self, GatewayError> {
        config.validate()?;
        let client = Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            client,
            api_key,
            backoff: Duration::from_millis(250),
        })
    }

    /// Base delay between retries; doubles per attempt.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn post(&self, url: &str, body: &Value, config: &BackendConfig) -> Result<Value, GatewayError> {
        let attempts = config.retry_budget + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            let mut req = self.client.post(url).json(body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp
                            .json::<Value>()
                            .map_err(|e| GatewayError::InvalidResponse(format!("{url}: {e}")));
                    }
                    last = format!("{url} returned {status}");
                    if !retryable(status) {
                        return Err(GatewayError::Transport {
                            attempts: attempt,
                            message: last,
                        });
                    }
                }
                Err(e) => last = format!("{url}: {e}"),
            }
            if attempt < attempts {
                let delay = self.backoff * 2u32.saturating_pow(attempt - 1);
                debug!("attempt {attempt}/{attempts} failed ({last}); retrying in {delay:?}");
                thread::sleep(delay);
            }
        }
        warn!("giving up after {attempts} attempt(s): {last}");
        Err(GatewayError::Transport {
            attempts,
            message: last,
        })
    }
}

fn retryable(status: StatusCode) -> bool {
    status.is_server_error()
        || status == StatusCode::TOO_MANY_REQUESTS
        || status == StatusCode::REQUEST_TIMEOUT
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: usize,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    message: Option<Message>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl Choice {
    fn content(self) -> Option<String> {
        self.text.or_else(|| self.message.and_then(|m| m.content))
    }
}

fn choices(value: Value) -> Result<Vec<String>, GatewayError> {
    #[derive(Deserialize)]
    struct Resp {
        choices: Vec<Choice>,
    }
    let mut resp: Resp = serde_json::from_value(value)
        .map_err(|e| GatewayError::InvalidResponse(format!("completion body: {e}")))?;
    resp.choices.sort_by_key(|c| c.index);
    resp.choices
        .into_iter()
        .map(|c| {
            c.content()
                .ok_or_else(|| GatewayError::InvalidResponse("choice without content".into()))
        })
        .collect()
}

fn is_chat(url: &str) -> bool {
    url.trim_end_matches('/').ends_with("chat/completions")
}

fn completion_body(
    url: &str,
    model: &str,
    prompt: &str,
    n: usize,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
) -> Value {
    if is_chat(url) {
        json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "n": n,
            "temperature": temperature,
            "top_p": top_p,
            "max_tokens": max_tokens,
        })
    } else {
        json!({
            "model": model,
            "prompt": prompt,
            "n": n,
            "temperature": temperature,
            "top_p": top_p,
            "max_tokens": max_tokens,
        })
    }
}

/// Accepts `{"label": L, "score": p}` or `{"labels": [..], "scores": [..]}`
/// (a single object or a one-element array of either).
fn parse_nli(value: Value) -> Result<EntailmentLabel, GatewayError> {
    let value = match value {
        Value::Array(mut items) if items.len() == 1 => items.remove(0),
        v => v,
    };
    if let (Some(labels), Some(scores)) = (value.get("labels"), value.get("scores")) {
        let labels: Vec<String> = serde_json::from_value(labels.clone())
            .map_err(|e| GatewayError::InvalidResponse(format!("nli labels: {e}")))?;
        let scores: Vec<f64> = serde_json::from_value(scores.clone())
            .map_err(|e| GatewayError::InvalidResponse(format!("nli scores: {e}")))?;
        if labels.is_empty() || labels.len() != scores.len() {
            return Err(GatewayError::InvalidResponse(
                "nli labels and scores differ in length".into(),
            ));
        }
        let (best, score) = labels
            .iter()
            .zip(scores.iter())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        return Ok(EntailmentLabel {
            label: best.parse()?,
            confidence: score.clamp(0.0, 1.0),
        });
    }
    let label = value
        .get("label")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::InvalidResponse("nli body lacks 'label'".into()))?;
    let confidence = value.get("score").and_then(Value::as_f64).unwrap_or(1.0);
    Ok(EntailmentLabel {
        label: label.parse::<Label>()?,
        confidence: confidence.clamp(0.0, 1.0),
    })
}

fn parse_qa(value: Value, passage: &str) -> Result<QaResult, GatewayError> {
    #[derive(Deserialize)]
    struct Resp {
        #[serde(default)]
        answer: String,
        #[serde(default)]
        start: Option<usize>,
        #[serde(default)]
        end: Option<usize>,
        #[serde(default)]
        score: f64,
    }
    let r: Resp = serde_json::from_value(value)
        .map_err(|e| GatewayError::InvalidResponse(format!("qa body: {e}")))?;
    let confidence = r.score.clamp(0.0, 1.0);
    match (r.start, r.end) {
        (Some(start), Some(end)) if !r.answer.is_empty() && start < end => {
            // Some servers return the span untrimmed.
            let text = crate::text::char_slice(passage, start, end);
            let lead = text.chars().take_while(|c| c.is_whitespace()).count();
            let trail = text.chars().rev().take_while(|c| c.is_whitespace()).count();
            let (start, end) = (start + lead, end.saturating_sub(trail));
            if start >= end {
                return Ok(QaResult::not_found(confidence));
            }
            Ok(QaResult {
                found: true,
                answer_text: crate::text::char_slice(passage, start, end).to_string(),
                start: Some(start),
                end: Some(end),
                confidence,
            })
        }
        _ => Ok(QaResult::not_found(confidence)),
    }
}

impl Backend for LiveBackend {
    fn generate(
        &self,
        prompt: &str,
        n: usize,
        config: &BackendConfig,
    ) -> Result<Vec<String>, GatewayError> {
        let body = completion_body(
            &config.generator_endpoint,
            &config.generator_model,
            prompt,
            n,
            config.temperature,
            config.top_p,
            config.max_tokens,
        );
        let texts = choices(self.post(&config.generator_endpoint, &body, config)?)?;
        Ok(texts.into_iter().map(|t| t.trim().to_string()).collect())
    }

    fn nli(
        &self,
        premise: &str,
        hypothesis: &str,
        config: &BackendConfig,
    ) -> Result<EntailmentLabel, GatewayError> {
        let body = json!({"model": config.nli_model, "premise": premise, "hypothesis": hypothesis});
        parse_nli(self.post(&config.nli_endpoint, &body, config)?)
    }

    fn answer(
        &self,
        question: &str,
        passage: &str,
        config: &BackendConfig,
    ) -> Result<QaResult, GatewayError> {
        let body = json!({"model": config.qa_model, "question": question, "context": passage});
        parse_qa(self.post(&config.qa_endpoint, &body, config)?, passage)
    }

    fn complete(
        &self,
        _template: TemplateId,
        prompt: &str,
        config: &BackendConfig,
    ) -> Result<String, GatewayError> {
        let body = completion_body(
            &config.task_endpoint,
            &config.task_model,
            prompt,
            1,
            0.0,
            1.0,
            config.max_tokens,
        );
        choices(self.post(&config.task_endpoint, &body, config)?)?
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::InvalidResponse("completion without choices".into()))
    }
}
