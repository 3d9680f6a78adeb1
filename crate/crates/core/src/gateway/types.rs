use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::gateway::GatewayError;

/// Three-way natural language inference judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Entailment,
    Contradiction,
    Neutral,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Contradiction, Label::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Contradiction => "contradiction",
            Label::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = GatewayError;

    /// Accepts the lowercase names as well as the upper-case labels emitted by
    /// MNLI-style classifiers (`ENTAILMENT`, `CONTRADICTION`, `NEUTRAL`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "entails" => Ok(Label::Entailment),
            "contradiction" | "contradicts" => Ok(Label::Contradiction),
            "neutral" => Ok(Label::Neutral),
            other => Err(GatewayError::InvalidResponse(format!(
                "unknown NLI label '{other}'"
            ))),
        }
    }
}

/// An NLI label with the backend's confidence in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntailmentLabel {
    pub label: Label,
    pub confidence: f64,
}

impl EntailmentLabel {
    /// Label as reported by a fixture: confidence is pinned to 1.0.
    pub fn certain(label: Label) -> Self {
        Self {
            label,
            confidence: 1.0,
        }
    }
}

/// Result of extractive question answering over one passage.
///
/// Offsets count Unicode scalar values of the passage, end exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaResult {
    pub found: bool,
    pub answer_text: String,
    pub start: Option<usize>,
    pub end: Option<usize>,
    pub confidence: f64,
}

impl QaResult {
    pub fn not_found(confidence: f64) -> Self {
        Self {
            found: false,
            answer_text: String::new(),
            start: None,
            end: None,
            confidence,
        }
    }

    pub fn span(&self) -> Option<(usize, usize)> {
        match (self.found, self.start, self.end) {
            (true, Some(s), Some(e)) => Some((s, e)),
            _ => None,
        }
    }

    /// Checks the span invariants against the passage the answer was extracted from.
    pub fn check_against(&self, passage: &str) -> Result<(), String> {
        if !self.found {
            if !self.answer_text.is_empty() || self.start.is_some() || self.end.is_some() {
                return Err("a not-found answer must carry no text and no span".into());
            }
            return Ok(());
        }
        let (start, end) = match (self.start, self.end) {
            (Some(s), Some(e)) => (s, e),
            _ => return Err("a found answer must carry a span".into()),
        };
        let len = passage.chars().count();
        if !(start < end && end <= len) {
            return Err(format!(
                "span {start}..{end} is not inside a passage of {len} chars"
            ));
        }
        let slice = crate::text::char_slice(passage, start, end);
        if slice != self.answer_text {
            return Err(format!(
                "passage[{start}..{end}] is '{slice}', not '{}'",
                self.answer_text
            ));
        }
        Ok(())
    }
}

/// Identifier of a prompted task template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ClaimDecomposition,
    QuestionFromClaim,
    QuestionFromSpan,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::ClaimDecomposition => "claim_decomposition",
            TemplateId::QuestionFromClaim => "question_from_claim",
            TemplateId::QuestionFromSpan => "question_from_span",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "claim_decomposition" => Ok(TemplateId::ClaimDecomposition),
            "question_from_claim" => Ok(TemplateId::QuestionFromClaim),
            "question_from_span" => Ok(TemplateId::QuestionFromSpan),
            other => Err(GatewayError::UnknownTemplate(other.to_string())),
        }
    }
}

/// The four capabilities a backend provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Generate,
    Nli,
    Qa,
    Task,
}

impl Capability {
    pub const ALL: [Capability; 4] = [
        Capability::Generate,
        Capability::Nli,
        Capability::Qa,
        Capability::Task,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Generate => "generate",
            Capability::Nli => "nli",
            Capability::Qa => "qa",
            Capability::Task => "task",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Endpoints, model identifiers and decoding settings for the model backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub generator_endpoint: String,
    pub nli_endpoint: String,
    pub qa_endpoint: String,
    pub task_endpoint: String,
    pub generator_model: String,
    pub nli_model: String,
    pub qa_model: String,
    pub task_model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub retry_budget: u32,
    pub qa_no_answer_threshold: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            generator_endpoint: "https://api.openai.com/v1/chat/completions".into(),
            nli_endpoint: "http://127.0.0.1:8001/nli".into(),
            qa_endpoint: "http://127.0.0.1:8002/qa".into(),
            task_endpoint: "https://api.openai.com/v1/completions".into(),
            generator_model: "gpt-3.5-turbo-instruct".into(),
            nli_model: "microsoft/deberta-large-mnli".into(),
            qa_model: "deepset/tinyroberta-squad2".into(),
            task_model: "gpt-3.5-turbo-instruct".into(),
            temperature: 1.0,
            top_p: 0.95,
            max_tokens: 512,
            timeout_ms: 60_000,
            retry_budget: 3,
            qa_no_answer_threshold: 0.3,
        }
    }
}

/// Environment variables that override the endpoint URLs.
pub const ENDPOINT_ENV: [&str; 4] = [
    "RELIC_GENERATOR_URL",
    "RELIC_NLI_URL",
    "RELIC_QA_URL",
    "RELIC_TASK_URL",
];

impl BackendConfig {
    /// Applies endpoint overrides from the environment.
    pub fn with_env_overrides(self) -> Self {
        self.with_overrides(|name| std::env::var(name).ok())
    }

    /// Applies endpoint overrides looked up by variable name; blank values are ignored.
    pub fn with_overrides(mut self, lookup: impl Fn(&str) -> Option<String>) -> Self {
        let [generator, nli, qa, task] = ENDPOINT_ENV;
        let targets = [
            (generator, &mut self.generator_endpoint),
            (nli, &mut self.nli_endpoint),
            (qa, &mut self.qa_endpoint),
            (task, &mut self.task_endpoint),
        ];
        for (name, field) in targets {
            if let Some(url) = lookup(name).filter(|u| !u.trim().is_empty()) {
                *field = url;
            }
        }
        self
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.timeout_ms == 0 {
            return Err(GatewayError::InvalidConfig(
                "timeout must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.qa_no_answer_threshold) {
            return Err(GatewayError::InvalidConfig(format!(
                "qa_no_answer_threshold {} is outside [0, 1]",
                self.qa_no_answer_threshold
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidConfig(format!(
                "top_p {} is outside (0, 1]",
                self.top_p
            )));
        }
        if self.temperature < 0.0 {
            return Err(GatewayError::InvalidConfig(
                "temperature must be non-negative".into(),
            ));
        }
        Ok(())
    }
}
