//! Uniform access to the model capabilities the pipeline consumes.
//!
//! A [`Backend`] answers raw requests (HTTP endpoints or a fixture table);
//! the [`Gateway`] wraps one with request validation, the QA no-answer
//! threshold, template rendering and a response cache keyed by the exact
//! request tuple including the model identifier.

mod cache;
pub mod fixture;
pub mod live;
pub mod templates;
mod types;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use cache::{CacheKey, CacheStats};
pub use fixture::{load_fixture, FixtureBackend, FixtureTable};
pub use live::LiveBackend;
pub use templates::{slots, Template};
pub use types::{
    BackendConfig, Capability, EntailmentLabel, Label, QaResult, TemplateId, ENDPOINT_ENV,
};

use cache::{CachedValue, ResponseCache};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("backend unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("fixture has {available} generation(s) left but {requested} were requested")]
    FixtureUnderflow { requested: usize, available: usize },
    #[error("fixture has no {capability} entry for {key}")]
    MissingEntry { capability: Capability, key: String },
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("template {template} needs slot '{slot}'")]
    MissingSlot { template: TemplateId, slot: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend response: {0}")]
    InvalidResponse(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("fixture parse error at line {line}, column {column}: {message}")]
    FixtureParse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("fixture field {field}: {message}")]
    FixtureInvalid { field: String, message: String },
    #[error("duplicate fixture key in '{section}': {key}")]
    DuplicateKey { section: String, key: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl GatewayError {
    /// True for failures of the model backend itself rather than of the request.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self,
            GatewayError::Transport { .. }
                | GatewayError::MissingCredential(_)
                | GatewayError::InvalidResponse(_)
                | GatewayError::FixtureUnderflow { .. }
                | GatewayError::MissingEntry { .. }
        )
    }
}

/// Per-capability counters of calls that reached a backend.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CallCounts {
    pub generate: u64,
    pub nli: u64,
    pub qa: u64,
    pub task: u64,
    /// Task calls split by template.
    pub by_template: BTreeMap<TemplateId, u64>,
}

impl CallCounts {
    pub fn get(&self, capability: Capability) -> u64 {
        match capability {
            Capability::Generate => self.generate,
            Capability::Nli => self.nli,
            Capability::Qa => self.qa,
            Capability::Task => self.task,
        }
    }

    pub fn total(&self) -> u64 {
        self.generate + self.nli + self.qa + self.task
    }

    pub fn template(&self, template: TemplateId) -> u64 {
        self.by_template.get(&template).copied().unwrap_or(0)
    }

    pub fn add(&mut self, other: &CallCounts) {
        self.generate += other.generate;
        self.nli += other.nli;
        self.qa += other.qa;
        self.task += other.task;
        for (t, k) in &other.by_template {
            *self.by_template.entry(*t).or_default() += k;
        }
    }
}

/// A source of raw model responses.
pub trait Backend: Send + Sync + fmt::Debug {
    fn generate(
        &self,
        prompt: &str,
        n: usize,
        config: &BackendConfig,
    ) -> Result<Vec<String>, GatewayError>;

    fn nli(
        &self,
        premise: &str,
        hypothesis: &str,
        config: &BackendConfig,
    ) -> Result<EntailmentLabel, GatewayError>;

    /// Best answer span with its confidence; thresholding is the gateway's job.
    fn answer(
        &self,
        question: &str,
        passage: &str,
        config: &BackendConfig,
    ) -> Result<QaResult, GatewayError>;

    fn complete(
        &self,
        template: TemplateId,
        prompt: &str,
        config: &BackendConfig,
    ) -> Result<String, GatewayError>;

    /// Calls served so far, when the backend keeps count (fixtures do).
    fn call_counts(&self) -> Option<CallCounts> {
        None
    }
}

/// Validated, cached access to a [`Backend`].
#[derive(Debug, Clone)]
pub struct Gateway {
    backend: Arc<dyn Backend>,
    config: BackendConfig,
    cache: Arc<ResponseCache>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, config: BackendConfig) -> Self {
        Self {
            backend,
            config,
            cache: Arc::new(ResponseCache::default()),
        }
    }

    /// A gateway over the same backend and config with an empty cache.
    pub fn fresh(&self) -> Self {
        Self::new(self.backend.clone(), self.config.clone())
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    pub fn stats(&self) -> CacheStats {
        self.cache.stats()
    }

    pub fn backend_calls(&self) -> Option<CallCounts> {
        self.backend.call_counts()
    }

    /// `n` generations for `prompt`; index 0 is the presented generation.
    pub fn generate(&self, prompt: &str, n: usize) -> Result<Vec<String>, GatewayError> {
        if n == 0 {
            return Err(GatewayError::InvalidRequest(
                "at least one generation is required".into(),
            ));
        }
        if prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("prompt is empty".into()));
        }
        let key = CacheKey::Generate {
            model: self.config.generator_model.clone(),
            prompt: prompt.to_string(),
            n,
            temperature_bits: self.config.temperature.to_bits(),
            top_p_bits: self.config.top_p.to_bits(),
            max_tokens: self.config.max_tokens,
        };
        let value = self.cache.get_or_try_insert(key, || {
            let texts = self.backend.generate(prompt, n, &self.config)?;
            if texts.len() != n {
                return Err(GatewayError::InvalidResponse(format!(
                    "requested {n} generations, backend returned {}",
                    texts.len()
                )));
            }
            Ok(CachedValue::Texts(texts))
        })?;
        match value {
            CachedValue::Texts(t) => Ok(t),
            _ => unreachable!("generate cache slot holds texts"),
        }
    }

    pub fn nli(&self, premise: &str, hypothesis: &str) -> Result<EntailmentLabel, GatewayError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(GatewayError::InvalidRequest(
                "NLI premise and hypothesis must be non-empty".into(),
            ));
        }
        let key = CacheKey::Nli {
            model: self.config.nli_model.clone(),
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        };
        let value = self.cache.get_or_try_insert(key, || {
            Ok(CachedValue::Label(self.backend.nli(
                premise,
                hypothesis,
                &self.config,
            )?))
        })?;
        match value {
            CachedValue::Label(l) => Ok(l),
            _ => unreachable!("nli cache slot holds a label"),
        }
    }

    /// Extractive QA with the no-answer threshold applied.
    pub fn extract_answer(&self, question: &str, passage: &str) -> Result<QaResult, GatewayError> {
        if !question.trim().ends_with('?') {
            return Err(GatewayError::InvalidRequest(format!(
                "'{question}' is not a question"
            )));
        }
        if passage.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("QA passage is empty".into()));
        }
        let key = CacheKey::Qa {
            model: self.config.qa_model.clone(),
            question: question.to_string(),
            passage: passage.to_string(),
        };
        let value = self.cache.get_or_try_insert(key, || {
            let raw = self.backend.answer(question, passage, &self.config)?;
            raw.check_against(passage)
                .map_err(GatewayError::InvalidResponse)?;
            Ok(CachedValue::Qa(raw))
        })?;
        let raw = match value {
            CachedValue::Qa(r) => r,
            _ => unreachable!("qa cache slot holds a QA result"),
        };
        if raw.found && raw.confidence < self.config.qa_no_answer_threshold {
            return Ok(QaResult::not_found(raw.confidence));
        }
        Ok(raw)
    }

    /// Renders `template` with `slots` and returns the raw completion.
    pub fn complete_task(
        &self,
        template: TemplateId,
        slots: &BTreeMap<String, String>,
    ) -> Result<String, GatewayError> {
        let prompt = Template::get(template).render(slots)?;
        let key = CacheKey::Task {
            model: self.config.task_model.clone(),
            template,
            prompt: prompt.clone(),
        };
        let value = self.cache.get_or_try_insert(key, || {
            Ok(CachedValue::Text(self.backend.complete(
                template,
                &prompt,
                &self.config,
            )?))
        })?;
        match value {
            CachedValue::Text(t) => Ok(t),
            _ => unreachable!("task cache slot holds text"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rodrigo_table() -> FixtureTable {
        let mut t = FixtureTable::default();
        t.generations = vec![
            "Rodrigo is Spanish.".into(),
            "Rodrigo is from Spain.".into(),
        ];
        t.insert_nli(
            "What is Rodrigo's nationality? Spanish",
            "What is Rodrigo's nationality? from Spain",
            Label::Entailment,
        )
        .unwrap();
        t.insert_nli(
            "What is Rodrigo's nationality? Spanish",
            "What is Rodrigo's nationality? Portuguese",
            Label::Contradiction,
        )
        .unwrap();
        t.insert_qa(
            "What is Rodrigo's nationality?",
            "Rodrigo is Spanish.",
            QaResult {
                found: true,
                answer_text: "Spanish".into(),
                start: Some(11),
                end: Some(18),
                confidence: 0.9,
            },
        )
        .unwrap();
        t.insert_qa(
            "What is Rodrigo's nationality?",
            "Rodrigo plays football.",
            QaResult {
                found: true,
                answer_text: "football".into(),
                start: Some(14),
                end: Some(22),
                confidence: 0.2,
            },
        )
        .unwrap();
        t
    }

    fn gateway(t: FixtureTable) -> (Gateway, Arc<FixtureBackend>) {
        let backend = Arc::new(FixtureBackend::new(t));
        (
            Gateway::new(
                backend.clone(),
                BackendConfig {
                    qa_no_answer_threshold: 0.5,
                    ..Default::default()
                },
            ),
            backend,
        )
    }

    #[test]
    fn nli_pairs_from_the_nationality_example() {
        let (g, _) = gateway(rodrigo_table());
        let l = g
            .nli(
                "What is Rodrigo's nationality? Spanish",
                "What is Rodrigo's nationality? from Spain",
            )
            .unwrap();
        assert_eq!(l, EntailmentLabel::certain(Label::Entailment));
        let l = g
            .nli(
                "What is Rodrigo's nationality? Spanish",
                "What is Rodrigo's nationality? Portuguese",
            )
            .unwrap();
        assert_eq!(l.label, Label::Contradiction);
    }

    #[test]
    fn nli_is_reflexive_on_fixtures() {
        let (g, _) = gateway(FixtureTable::default());
        let s = "Any sentence at all.";
        assert_eq!(g.nli(s, s).unwrap().label, Label::Entailment);
    }

    #[test]
    fn second_call_is_served_from_cache() {
        let (g, backend) = gateway(rodrigo_table());
        let a = g.nli(
            "What is Rodrigo's nationality? Spanish",
            "What is Rodrigo's nationality? from Spain",
        );
        let before = backend.call_counts().unwrap();
        let b = g.nli(
            "What is Rodrigo's nationality? Spanish",
            "What is Rodrigo's nationality? from Spain",
        );
        assert_eq!(a, b);
        assert_eq!(backend.call_counts().unwrap(), before);
        assert_eq!(g.stats().hits, 1);
        assert_eq!(g.stats().calls.nli, 1);
    }

    #[test]
    fn strict_miss_names_the_pair() {
        let (g, _) = gateway(rodrigo_table());
        let err = g.nli("unknown premise", "unknown hypothesis").unwrap_err();
        match err {
            GatewayError::MissingEntry { capability, key } => {
                assert_eq!(capability, Capability::Nli);
                assert!(key.contains("unknown premise") && key.contains("unknown hypothesis"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_are_not_cached() {
        let (g, backend) = gateway(rodrigo_table());
        assert!(g.nli("p", "h").is_err());
        assert!(g.nli("p", "h").is_err());
        assert_eq!(backend.call_counts().unwrap().nli, 2);
    }

    #[test]
    fn answer_found_with_span() {
        let (g, _) = gateway(rodrigo_table());
        let r = g
            .extract_answer("What is Rodrigo's nationality?", "Rodrigo is Spanish.")
            .unwrap();
        assert!(r.found);
        assert_eq!(r.answer_text, "Spanish");
        assert_eq!(
            crate::text::char_slice("Rodrigo is Spanish.", 11, 18),
            "Spanish"
        );
    }

    #[test]
    fn low_confidence_answer_is_not_found() {
        let (g, _) = gateway(rodrigo_table());
        let r = g
            .extract_answer("What is Rodrigo's nationality?", "Rodrigo plays football.")
            .unwrap();
        assert!(!r.found);
        assert!(r.answer_text.is_empty());
        assert_eq!(r.span(), None);
    }

    #[test]
    fn question_must_end_with_mark() {
        let (g, _) = gateway(rodrigo_table());
        assert!(matches!(
            g.extract_answer("Rodrigo's nationality", "Rodrigo is Spanish."),
            Err(GatewayError::InvalidRequest(_))
        ));
    }

    #[test]
    fn generate_single_and_underflow() {
        let mut t = FixtureTable::default();
        t.generations = vec!["only text".into()];
        let (g, _) = gateway(t.clone());
        assert_eq!(
            g.generate("Tell me a bio of X", 1).unwrap(),
            vec!["only text".to_string()]
        );

        t.generations = vec!["a".into(), "b".into()];
        let (g, _) = gateway(t);
        assert_eq!(
            g.generate("any prompt", 3).unwrap_err(),
            GatewayError::FixtureUnderflow {
                requested: 3,
                available: 2
            }
        );
    }

    #[test]
    fn task_completion_passthrough() {
        let mut t = FixtureTable::default();
        let prompt = Template::get(TemplateId::ClaimDecomposition)
            .render(&slots([("sentence", "Some sentence.")]))
            .unwrap();
        t.insert_task(TemplateId::ClaimDecomposition, &prompt, "- f1.\n- f2.")
            .unwrap();
        let (g, _) = gateway(t);
        let out = g
            .complete_task(
                TemplateId::ClaimDecomposition,
                &slots([("sentence", "Some sentence.")]),
            )
            .unwrap();
        assert_eq!(out, "- f1.\n- f2.");
    }
}
