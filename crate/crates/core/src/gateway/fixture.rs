//! Deterministic fixture backend.
//!
//! A fixture file is a single JSON document:
//!
//! ```json
//! {
//!   "generations": ["..."],
//!   "qa":    [{"question": "...", "passage": "...", "answer": "...", "start": 0, "end": 3, "confidence": 0.9, "found": true}],
//!   "nli":   [{"premise": "...", "hypothesis": "...", "label": "entailment"}],
//!   "tasks": [{"template": "question_from_claim", "prompt": "...", "completion": "..."}]
//! }
//! ```
//!
//! Lookups are exact-string. Tables are strict unless the document sets
//! `"strict": false`; a non-strict table answers unknown NLI pairs with
//! `nli_default` (neutral unless given) and unknown QA pairs with no answer.
//! Every table is reflexive: `(s, s)` is entailment unless listed otherwise.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{
    Backend, BackendConfig, CallCounts, Capability, EntailmentLabel, GatewayError, Label, QaResult,
    TemplateId,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureTable {
    pub generations: Vec<String>,
    pub qa: BTreeMap<(String, String), QaResult>,
    pub nli: BTreeMap<(String, String), Label>,
    pub tasks: BTreeMap<(TemplateId, String), String>,
    pub strict: bool,
    pub nli_default: Label,
}

impl Default for FixtureTable {
    fn default() -> Self {
        Self {
            generations: Vec::new(),
            qa: BTreeMap::new(),
            nli: BTreeMap::new(),
            tasks: BTreeMap::new(),
            strict: true,
            nli_default: Label::Neutral,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureDoc {
    #[serde(default = "default_strict", skip_serializing_if = "is_true")]
    strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nli_default: Option<Label>,
    #[serde(default)]
    generations: Vec<String>,
    #[serde(default)]
    qa: Vec<QaEntry>,
    #[serde(default)]
    nli: Vec<NliEntry>,
    #[serde(default)]
    tasks: Vec<TaskEntry>,
}

fn default_strict() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QaEntry {
    question: String,
    passage: String,
    #[serde(default)]
    answer: String,
    #[serde(default)]
    start: Option<usize>,
    #[serde(default)]
    end: Option<usize>,
    confidence: f64,
    found: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NliEntry {
    premise: String,
    hypothesis: String,
    label: Label,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskEntry {
    template: String,
    prompt: String,
    completion: String,
}

fn pair_key(a: &str, b: &str) -> String {
    format!("({a:?}, {b:?})")
}

impl FixtureTable {
    pub fn insert_nli(
        &mut self,
        premise: &str,
        hypothesis: &str,
        label: Label,
    ) -> Result<(), GatewayError> {
        let key = (premise.to_string(), hypothesis.to_string());
        if self.nli.contains_key(&key) {
            return Err(GatewayError::DuplicateKey {
                section: "nli".into(),
                key: pair_key(premise, hypothesis),
            });
        }
        self.nli.insert(key, label);
        Ok(())
    }

    pub fn insert_qa(
        &mut self,
        question: &str,
        passage: &str,
        result: QaResult,
    ) -> Result<(), GatewayError> {
        result
            .check_against(passage)
            .map_err(|message| GatewayError::FixtureInvalid {
                field: format!("qa{}", pair_key(question, passage)),
                message,
            })?;
        let key = (question.to_string(), passage.to_string());
        if self.qa.contains_key(&key) {
            return Err(GatewayError::DuplicateKey {
                section: "qa".into(),
                key: pair_key(question, passage),
            });
        }
        self.qa.insert(key, result);
        Ok(())
    }

    pub fn insert_task(
        &mut self,
        template: TemplateId,
        prompt: &str,
        completion: &str,
    ) -> Result<(), GatewayError> {
        let key = (template, prompt.to_string());
        if self.tasks.contains_key(&key) {
            return Err(GatewayError::DuplicateKey {
                section: "tasks".into(),
                key: pair_key(template.as_str(), prompt),
            });
        }
        self.tasks.insert(key, completion.to_string());
        Ok(())
    }

    /// Parses a fixture document; diagnostics name the offending line or field.
    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let doc: FixtureDoc =
            serde_json::from_str(text).map_err(|e| GatewayError::FixtureParse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        if doc.strict && doc.nli_default.is_some() {
            return Err(GatewayError::FixtureInvalid {
                field: "nli_default".into(),
                message: "a strict fixture cannot declare a default label".into(),
            });
        }
        let mut table = FixtureTable {
            generations: doc.generations,
            strict: doc.strict,
            nli_default: doc.nli_default.unwrap_or(Label::Neutral),
            ..Default::default()
        };
        for (i, e) in doc.qa.into_iter().enumerate() {
            if !(0.0..=1.0).contains(&e.confidence) {
                return Err(GatewayError::FixtureInvalid {
                    field: format!("qa[{i}].confidence"),
                    message: format!("{} is outside [0, 1]", e.confidence),
                });
            }
            let result = QaResult {
                found: e.found,
                answer_text: e.answer,
                start: e.start,
                end: e.end,
                confidence: e.confidence,
            };
            result
                .check_against(&e.passage)
                .map_err(|message| GatewayError::FixtureInvalid {
                    field: format!("qa[{i}]"),
                    message,
                })?;
            table.insert_qa(&e.question, &e.passage, result)?;
        }
        for e in doc.nli {
            table.insert_nli(&e.premise, &e.hypothesis, e.label)?;
        }
        for (i, e) in doc.tasks.into_iter().enumerate() {
            let template: TemplateId =
                e.template
                    .parse()
                    .map_err(|_| GatewayError::FixtureInvalid {
                        field: format!("tasks[{i}].template"),
                        message: format!("unknown template '{}'", e.template),
                    })?;
            table.insert_task(template, &e.prompt, &e.completion)?;
        }
        Ok(table)
    }

    /// Serializes to the fixture document schema with entries in key order.
    pub fn to_json(&self) -> String {
        let doc = FixtureDoc {
            strict: self.strict,
            nli_default: (!self.strict).then_some(self.nli_default),
            generations: self.generations.clone(),
            qa: self
                .qa
                .iter()
                .map(|((q, p), r)| QaEntry {
                    question: q.clone(),
                    passage: p.clone(),
                    answer: r.answer_text.clone(),
                    start: r.start,
                    end: r.end,
                    confidence: r.confidence,
                    found: r.found,
                })
                .collect(),
            nli: self
                .nli
                .iter()
                .map(|((p, h), l)| NliEntry {
                    premise: p.clone(),
                    hypothesis: h.clone(),
                    label: *l,
                })
                .collect(),
            tasks: self
                .tasks
                .iter()
                .map(|((t, p), c)| TaskEntry {
                    template: t.as_str().into(),
                    prompt: p.clone(),
                    completion: c.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("fixture document serializes");
        s.push('\n');
        s
    }
}

/// Reads and validates a fixture file into a strict (unless declared otherwise) table.
pub fn load_fixture(path: impl AsRef<Path>) -> Result<FixtureTable, GatewayError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
    FixtureTable::from_json(&text)
}

/// Serves responses from a [`FixtureTable`] and counts every call.
#[derive(Debug)]
pub struct FixtureBackend {
    table: FixtureTable,
    cursor: Mutex<usize>,
    generate: AtomicU64,
    nli: AtomicU64,
    qa: AtomicU64,
    task: AtomicU64,
    by_template: Mutex<BTreeMap<TemplateId, u64>>,
}

impl FixtureBackend {
    pub fn new(table: FixtureTable) -> Self {
        Self {
            table,
            cursor: Mutex::new(0),
            generate: AtomicU64::new(0),
            nli: AtomicU64::new(0),
            qa: AtomicU64::new(0),
            task: AtomicU64::new(0),
            by_template: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn table(&self) -> &FixtureTable {
        &self.table
    }
}

impl Backend for FixtureBackend {
    fn generate(
        &self,
        _prompt: &str,
        n: usize,
        _config: &BackendConfig,
    ) -> Result<Vec<String>, GatewayError> {
        self.generate.fetch_add(1, Ordering::SeqCst);
        let mut cursor = self.cursor.lock();
        let available = self.table.generations.len() - *cursor;
        if n > available {
            return Err(GatewayError::FixtureUnderflow {
                requested: n,
                available,
            });
        }
        let out = self.table.generations[*cursor..*cursor + n].to_vec();
        *cursor += n;
        Ok(out)
    }

    fn nli(
        &self,
        premise: &str,
        hypothesis: &str,
        _config: &BackendConfig,
    ) -> Result<EntailmentLabel, GatewayError> {
        self.nli.fetch_add(1, Ordering::SeqCst);
        let key = (premise.to_string(), hypothesis.to_string());
        match self.table.nli.get(&key) {
            Some(l) => Ok(EntailmentLabel::certain(*l)),
            None if premise == hypothesis => Ok(EntailmentLabel::certain(Label::Entailment)),
            None if !self.table.strict => Ok(EntailmentLabel::certain(self.table.nli_default)),
            None => Err(GatewayError::MissingEntry {
                capability: Capability::Nli,
                key: pair_key(premise, hypothesis),
            }),
        }
    }

    fn answer(
        &self,
        question: &str,
        passage: &str,
        _config: &BackendConfig,
    ) -> Result<QaResult, GatewayError> {
        self.qa.fetch_add(1, Ordering::SeqCst);
        let key = (question.to_string(), passage.to_string());
        match self.table.qa.get(&key) {
            Some(r) => Ok(r.clone()),
            None if !self.table.strict => Ok(QaResult::not_found(0.0)),
            None => Err(GatewayError::MissingEntry {
                capability: Capability::Qa,
                key: pair_key(question, passage),
            }),
        }
    }

    fn complete(
        &self,
        template: TemplateId,
        prompt: &str,
        _config: &BackendConfig,
    ) -> Result<String, GatewayError> {
        self.task.fetch_add(1, Ordering::SeqCst);
        *self.by_template.lock().entry(template).or_default() += 1;
        self.table
            .tasks
            .get(&(template, prompt.to_string()))
            .cloned()
            .ok_or_else(|| GatewayError::MissingEntry {
                capability: Capability::Task,
                key: pair_key(template.as_str(), prompt),
            })
    }

    fn call_counts(&self) -> Option<CallCounts> {
        Some(CallCounts {
            generate: self.generate.load(Ordering::SeqCst),
            nli: self.nli.load(Ordering::SeqCst),
            qa: self.qa.load(Ordering::SeqCst),
            task: self.task.load(Ordering::SeqCst),
            by_template: self.by_template.lock().clone(),
        })
    }
}
