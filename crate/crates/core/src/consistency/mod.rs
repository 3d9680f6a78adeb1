//! Self-consistency checking of atomic claims against additional samples.
//!
//! For every claim of the presented generation: ask a question about it,
//! answer that question in every sample, drop answers whose entailment
//! behaviour disagrees with the claim's, group mutually entailing answers
//! into clusters, relate each cluster to the claim, and score the claim by
//! the share of additional samples that support it.

mod algorithm;
mod pipeline;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{BackendConfig, GatewayError};
use crate::text::{AtomicClaim, Question, SentenceSpan, TextError};

pub use algorithm::{
    claim_support_label, classify_cluster, cluster_answers, collect_answers, consistency_score,
    contextualize, filter_answer, judge_sample, score_from_labels, AnswerGroup,
};
pub use pipeline::{
    answer_clusters, verify_claim, verify_generation, verify_sentence, verify_text,
    SentenceRelocation, SentenceVerification,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsistencyError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("sample {index}: {source}")]
    Sample { index: usize, source: GatewayError },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("consistency score is undefined without additional samples")]
    UndefinedScore,
}

impl ConsistencyError {
    pub fn is_backend_failure(&self) -> bool {
        match self {
            ConsistencyError::Gateway(e) | ConsistencyError::Sample { source: e, .. } => {
                e.is_backend_failure()
            }
            ConsistencyError::Text(TextError::Gateway(e)) => e.is_backend_failure(),
            _ => false,
        }
    }
}

/// One generation with its sentence segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSample {
    pub index: usize,
    pub text: String,
    pub sentences: Vec<SentenceSpan>,
}

impl GenerationSample {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        let sentences = crate::text::segment_sentences(&text);
        Self {
            index,
            text,
            sentences,
        }
    }

    pub fn sentence_text(&self, i: usize) -> Option<&str> {
        self.sentences.get(i).map(|s| s.text(&self.text))
    }

    /// The sentence containing char offset `pos`.
    pub fn sentence_at(&self, pos: usize) -> Option<&SentenceSpan> {
        self.sentences
            .iter()
            .find(|s| s.start <= pos && pos < s.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStatus {
    Valid,
    FilteredNa,
    NoAnswer,
}

/// The answer one sample gives to a claim's question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub sample_index: usize,
    pub text: String,
    pub start: Option<usize>,
    pub end: Option<usize>,
    pub qa_confidence: f64,
    pub status: AnswerStatus,
}

impl AnswerRecord {
    pub fn span(&self) -> Option<(usize, usize)> {
        self.start.zip(self.end)
    }

    pub fn is_valid(&self) -> bool {
        self.status == AnswerStatus::Valid
    }
}

/// How a cluster of answers stands relative to the claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    Support,
    Contradiction,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerCluster {
    pub id: String,
    pub member_indices: Vec<usize>,
    pub representative_text: String,
    pub relation: Relation,
    pub size: usize,
}

impl AnswerCluster {
    pub fn new(id: String, group: AnswerGroup, relation: Relation) -> Self {
        let size = group.member_indices.len();
        Self {
            id,
            member_indices: group.member_indices,
            representative_text: group.representative_text,
            relation,
            size,
        }
    }
}

/// Whether one additional sample supports a claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportLabel {
    Support,
    Contradict,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimVerification {
    pub claim: AtomicClaim,
    pub question: Question,
    /// Answer extracted from the presented generation; its span indexes the presented text.
    pub focal_answer: AnswerRecord,
    /// One record per sample, presented generation first.
    pub answers: Vec<AnswerRecord>,
    pub clusters: Vec<AnswerCluster>,
    /// One label per additional sample.
    pub per_sample_labels: Vec<SupportLabel>,
    /// For each additional sample, the sentence that decided its label.
    pub label_sentences: Vec<Option<usize>>,
    pub consistency_score: f64,
}

impl ClaimVerification {
    pub fn support_count(&self) -> usize {
        self.per_sample_labels
            .iter()
            .filter(|l| **l == SupportLabel::Support)
            .count()
    }

    pub fn cluster_of(&self, sample_index: usize) -> Option<&AnswerCluster> {
        self.clusters
            .iter()
            .find(|c| c.member_indices.contains(&sample_index))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UnverifiedReason {
    EmptyDecomposition,
    MalformedQuestion {
        completion: String,
    },
    /// The question has no answer in the presented generation.
    Unanswerable,
    Backend {
        message: String,
    },
    Invalid {
        message: String,
    },
}

/// A sentence or claim that could not be checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnverifiedClaim {
    pub sentence_index: usize,
    pub claim: Option<AtomicClaim>,
    pub question: Option<Question>,
    pub reason: UnverifiedReason,
}

impl UnverifiedClaim {
    pub fn from_error(
        sentence_index: usize,
        claim: Option<AtomicClaim>,
        err: &ConsistencyError,
    ) -> Self {
        let reason = match err {
            ConsistencyError::Text(TextError::EmptyDecomposition { .. }) => {
                UnverifiedReason::EmptyDecomposition
            }
            ConsistencyError::Text(TextError::MalformedQuestion { completion }) => {
                UnverifiedReason::MalformedQuestion {
                    completion: completion.clone(),
                }
            }
            e if e.is_backend_failure() => UnverifiedReason::Backend {
                message: e.to_string(),
            },
            e => UnverifiedReason::Invalid {
                message: e.to_string(),
            },
        };
        Self {
            sentence_index,
            claim,
            question: None,
            reason,
        }
    }
}

/// Everything computed for one prompt: the annotated presented generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub prompt: String,
    pub presented: GenerationSample,
    /// Additional samples, indexed from 1.
    pub samples: Vec<GenerationSample>,
    pub claim_verifications: Vec<ClaimVerification>,
    pub unverified: Vec<UnverifiedClaim>,
    pub config: BackendConfig,
}

impl VerificationResult {
    pub fn sentences(&self) -> &[SentenceSpan] {
        &self.presented.sentences
    }

    pub fn n_additional(&self) -> usize {
        self.samples.len()
    }

    /// Presented generation followed by the additional samples.
    pub fn all_samples(&self) -> impl Iterator<Item = &GenerationSample> {
        std::iter::once(&self.presented).chain(self.samples.iter())
    }

    pub fn sample(&self, index: usize) -> Option<&GenerationSample> {
        if index == 0 {
            Some(&self.presented)
        } else {
            self.samples.get(index - 1)
        }
    }

    pub fn claim(&self, claim_id: &str) -> Option<&ClaimVerification> {
        self.claim_verifications
            .iter()
            .find(|cv| cv.claim.id == claim_id)
    }

    pub fn cluster(&self, cluster_id: &str) -> Option<(&ClaimVerification, &AnswerCluster)> {
        self.claim_verifications.iter().find_map(|cv| {
            cv.clusters
                .iter()
                .find(|c| c.id == cluster_id)
                .map(|c| (cv, c))
        })
    }
}
