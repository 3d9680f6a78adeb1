//! User-facing views derived from a verification result: in-text keyword
//! annotations, per-sentence claim rows and span-level evidence sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{
    AnswerCluster, AnswerRecord, ClaimVerification, Relation, SupportLabel, UnverifiedClaim,
    VerificationResult,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("claim {claim_id} has no focal answer span; annotation skipped")]
    Skipped { claim_id: String },
    #[error("sentence index {index} out of range ({len} sentences)")]
    Range { index: usize, len: usize },
    #[error("unknown {kind} id {id:?}")]
    Unknown { kind: &'static str, id: String },
    #[error("invalid evidence target {0:?}; expected cluster:ID or claim:ID")]
    Target(String),
}

/// Where an annotation came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnotationSource {
    Claim {
        claim_id: String,
    },
    Brush {
        sentence_index: usize,
        question: String,
    },
}

/// Per-category sample counts behind a keyword's bar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub support: usize,
    pub contradiction: usize,
    pub neutral: usize,
    pub absent: usize,
}

impl CategoryCounts {
    pub fn total(&self) -> usize {
        self.support + self.contradiction + self.neutral + self.absent
    }

    /// Shares of the four categories, in field order.
    pub fn proportions(&self) -> [f64; 4] {
        let n = self.total().max(1) as f64;
        [self.support, self.contradiction, self.neutral, self.absent].map(|k| k as f64 / n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationOption {
    pub cluster_id: String,
    pub representative_text: String,
    pub relation: Relation,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordAnnotation {
    pub id: String,
    pub source: AnnotationSource,
    /// Char span into the presented text.
    pub span: (usize, usize),
    pub counts: CategoryCounts,
    pub options: Vec<AnnotationOption>,
}

/// Counts how the additional samples answer: by the relation of the cluster
/// holding their answer, or absent when they gave no valid answer.
pub fn category_counts(
    answers: &[AnswerRecord],
    clusters: &[AnswerCluster],
    n_additional: usize,
) -> CategoryCounts {
    let mut counts = CategoryCounts::default();
    for i in 1..=n_additional {
        let valid = answers.iter().any(|a| a.sample_index == i && a.is_valid());
        let cluster = clusters.iter().find(|c| c.member_indices.contains(&i));
        match cluster.filter(|_| valid).map(|c| c.relation) {
            Some(Relation::Equal | Relation::Support) => counts.support += 1,
            Some(Relation::Contradiction) => counts.contradiction += 1,
            Some(Relation::Neutral) => counts.neutral += 1,
            None => counts.absent += 1,
        }
    }
    counts
}

/// Clusters as options, largest first; equal sizes keep creation order.
pub fn ranked_options(clusters: &[AnswerCluster]) -> Vec<AnnotationOption> {
    let mut options: Vec<AnnotationOption> = clusters
        .iter()
        .map(|c| AnnotationOption {
            cluster_id: c.id.clone(),
            representative_text: c.representative_text.clone(),
            relation: c.relation,
            size: c.size,
        })
        .collect();
    options.sort_by_key(|o| std::cmp::Reverse(o.size));
    options
}

/// Keyword annotation for a verified claim, anchored at its focal answer.
pub fn build_annotation(
    cv: &ClaimVerification,
    n_additional: usize,
) -> Result<KeywordAnnotation, AnnotationError> {
    let span = cv
        .focal_answer
        .span()
        .filter(|_| cv.focal_answer.is_valid())
        .ok_or_else(|| AnnotationError::Skipped {
            claim_id: cv.claim.id.clone(),
        })?;
    Ok(KeywordAnnotation {
        id: format!("a-{}", cv.claim.id),
        source: AnnotationSource::Claim {
            claim_id: cv.claim.id.clone(),
        },
        span,
        counts: category_counts(&cv.answers, &cv.clusters, n_additional),
        options: ranked_options(&cv.clusters),
    })
}

/// Annotation for a brushed span, from the answers to the question it raised.
pub fn brush_annotation(
    id: String,
    sentence_index: usize,
    question: &str,
    span: (usize, usize),
    answers: &[AnswerRecord],
    clusters: &[AnswerCluster],
    n_additional: usize,
) -> KeywordAnnotation {
    KeywordAnnotation {
        id,
        source: AnnotationSource::Brush {
            sentence_index,
            question: question.to_string(),
        },
        span,
        counts: category_counts(answers, clusters, n_additional),
        options: ranked_options(clusters),
    }
}

/// Annotations for every verified claim, in claim order. Claims without a
/// focal span are reported by id instead.
pub fn build_annotations(result: &VerificationResult) -> (Vec<KeywordAnnotation>, Vec<String>) {
    let mut annotations = Vec::new();
    let mut skipped = Vec::new();
    for cv in &result.claim_verifications {
        match build_annotation(cv, result.n_additional()) {
            Ok(a) => annotations.push(a),
            Err(_) => skipped.push(cv.claim.id.clone()),
        }
    }
    (annotations, skipped)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub support: usize,
    pub contradict: usize,
    pub neutral: usize,
}

impl LabelCounts {
    pub fn of(labels: &[SupportLabel]) -> Self {
        let mut c = Self::default();
        for l in labels {
            match l {
                SupportLabel::Support => c.support += 1,
                SupportLabel::Contradict => c.contradict += 1,
                SupportLabel::Neutral => c.neutral += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRow {
    pub claim_id: String,
    pub text: String,
    pub sentence_index: usize,
    pub counts: LabelCounts,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceClaims {
    pub rows: Vec<ClaimRow>,
    pub unverified: Vec<UnverifiedClaim>,
}

/// Claim rows for one sentence in ordinal order, plus its unverified markers.
pub fn claims_for_sentence(
    result: &VerificationResult,
    sentence_index: usize,
) -> Result<SentenceClaims, AnnotationError> {
    let len = result.sentences().len();
    if sentence_index >= len {
        return Err(AnnotationError::Range {
            index: sentence_index,
            len,
        });
    }
    let mut rows: Vec<ClaimRow> = result
        .claim_verifications
        .iter()
        .filter(|cv| cv.claim.sentence_index == sentence_index)
        .map(|cv| ClaimRow {
            claim_id: cv.claim.id.clone(),
            text: cv.claim.text.clone(),
            sentence_index,
            counts: LabelCounts::of(&cv.per_sample_labels),
            score: cv.consistency_score,
        })
        .collect();
    rows.sort_by_key(|r| result.claim(&r.claim_id).map(|cv| cv.claim.ordinal));
    let unverified = result
        .unverified
        .iter()
        .filter(|u| u.sentence_index == sentence_index)
        .cloned()
        .collect();
    Ok(SentenceClaims { rows, unverified })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Support,
    Contradiction,
}

impl Polarity {
    pub fn of(relation: Relation) -> Option<Self> {
        match relation {
            Relation::Equal | Relation::Support => Some(Polarity::Support),
            Relation::Contradiction => Some(Polarity::Contradiction),
            Relation::Neutral => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum EvidenceTarget {
    Cluster(String),
    Claim(String),
}

impl std::str::FromStr for EvidenceTarget {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("cluster", id)) if !id.is_empty() => Ok(EvidenceTarget::Cluster(id.into())),
            Some(("claim", id)) if !id.is_empty() => Ok(EvidenceTarget::Claim(id.into())),
            _ => Err(AnnotationError::Target(s.into())),
        }
    }
}

/// One highlighted sample in evidence mode. Spans are char offsets into the
/// sample's text. Neutral items carry no polarity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub sample_index: usize,
    pub sentence_span: (usize, usize),
    pub answer_span: Option<(usize, usize)>,
    pub answer_text: Option<String>,
    pub polarity: Option<Polarity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSet {
    pub target: EvidenceTarget,
    pub items: Vec<EvidenceItem>,
}

impl EvidenceSet {
    pub fn sample_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.items.iter().map(|i| i.sample_index).collect();
        v.dedup();
        v
    }
}

fn cluster_items(
    result: &VerificationResult,
    answers: &[AnswerRecord],
    cluster: &AnswerCluster,
) -> Vec<EvidenceItem> {
    let polarity = Polarity::of(cluster.relation);
    cluster
        .member_indices
        .iter()
        .filter_map(|&i| {
            let answer = answers.iter().find(|a| a.sample_index == i)?;
            let sample = result.sample(i)?;
            let (start, end) = answer.span()?;
            let sentence = sample.sentence_at(start)?;
            Some(EvidenceItem {
                sample_index: i,
                sentence_span: (sentence.start, sentence.end),
                answer_span: Some((start, end)),
                answer_text: Some(answer.text.clone()),
                polarity,
            })
        })
        .collect()
}

/// Member samples of one cluster with their answer spans.
pub fn evidence_for_cluster(
    result: &VerificationResult,
    cluster_id: &str,
) -> Result<EvidenceSet, AnnotationError> {
    let (cv, cluster) = result
        .cluster(cluster_id)
        .ok_or_else(|| AnnotationError::Unknown {
            kind: "cluster",
            id: cluster_id.into(),
        })?;
    Ok(evidence_for_answer_cluster(result, &cv.answers, cluster))
}

/// Evidence for a cluster built outside the claim verifications, such as one
/// raised by a brushed span.
pub fn evidence_for_answer_cluster(
    result: &VerificationResult,
    answers: &[AnswerRecord],
    cluster: &AnswerCluster,
) -> EvidenceSet {
    EvidenceSet {
        target: EvidenceTarget::Cluster(cluster.id.clone()),
        items: cluster_items(result, answers, cluster),
    }
}

/// Answer spans from the claim's non-neutral clusters, plus the deciding
/// sentence of every additional sample that supports or contradicts the claim.
/// Items are ordered by sample, answer spans before sentence highlights.
pub fn evidence_for_claim(
    result: &VerificationResult,
    claim_id: &str,
) -> Result<EvidenceSet, AnnotationError> {
    let cv = result
        .claim(claim_id)
        .ok_or_else(|| AnnotationError::Unknown {
            kind: "claim",
            id: claim_id.into(),
        })?;
    let mut items: Vec<EvidenceItem> = cv
        .clusters
        .iter()
        .filter(|c| c.relation != Relation::Neutral)
        .flat_map(|c| cluster_items(result, &cv.answers, c))
        .collect();
    for (k, (label, sentence)) in cv
        .per_sample_labels
        .iter()
        .zip(&cv.label_sentences)
        .enumerate()
    {
        let polarity = match label {
            SupportLabel::Support => Polarity::Support,
            SupportLabel::Contradict => Polarity::Contradiction,
            SupportLabel::Neutral => continue,
        };
        let sample_index = k + 1;
        let Some(span) = sentence.and_then(|s| result.sample(sample_index)?.sentences.get(s))
        else {
            continue;
        };
        items.push(EvidenceItem {
            sample_index,
            sentence_span: (span.start, span.end),
            answer_span: None,
            answer_text: None,
            polarity: Some(polarity),
        });
    }
    items.sort_by_key(|i| (i.sample_index, i.answer_span.is_none()));
    Ok(EvidenceSet {
        target: EvidenceTarget::Claim(claim_id.into()),
        items,
    })
}

/// Dispatches on the target kind.
pub fn evidence(
    result: &VerificationResult,
    target: &EvidenceTarget,
) -> Result<EvidenceSet, AnnotationError> {
    match target {
        EvidenceTarget::Cluster(id) => evidence_for_cluster(result, id),
        EvidenceTarget::Claim(id) => evidence_for_claim(result, id),
    }
}
