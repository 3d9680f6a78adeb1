use serde::{Deserialize, Serialize};

use super::{
    AnswerRecord, AnswerStatus, ConsistencyError, GenerationSample, Relation, SupportLabel,
};
use crate::gateway::{Gateway, Label};
use crate::text::{AtomicClaim, Question};

/// The question followed by an answer, the form in which answers are compared.
pub fn contextualize(question: &Question, answer: &str) -> String {
    format!("{} {}", question.text, answer)
}

/// Answers `question` in every sample, in sample order.
pub fn collect_answers<S: AsRef<str>>(
    question: &Question,
    samples: &[S],
    gateway: &Gateway,
) -> Result<Vec<AnswerRecord>, ConsistencyError> {
    if !question.validated {
        return Err(ConsistencyError::Precondition(format!(
            "question '{}' has not been validated",
            question.text
        )));
    }
    samples
        .iter()
        .enumerate()
        .map(|(index, sample)| {
            let text = sample.as_ref();
            if text.trim().is_empty() {
                return Ok(no_answer(index, 0.0));
            }
            let r = gateway
                .extract_answer(&question.text, text)
                .map_err(|source| ConsistencyError::Sample { index, source })?;
            Ok(match r.span() {
                Some((start, end)) => AnswerRecord {
                    sample_index: index,
                    text: r.answer_text,
                    start: Some(start),
                    end: Some(end),
                    qa_confidence: r.confidence,
                    status: AnswerStatus::Valid,
                },
                None => no_answer(index, r.confidence),
            })
        })
        .collect()
}

fn no_answer(sample_index: usize, qa_confidence: f64) -> AnswerRecord {
    AnswerRecord {
        sample_index,
        text: String::new(),
        start: None,
        end: None,
        qa_confidence,
        status: AnswerStatus::NoAnswer,
    }
}

/// Keeps an answer only when the presented text's entailment of the claim
/// matches the claim's entailment of the (question-contextualized) answer.
pub fn filter_answer(
    presented_text: &str,
    claim: &AtomicClaim,
    question: &Question,
    answer: AnswerRecord,
    gateway: &Gateway,
) -> Result<AnswerRecord, ConsistencyError> {
    if answer.status != AnswerStatus::Valid {
        return Ok(answer);
    }
    let focal = gateway.nli(presented_text, &claim.text)?.label;
    let candidate = gateway
        .nli(&claim.text, &contextualize(question, &answer.text))?
        .label;
    if focal == candidate {
        Ok(answer)
    } else {
        Ok(AnswerRecord {
            status: AnswerStatus::FilteredNa,
            ..answer
        })
    }
}

/// A group of mutually entailing answers before it is related to a claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerGroup {
    pub member_indices: Vec<usize>,
    pub representative_text: String,
}

/// Greedy first-fit clustering of the valid answers in sample order.
///
/// An answer joins the first cluster all of whose members it mutually
/// entails (under the question context); otherwise it starts a new one.
/// Filtered and missing answers are not clustered.
pub fn cluster_answers(
    question: &Question,
    answers: &[AnswerRecord],
    gateway: &Gateway,
) -> Result<Vec<AnswerGroup>, ConsistencyError> {
    let mut valid: Vec<&AnswerRecord> = answers.iter().filter(|a| a.is_valid()).collect();
    valid.sort_by_key(|a| a.sample_index);

    // members hold the contextualized text of each member, parallel to the groups
    let mut groups: Vec<(AnswerGroup, Vec<String>)> = Vec::new();
    for answer in valid {
        let ctx = contextualize(question, &answer.text);
        let mut placed = false;
        for (group, members) in groups.iter_mut() {
            let mut all = true;
            for other in members.iter() {
                if gateway.nli(other, &ctx)?.label != Label::Entailment
                    || gateway.nli(&ctx, other)?.label != Label::Entailment
                {
                    all = false;
                    break;
                }
            }
            if all {
                group.member_indices.push(answer.sample_index);
                members.push(ctx.clone());
                placed = true;
                break;
            }
        }
        if !placed {
            groups.push((
                AnswerGroup {
                    member_indices: vec![answer.sample_index],
                    representative_text: answer.text.clone(),
                },
                vec![ctx],
            ));
        }
    }
    Ok(groups.into_iter().map(|(g, _)| g).collect())
}

/// Relates a cluster to its claim through its representative answer.
pub fn classify_cluster(
    group: &AnswerGroup,
    claim: &AtomicClaim,
    question: &Question,
    gateway: &Gateway,
) -> Result<Relation, ConsistencyError> {
    if group.member_indices.is_empty() {
        return Err(ConsistencyError::Precondition(
            "cannot classify an empty cluster".into(),
        ));
    }
    let answer = contextualize(question, &group.representative_text);
    Ok(match gateway.nli(&answer, &claim.text)?.label {
        Label::Entailment => {
            if gateway.nli(&claim.text, &answer)?.label == Label::Entailment {
                Relation::Equal
            } else {
                Relation::Support
            }
        }
        Label::Contradiction => Relation::Contradiction,
        Label::Neutral => Relation::Neutral,
    })
}

/// Support if any sentence of the sample entails the claim, else contradict
/// if any contradicts it, else neutral.
pub fn claim_support_label(
    sample: &GenerationSample,
    claim: &AtomicClaim,
    gateway: &Gateway,
) -> Result<SupportLabel, ConsistencyError> {
    Ok(judge_sample(sample, claim, gateway)?.0)
}

/// Support label of one sample plus the index of the sentence that decided it
/// (the first entailing sentence, else the first contradicting one).
pub fn judge_sample(
    sample: &GenerationSample,
    claim: &AtomicClaim,
    gateway: &Gateway,
) -> Result<(SupportLabel, Option<usize>), ConsistencyError> {
    let mut contradicted = None;
    for (i, span) in sample.sentences.iter().enumerate() {
        match gateway.nli(span.text(&sample.text), &claim.text)?.label {
            Label::Entailment => return Ok((SupportLabel::Support, Some(i))),
            Label::Contradiction => {
                contradicted.get_or_insert(i);
            }
            Label::Neutral => {}
        }
    }
    Ok(match contradicted {
        Some(i) => (SupportLabel::Contradict, Some(i)),
        None => (SupportLabel::Neutral, None),
    })
}

/// Share of labels that are support; undefined for an empty label list.
pub fn score_from_labels(labels: &[SupportLabel]) -> Result<f64, ConsistencyError> {
    if labels.is_empty() {
        return Err(ConsistencyError::UndefinedScore);
    }
    let support = labels
        .iter()
        .filter(|l| **l == SupportLabel::Support)
        .count();
    Ok(support as f64 / labels.len() as f64)
}

/// Consistency score of a claim over the additional samples (the presented
/// generation is not among `additional`).
pub fn consistency_score(
    claim: &AtomicClaim,
    additional: &[GenerationSample],
    gateway: &Gateway,
) -> Result<f64, ConsistencyError> {
    let labels = additional
        .iter()
        .map(|s| claim_support_label(s, claim, gateway))
        .collect::<Result<Vec<_>, _>>()?;
    score_from_labels(&labels)
}
