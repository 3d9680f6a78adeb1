use std::collections::HashMap;

use log::debug;
use serde::{Deserialize, Serialize};

use super::{
    classify_cluster, cluster_answers, collect_answers, filter_answer, judge_sample,
    score_from_labels, AnswerCluster, AnswerRecord, ClaimVerification, ConsistencyError,
    GenerationSample, UnverifiedClaim, UnverifiedReason, VerificationResult,
};
use crate::gateway::Gateway;
use crate::parallel::{bounded_map, DEFAULT_FAN_OUT};
use crate::text::{
    decompose_claims, question_from_claim, validate_question, AtomicClaim, Question,
};

/// Claim verifications (and failures) for one sentence of the presented text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceVerification {
    pub sentence_index: usize,
    pub text: String,
    pub claims: Vec<ClaimVerification>,
    pub unverified: Vec<UnverifiedClaim>,
}

impl SentenceVerification {
    /// True when some claim failed because the backend failed.
    pub fn has_backend_failure(&self) -> bool {
        self.unverified
            .iter()
            .any(|u| matches!(u.reason, UnverifiedReason::Backend { .. }))
    }
}

/// Runs the full check for one claim. Failures come back as an unverified marker.
pub fn verify_claim(
    claim: AtomicClaim,
    presented: &GenerationSample,
    additional: &[GenerationSample],
    gateway: &Gateway,
) -> Result<ClaimVerification, UnverifiedClaim> {
    let sentence_index = claim.sentence_index;
    let fail = |claim: &AtomicClaim, e: ConsistencyError| {
        UnverifiedClaim::from_error(sentence_index, Some(claim.clone()), &e)
    };

    let question = question_from_claim(&claim, gateway).map_err(|e| fail(&claim, e.into()))?;
    let checked = validate_question(question.clone(), &presented.text, gateway).map_err(|e| {
        UnverifiedClaim {
            question: Some(question.clone()),
            ..fail(&claim, e.into())
        }
    })?;
    if !checked.question.validated {
        return Err(UnverifiedClaim {
            sentence_index,
            claim: Some(claim),
            question: Some(checked.question),
            reason: UnverifiedReason::Unanswerable,
        });
    }
    let question = checked.question;

    let run = || -> Result<ClaimVerification, ConsistencyError> {
        let (answers, clusters) =
            answer_clusters(&question, &claim, presented, additional, gateway, &claim.id)?;
        let (per_sample_labels, label_sentences): (Vec<_>, Vec<_>) = additional
            .iter()
            .map(|s| judge_sample(s, &claim, gateway))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .unzip();
        let consistency_score = score_from_labels(&per_sample_labels)?;
        Ok(ClaimVerification {
            claim: claim.clone(),
            question: question.clone(),
            focal_answer: answers[0].clone(),
            answers,
            clusters,
            per_sample_labels,
            label_sentences,
            consistency_score,
        })
    };
    run().map_err(|e| UnverifiedClaim {
        question: Some(question.clone()),
        ..fail(&claim, e)
    })
}

/// Collects, filters, clusters and classifies the answers every sample gives
/// to a validated question about `claim`. Cluster ids are `{id_prefix}-k{n}`.
pub fn answer_clusters(
    question: &Question,
    claim: &AtomicClaim,
    presented: &GenerationSample,
    additional: &[GenerationSample],
    gateway: &Gateway,
    id_prefix: &str,
) -> Result<(Vec<AnswerRecord>, Vec<AnswerCluster>), ConsistencyError> {
    let texts: Vec<&str> = std::iter::once(presented.text.as_str())
        .chain(additional.iter().map(|s| s.text.as_str()))
        .collect();
    let answers = collect_answers(question, &texts, gateway)?
        .into_iter()
        .map(|a| filter_answer(&presented.text, claim, question, a, gateway))
        .collect::<Result<Vec<_>, _>>()?;
    let clusters = cluster_answers(question, &answers, gateway)?
        .into_iter()
        .enumerate()
        .map(|(k, group)| {
            let relation = classify_cluster(&group, claim, question, gateway)?;
            Ok(AnswerCluster::new(
                format!("{id_prefix}-k{k}"),
                group,
                relation,
            ))
        })
        .collect::<Result<Vec<_>, ConsistencyError>>()?;
    Ok((answers, clusters))
}

/// Decomposes one sentence of the presented text and verifies each claim.
pub fn verify_sentence(
    sentence_index: usize,
    presented: &GenerationSample,
    additional: &[GenerationSample],
    gateway: &Gateway,
) -> SentenceVerification {
    let text = presented
        .sentence_text(sentence_index)
        .unwrap_or_default()
        .to_string();
    let claims = decompose_claims(&text, sentence_index, gateway);
    let mut sv = SentenceVerification {
        sentence_index,
        text,
        claims: Vec::new(),
        unverified: Vec::new(),
    };
    match claims {
        Err(e) => sv
            .unverified
            .push(UnverifiedClaim::from_error(sentence_index, None, &e.into())),
        Ok(claims) => {
            for outcome in bounded_map(&claims, DEFAULT_FAN_OUT, |c| {
                verify_claim(c.clone(), presented, additional, gateway)
            }) {
                match outcome {
                    Ok(cv) => sv.claims.push(cv),
                    Err(u) => sv.unverified.push(u),
                }
            }
        }
    }
    sv
}

/// Maps char spans of an old presented text onto a new one, sentence by
/// sentence, for sentences whose text is unchanged.
pub struct SentenceRelocation {
    /// old sentence index -> (old start, new start, new index)
    moves: HashMap<usize, (usize, usize, usize)>,
    old_sentences: Vec<crate::text::SentenceSpan>,
}

impl SentenceRelocation {
    pub fn new(old: &GenerationSample, new: &GenerationSample) -> Self {
        let mut by_text: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, s) in new.sentences.iter().enumerate().rev() {
            by_text.entry(s.text(&new.text)).or_default().push(i);
        }
        let mut moves = HashMap::new();
        for (j, s) in old.sentences.iter().enumerate() {
            if let Some(i) = by_text.get_mut(s.text(&old.text)).and_then(Vec::pop) {
                moves.insert(j, (s.start, new.sentences[i].start, i));
            }
        }
        Self {
            moves,
            old_sentences: old.sentences.clone(),
        }
    }

    /// New index of an old sentence, if it survived.
    pub fn sentence(&self, old_index: usize) -> Option<usize> {
        self.moves.get(&old_index).map(|m| m.2)
    }

    /// The span's new position, if its sentence survived.
    pub fn span(&self, start: usize, end: usize) -> Option<(usize, usize)> {
        let j = self
            .old_sentences
            .iter()
            .position(|s| s.start <= start && end <= s.end)?;
        let (old_start, new_start, _) = self.moves.get(&j)?;
        Some((start - old_start + new_start, end - old_start + new_start))
    }

    /// Moves an answer span; spans whose sentence is gone are cleared.
    pub fn record(&self, mut a: AnswerRecord) -> AnswerRecord {
        if let Some((s, e)) = a.span() {
            match self.span(s, e) {
                Some((s, e)) => {
                    a.start = Some(s);
                    a.end = Some(e);
                }
                None => {
                    a.start = None;
                    a.end = None;
                }
            }
        }
        a
    }
}

fn relocate(
    sv: SentenceVerification,
    new_index: usize,
    map: &SentenceRelocation,
) -> SentenceVerification {
    let claims = sv
        .claims
        .into_iter()
        .map(|mut cv| {
            cv.claim.sentence_index = new_index;
            cv.focal_answer = map.record(cv.focal_answer);
            cv.answers = cv
                .answers
                .into_iter()
                .map(|a| {
                    if a.sample_index == 0 {
                        map.record(a)
                    } else {
                        a
                    }
                })
                .collect();
            cv
        })
        .collect();
    let unverified = sv
        .unverified
        .into_iter()
        .map(|mut u| {
            u.sentence_index = new_index;
            if let Some(c) = u.claim.as_mut() {
                c.sentence_index = new_index;
            }
            u
        })
        .collect();
    SentenceVerification {
        sentence_index: new_index,
        text: sv.text,
        claims,
        unverified,
    }
}

impl VerificationResult {
    /// The verifications belonging to one sentence of the presented text.
    pub fn sentence_verification(&self, sentence_index: usize) -> Option<SentenceVerification> {
        let text = self.presented.sentence_text(sentence_index)?.to_string();
        Some(SentenceVerification {
            sentence_index,
            text,
            claims: self
                .claim_verifications
                .iter()
                .filter(|c| c.claim.sentence_index == sentence_index)
                .cloned()
                .collect(),
            unverified: self
                .unverified
                .iter()
                .filter(|u| u.sentence_index == sentence_index)
                .cloned()
                .collect(),
        })
    }
}

/// Verifies `presented_text` against fixed additional samples.
///
/// With `previous`, sentences whose text also occurs in the previous presented
/// text reuse that sentence's verifications (spans relocated) and trigger no
/// model calls. Returns the result and the indices of recomputed sentences.
pub fn verify_text(
    prompt: &str,
    presented_text: &str,
    additional: Vec<GenerationSample>,
    gateway: &Gateway,
    previous: Option<&VerificationResult>,
) -> (VerificationResult, Vec<usize>) {
    let presented = GenerationSample::new(0, presented_text);
    let relocation = previous.map(|p| (p, SentenceRelocation::new(&p.presented, &presented)));

    let mut reused: HashMap<usize, SentenceVerification> = HashMap::new();
    if let Some((prev, map)) = &relocation {
        for (old_index, (_, _, new_index)) in &map.moves {
            if let Some(sv) = prev.sentence_verification(*old_index) {
                reused.insert(*new_index, relocate(sv, *new_index, map));
            }
        }
    }
    let todo: Vec<usize> = (0..presented.sentences.len())
        .filter(|i| !reused.contains_key(i))
        .collect();
    debug!(
        "verifying {} sentence(s), reusing {}",
        todo.len(),
        reused.len()
    );

    // Decompose changed sentences, then run all of their claims with bounded fan-out.
    let decomposed = bounded_map(&todo, DEFAULT_FAN_OUT, |i| {
        let text = presented.sentence_text(*i).unwrap_or_default().to_string();
        (*i, decompose_claims(&text, *i, gateway), text)
    });
    let jobs: Vec<AtomicClaim> = decomposed
        .iter()
        .filter_map(|(_, r, _)| r.as_ref().ok())
        .flatten()
        .cloned()
        .collect();
    let outcomes = bounded_map(&jobs, DEFAULT_FAN_OUT, |c| {
        verify_claim(c.clone(), &presented, &additional, gateway)
    });
    let mut fresh: HashMap<usize, SentenceVerification> = HashMap::new();
    for (i, r, text) in decomposed {
        let mut sv = SentenceVerification {
            sentence_index: i,
            text,
            claims: Vec::new(),
            unverified: Vec::new(),
        };
        if let Err(e) = r {
            sv.unverified
                .push(UnverifiedClaim::from_error(i, None, &e.into()));
        }
        fresh.insert(i, sv);
    }
    for outcome in outcomes {
        match outcome {
            Ok(cv) => fresh
                .get_mut(&cv.claim.sentence_index)
                .expect("decomposed sentence")
                .claims
                .push(cv),
            Err(u) => fresh
                .get_mut(&u.sentence_index)
                .expect("decomposed sentence")
                .unverified
                .push(u),
        }
    }

    let mut claim_verifications = Vec::new();
    let mut unverified = Vec::new();
    for i in 0..presented.sentences.len() {
        let sv = reused
            .remove(&i)
            .or_else(|| fresh.remove(&i))
            .expect("every sentence handled");
        claim_verifications.extend(sv.claims);
        unverified.extend(sv.unverified);
    }
    // Claims inside a sentence keep ordinal order; unverified markers follow sentence order too.
    claim_verifications.sort_by_key(|c| (c.claim.sentence_index, c.claim.ordinal));
    unverified.sort_by_key(|u| (u.sentence_index, u.claim.as_ref().map(|c| c.ordinal)));

    let result = VerificationResult {
        prompt: prompt.to_string(),
        presented,
        samples: additional,
        claim_verifications,
        unverified,
        config: gateway.config().clone(),
    };
    (result, todo)
}

/// Samples `n` generations for `prompt` and verifies the first against the rest.
pub fn verify_generation(
    prompt: &str,
    n: usize,
    gateway: &Gateway,
) -> Result<VerificationResult, ConsistencyError> {
    if n < 2 {
        return Err(ConsistencyError::Precondition(format!(
            "need the presented generation and at least one additional sample (n = {n})"
        )));
    }
    if prompt.trim().is_empty() {
        return Err(ConsistencyError::Precondition("prompt is empty".into()));
    }
    let mut texts = gateway.generate(prompt, n)?.into_iter();
    let presented = texts.next().expect("n >= 2");
    let additional: Vec<GenerationSample> = texts
        .enumerate()
        .map(|(i, t)| GenerationSample::new(i + 1, t))
        .collect();
    Ok(verify_text(prompt, &presented, additional, gateway, None).0)
}
