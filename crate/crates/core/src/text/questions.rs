use serde::{Deserialize, Serialize};

use super::{char_len, char_slice, AtomicClaim, TextError};
use crate::gateway::{slots, Gateway, QaResult, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuestionSource {
    FromClaim {
        claim_id: String,
    },
    /// Offsets are relative to the sentence.
    FromSpan {
        sentence_index: usize,
        start: usize,
        end: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Question {
    pub text: String,
    pub source: QuestionSource,
    pub validated: bool,
}

/// A question after the answerability check, with the answer found in the
/// presented text when there was one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedQuestion {
    pub question: Question,
    pub focal: Option<QaResult>,
}

fn first_question(completion: &str) -> Result<String, TextError> {
    let line = completion
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    if line.len() > 1 && line.ends_with('?') {
        Ok(line.to_string())
    } else {
        Err(TextError::MalformedQuestion {
            completion: completion.to_string(),
        })
    }
}

/// Turns a claim into a natural-language question about its subject.
pub fn question_from_claim(claim: &AtomicClaim, gateway: &Gateway) -> Result<Question, TextError> {
    let completion = gateway.complete_task(
        TemplateId::QuestionFromClaim,
        &slots([("claim", &claim.text)]),
    )?;
    Ok(Question {
        text: first_question(&completion)?,
        source: QuestionSource::FromClaim {
            claim_id: claim.id.clone(),
        },
        validated: false,
    })
}

/// Turns a selected span of a sentence into a question about it.
/// `start`/`end` are char offsets into `sentence`.
pub fn question_from_span(
    sentence: &str,
    sentence_index: usize,
    start: usize,
    end: usize,
    gateway: &Gateway,
) -> Result<Question, TextError> {
    let len = char_len(sentence);
    if start >= end || end > len {
        return Err(TextError::Span { start, end, len });
    }
    let target = char_slice(sentence, start, end);
    if target.trim().is_empty() {
        return Err(TextError::Span { start, end, len });
    }
    let completion = gateway.complete_task(
        TemplateId::QuestionFromSpan,
        &slots([("context", sentence), ("target", target)]),
    )?;
    Ok(Question {
        text: first_question(&completion)?,
        source: QuestionSource::FromSpan {
            sentence_index,
            start,
            end,
        },
        validated: false,
    })
}

/// Checks that the question can be answered from the presented text.
pub fn validate_question(
    question: Question,
    presented_text: &str,
    gateway: &Gateway,
) -> Result<ValidatedQuestion, TextError> {
    if presented_text.trim().is_empty() {
        return Ok(ValidatedQuestion {
            question: Question {
                validated: false,
                ..question
            },
            focal: None,
        });
    }
    let answer = gateway.extract_answer(&question.text, presented_text)?;
    let validated = answer.found;
    Ok(ValidatedQuestion {
        question: Question {
            validated,
            ..question
        },
        focal: validated.then_some(answer),
    })
}
