//! Few-shot prompt templates for the prompted tasks.
//!
//! The template bodies live under `resources/templates/` and are embedded
//! verbatim. Each template names its placeholders; rendering substitutes
//! every placeholder from a slot map keyed by a short slot name.

use std::collections::BTreeMap;

use crate::gateway::{GatewayError, TemplateId};

const CLAIM_DECOMPOSITION: &str = include_str!("../../resources/templates/claim_decomposition.txt");
const QUESTION_FROM_CLAIM: &str = include_str!("../../resources/templates/question_from_claim.txt");
const QUESTION_FROM_SPAN: &str = include_str!("../../resources/templates/question_from_span.txt");

/// A prompt template together with its slot-name to placeholder mapping.
#[derive(Debug, Clone, Copy)]
pub struct Template {
    pub id: TemplateId,
    pub body: &'static str,
    pub slots: &'static [(&'static str, &'static str)],
}

impl Template {
    pub fn get(id: TemplateId) -> Template {
        match id {
            TemplateId::ClaimDecomposition => Template {
                id,
                body: CLAIM_DECOMPOSITION,
                slots: &[("sentence", "{the target sentence}")],
            },
            TemplateId::QuestionFromClaim => Template {
                id,
                body: QUESTION_FROM_CLAIM,
                slots: &[("claim", "{the target claim}")],
            },
            TemplateId::QuestionFromSpan => Template {
                id,
                body: QUESTION_FROM_SPAN,
                slots: &[
                    ("context", "{the target claim}"),
                    ("target", "{the selected text}"),
                ],
            },
        }
    }

    /// Substitutes every placeholder. Extra slots are ignored; a missing one is an error.
    pub fn render(&self, slots: &BTreeMap<String, String>) -> Result<String, GatewayError> {
        let mut out = self.body.to_string();
        for (name, placeholder) in self.slots {
            let value = slots.get(*name).ok_or_else(|| GatewayError::MissingSlot {
                template: self.id,
                slot: (*name).to_string(),
            })?;
            out = out.replace(placeholder, value.trim());
        }
        Ok(out)
    }
}

/// Convenience for building a slot map from string pairs.
pub fn slots<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_carry_their_instruction_lines() {
        assert!(Template::get(TemplateId::ClaimDecomposition)
            .body
            .starts_with("Please breakdown the following sentence into independent facts\n"));
        assert!(Template::get(TemplateId::QuestionFromClaim)
            .body
            .starts_with("Write a question from the sentence about the sentence subject.\n"));
        assert!(Template::get(TemplateId::QuestionFromSpan)
            .body
            .starts_with("Write a question for the target words according to the context.\n"));
    }

    #[test]
    fn question_from_claim_renders_tail() {
        let t = Template::get(TemplateId::QuestionFromClaim);
        let p = t
            .render(&slots([("claim", "Rodrigo is Spanish.")]))
            .unwrap();
        assert!(p.ends_with("context: Rodrigo is Spanish.\nquestion:"));
        assert!(p.contains(
            "context: She was born on October 31, 1930.\nquestion: When was she born?\n"
        ));
    }

    #[test]
    fn question_from_span_renders_both_slots() {
        let t = Template::get(TemplateId::QuestionFromSpan);
        let p = t
            .render(&slots([
                ("context", "She was born on October 31, 1930."),
                ("target", "October 31, 1930"),
            ]))
            .unwrap();
        assert!(p.ends_with(
            "context: She was born on October 31, 1930.\ntarget: October 31, 1930\nquestion:"
        ));
    }

    #[test]
    fn decomposition_ends_with_open_output() {
        let t = Template::get(TemplateId::ClaimDecomposition);
        let p = t.render(&slots([("sentence", "A sentence.")])).unwrap();
        assert!(p.ends_with("Input: A sentence.\nOutput:\n"));
        assert_eq!(p.matches("Input: ").count(), 5);
    }

    #[test]
    fn missing_slot_is_reported() {
        let t = Template::get(TemplateId::QuestionFromSpan);
        let err = t.render(&slots([("context", "x")])).unwrap_err();
        assert!(matches!(err, GatewayError::MissingSlot { slot, .. } if slot == "target"));
    }
}
