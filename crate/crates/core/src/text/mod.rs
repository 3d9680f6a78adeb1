//! Addressable units of generated text: sentences, atomic claims, questions.
//!
//! All offsets are counted in Unicode scalar values (`char`s), never bytes.

mod claims;
mod questions;
mod segment;

use thiserror::Error;

use crate::gateway::GatewayError;

pub use claims::{claim_id, decompose_claims, parse_claim_list, AtomicClaim};
pub use questions::{
    question_from_claim, question_from_span, validate_question, Question, QuestionSource,
    ValidatedQuestion,
};
pub use segment::{segment_sentences, SentenceSpan};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no claims could be parsed from the decomposition of '{sentence}'")]
    EmptyDecomposition { sentence: String },
    #[error("completion '{completion}' is not a question")]
    MalformedQuestion { completion: String },
    #[error("span {start}..{end} is invalid for a text of {len} chars")]
    Span {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

/// Number of chars in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

fn byte_offset(text: &str, char_pos: usize) -> usize {
    text.char_indices()
        .nth(char_pos)
        .map(|(b, _)| b)
        .unwrap_or(text.len())
}

/// `text[start..end]` in char offsets; clamps out-of-range bounds to the text.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let b0 = byte_offset(text, start);
    let b1 = byte_offset(text, end.max(start));
    &text[b0..b1]
}

/// Char offset corresponding to a byte offset on a char boundary.
pub fn char_offset_of_byte(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_slicing_is_unicode_aware() {
        let t = "Hernández 🦩 flamingo";
        assert_eq!(char_slice(t, 0, 9), "Hernández");
        assert_eq!(char_slice(t, 10, 11), "🦩");
        assert_eq!(char_slice(t, 12, 100), "flamingo");
        assert_eq!(char_offset_of_byte(t, t.find("flamingo").unwrap()), 12);
        assert_eq!(char_len(t), 20);
    }
}
