use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const ABBREVIATIONS: &str = include_str!("../../resources/abbreviations.txt");

/// A sentence inside some text, as char offsets (end exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

impl SentenceSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, start: usize, end: usize) -> bool {
        self.start <= start && end <= self.end
    }

    pub fn text<'a>(&self, text: &'a str) -> &'a str {
        super::char_slice(text, self.start, self.end)
    }
}

fn abbreviations() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        ABBREVIATIONS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '”' | '’' | '»')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '“' | '‘' | '«')
}

/// The word ending right before `dot` (exclusive), without leading brackets or quotes.
fn word_before(chars: &[char], dot: usize) -> String {
    let mut i = dot;
    while i > 0 && !chars[i - 1].is_whitespace() {
        i -= 1;
    }
    chars[i..dot]
        .iter()
        .collect::<String>()
        .trim_start_matches(|c: char| is_opener(c))
        .to_string()
}

fn is_initial(word: &str) -> bool {
    let mut it = word.chars();
    matches!((it.next(), it.next()), (Some(c), None) if c.is_uppercase())
}

/// True when the token after `dot` is an initial ("R.") with more text after it.
fn initial_follows(chars: &[char], dot: usize) -> bool {
    let mut i = dot + 1;
    while i < chars.len() && chars[i].is_whitespace() {
        i += 1;
    }
    let mut j = i;
    while j < chars.len() && !chars[j].is_whitespace() {
        j += 1;
    }
    let token: String = chars[i..j].iter().collect();
    let rest = chars[j..].iter().any(|c| !c.is_whitespace());
    rest && token.strip_suffix('.').is_some_and(is_initial)
}

/// True when a single `.` at `dot` belongs to an abbreviation or an initial.
/// A lone capital that makes up the whole sentence so far is an initial only
/// when another initial follows ("J. R. R. Tolkien").
fn is_abbreviation(chars: &[char], dot: usize, sentence_start: usize) -> bool {
    let word = word_before(chars, dot);
    if word.is_empty() {
        return false;
    }
    if abbreviations().contains(word.as_str()) {
        return true;
    }
    // Initials and dotted acronyms: "F.", "U.S.", "J.R.R."
    let last = word.rsplit('.').next().unwrap_or("");
    is_initial(last) && (dot - word.chars().count() > sentence_start || initial_follows(chars, dot))
}

/// Splits `text` into sentences.
///
/// A sentence ends at a run of `.`, `!`, `?` or `…` (plus closing quotes or
/// brackets) followed by whitespace and then an uppercase letter, an opening
/// quote or bracket, or the end of the text. A lone period after a listed
/// abbreviation or an initial does not end a sentence. A blank line always
/// does. Spans are ordered, disjoint, and together cover every
/// non-whitespace character.
pub fn segment_sentences(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;

    let push = |spans: &mut Vec<SentenceSpan>, s: usize, e: usize| {
        spans.push(SentenceSpan {
            index: spans.len(),
            start: s,
            end: e,
        });
    };

    while i < n {
        let c = chars[i];
        if start.is_none() {
            if !c.is_whitespace() {
                start = Some(i);
            } else {
                i += 1;
                continue;
            }
        }
        let s = start.expect("inside a sentence");

        if c == '\n' {
            let mut j = i + 1;
            while j < n && chars[j].is_whitespace() && chars[j] != '\n' {
                j += 1;
            }
            if j < n && chars[j] == '\n' {
                let mut e = i;
                while e > s && chars[e - 1].is_whitespace() {
                    e -= 1;
                }
                push(&mut spans, s, e);
                start = None;
                i = j;
                continue;
            }
        }

        if is_terminator(c) {
            let run_start = i;
            let mut j = i;
            while j < n && is_terminator(chars[j]) {
                j += 1;
            }
            let run_len = j - run_start;
            while j < n && is_closer(chars[j]) {
                j += 1;
            }
            let end = j;
            let mut k = j;
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            let boundary = if k == n {
                true
            } else if k == j {
                false
            } else {
                let next = chars[k];
                let starts_sentence = next.is_uppercase() || is_opener(next);
                let abbreviated = run_len == 1
                    && chars[run_start] == '.'
                    && is_abbreviation(&chars, run_start, s);
                starts_sentence && !abbreviated
            };
            if boundary {
                push(&mut spans, s, end);
                start = None;
                i = k;
            } else {
                i = j;
            }
            continue;
        }
        i += 1;
    }

    if let Some(s) = start {
        let mut e = n;
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if e > s {
            push(&mut spans, s, e);
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(text: &str) -> Vec<&str> {
        segment_sentences(text)
            .iter()
            .map(|s| s.text(text))
            .collect()
    }

    #[test]
    fn empty_text() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n ").is_empty());
    }

    #[test]
    fn two_short_sentences() {
        assert_eq!(texts("A. B."), vec!["A.", "B."]);
        let spans = segment_sentences("A. B.");
        assert_eq!(
            spans[0],
            SentenceSpan {
                index: 0,
                start: 0,
                end: 2
            }
        );
        assert_eq!(
            spans[1],
            SentenceSpan {
                index: 1,
                start: 3,
                end: 5
            }
        );
    }

    #[test]
    fn company_abbreviation_is_not_a_boundary() {
        assert_eq!(
            texts("He worked at Union Products, Inc. in 1956. He retired."),
            vec!["He worked at Union Products, Inc. in 1956.", "He retired."]
        );
    }

    #[test]
    fn titles_and_initials() {
        assert_eq!(
            texts("Dr. Smith met John F. Kennedy. They talked."),
            vec!["Dr. Smith met John F. Kennedy.", "They talked."]
        );
        assert_eq!(
            texts("J. R. R. Tolkien wrote it. A. B."),
            vec!["J. R. R. Tolkien wrote it.", "A.", "B."]
        );
        assert_eq!(
            texts("She moved to the U.S. in 1990."),
            vec!["She moved to the U.S. in 1990."]
        );
    }

    #[test]
    fn quotes_and_questions() {
        assert_eq!(
            texts("He asked, \"Why?\" Nobody knew! \"Fine,\" she said."),
            vec!["He asked, \"Why?\"", "Nobody knew!", "\"Fine,\" she said."]
        );
    }

    #[test]
    fn blank_line_is_a_boundary() {
        assert_eq!(
            texts("Heading\n\nBody text here."),
            vec!["Heading", "Body text here."]
        );
    }

    #[test]
    fn offsets_count_chars() {
        let text = "José nació en España. Él juega fútbol.";
        let spans = segment_sentences(text);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[1].text(text), "Él juega fútbol.");
        assert_eq!(spans[1].start, 22);
    }

    #[test]
    fn decimals_stay_inside() {
        assert_eq!(
            texts("The ratio was 3.5 times higher. Done."),
            vec!["The ratio was 3.5 times higher.", "Done."]
        );
    }

    proptest! {
        #[test]
        fn spans_partition_the_text(text in "[A-Za-z .!?\n\"é]{0,80}") {
            let spans = segment_sentences(&text);
            let chars: Vec<char> = text.chars().collect();
            let mut pos = 0;
            for (i, s) in spans.iter().enumerate() {
                prop_assert_eq!(s.index, i);
                prop_assert!(s.start < s.end);
                prop_assert!(pos <= s.start);
                prop_assert!(chars[pos..s.start].iter().all(|c| c.is_whitespace()));
                prop_assert!(!chars[s.start].is_whitespace());
                prop_assert!(!chars[s.end - 1].is_whitespace());
                pos = s.end;
            }
            prop_assert!(chars[pos..].iter().all(|c| c.is_whitespace()));
        }
    }
}
