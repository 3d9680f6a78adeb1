//! Builders for the two demo fixtures shipped under `fixtures/`.
//!
//! `rodrigo` is a strict table covering exactly the calls of one verification
//! run. `featherstone` is a non-strict table (unlisted NLI pairs are neutral,
//! unlisted QA pairs have no answer) covering a verification run, one brushed
//! span and two edits.
//!
//! Convention for the answer filter: a claim entails `question + answer` for
//! every answer of the right type, so conflicting answers survive the filter
//! and show up as contradiction clusters.

#![allow(dead_code)]

use std::collections::BTreeMap;

use selfcheck_core::gateway::{FixtureTable, Label, QaResult, Template, TemplateId};
use selfcheck_core::text::segment_sentences;

pub struct Builder {
    pub table: FixtureTable,
}

fn char_index(haystack: &str, byte: usize) -> usize {
    haystack[..byte].chars().count()
}

impl Builder {
    pub fn new(strict: bool) -> Self {
        Self {
            table: FixtureTable {
                strict,
                nli_default: Label::Neutral,
                ..Default::default()
            },
        }
    }

    pub fn task(&mut self, id: TemplateId, pairs: &[(&str, &str)], completion: &str) {
        let map: BTreeMap<String, String> = pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let prompt = Template::get(id)
            .render(&map)
            .expect("demo slots match the template");
        match self.table.tasks.get(&(id, prompt.clone())) {
            Some(existing) => assert_eq!(existing, completion, "conflicting completion for {id:?}"),
            None => self.table.insert_task(id, &prompt, completion).unwrap(),
        }
    }

    pub fn nli(&mut self, premise: &str, hypothesis: &str, label: Label) {
        if premise == hypothesis {
            return;
        }
        let key = (premise.to_string(), hypothesis.to_string());
        match self.table.nli.get(&key) {
            Some(existing) => assert_eq!(
                *existing, label,
                "conflicting label for ({premise:?}, {hypothesis:?})"
            ),
            None => {
                self.table.nli.insert(key, label);
            }
        }
    }

    /// QA answer found inside `within` (a substring of `passage`).
    pub fn qa_in(
        &mut self,
        question: &str,
        passage: &str,
        within: &str,
        answer: &str,
        confidence: f64,
    ) {
        let base = passage
            .find(within)
            .unwrap_or_else(|| panic!("{within:?} not in passage"));
        let offset = within
            .find(answer)
            .unwrap_or_else(|| panic!("{answer:?} not in {within:?}"));
        let start = char_index(passage, base + offset);
        let end = start + answer.chars().count();
        let result = QaResult {
            found: true,
            answer_text: answer.to_string(),
            start: Some(start),
            end: Some(end),
            confidence,
        };
        self.put_qa(question, passage, result);
    }

    pub fn qa_none(&mut self, question: &str, passage: &str) {
        self.put_qa(question, passage, QaResult::not_found(0.02));
    }

    fn put_qa(&mut self, question: &str, passage: &str, result: QaResult) {
        match self
            .table
            .qa
            .get(&(question.to_string(), passage.to_string()))
        {
            Some(existing) => assert_eq!(existing, &result),
            None => self.table.insert_qa(question, passage, result).unwrap(),
        }
    }
}

fn ctx(q: &str, a: &str) -> String {
    format!("{q} {a}")
}

pub const RODRIGO_PROMPT: &str = "Tell me about Rodrigo Hernández.";
pub const RODRIGO_SAMPLES: [&str; 5] = [
    "Rodrigo Hernández is a Spanish footballer.",
    "Rodrigo Hernández is a portuguese midfielder.",
    "Rodrigo Hernández is a footballer from Europe.",
    "Rodrigo Hernández was born in Madrid and has represented Spain's national team as a footballer.",
    "Rodrigo Hernández is a midfielder from Spain.",
];
pub const RODRIGO_CLAIMS: [&str; 2] = ["Rodrigo is Spanish.", "Rodrigo is a footballer."];
pub const RODRIGO_QUESTIONS: [&str; 2] = [
    "What nationality is Rodrigo?",
    "What is Rodrigo's profession?",
];

/// Strict table for one run with five generations.
pub fn rodrigo() -> FixtureTable {
    use Label::*;
    let mut b = Builder::new(true);
    let s = RODRIGO_SAMPLES;
    b.table.generations = s.iter().map(|x| x.to_string()).collect();
    b.task(
        TemplateId::ClaimDecomposition,
        &[("sentence", s[0])],
        "- Rodrigo is Spanish.\n- Rodrigo is a footballer.",
    );
    for (c, q) in RODRIGO_CLAIMS.iter().zip(RODRIGO_QUESTIONS) {
        b.task(TemplateId::QuestionFromClaim, &[("claim", c)], q);
    }

    // Nationality: one answer per generation; the fourth is below the no-answer threshold.
    let [c1, c2] = RODRIGO_CLAIMS;
    let [q1, q2] = RODRIGO_QUESTIONS;
    let nationality = [
        "Spanish",
        "portuguese",
        "from Europe",
        "Spain",
        "from Spain",
    ];
    for (i, a) in nationality.iter().enumerate() {
        b.qa_in(q1, s[i], s[i], a, if i == 3 { 0.12 } else { 0.9 });
    }
    let kept = ["Spanish", "portuguese", "from Europe", "from Spain"];
    b.nli(s[0], c1, Entailment);
    for a in kept {
        b.nli(c1, &ctx(q1, a), Entailment);
    }
    let same = |x: &str, y: &str| {
        matches!(
            (x, y),
            ("Spanish", "from Spain") | ("from Spain", "Spanish")
        )
    };
    for x in kept {
        for y in kept {
            if x == y {
                continue;
            }
            let label = if same(x, y) || y == "from Europe" {
                Entailment
            } else if x == "from Europe" {
                Neutral
            } else {
                Contradiction
            };
            b.nli(&ctx(q1, x), &ctx(q1, y), label);
        }
    }
    b.nli(&ctx(q1, "Spanish"), c1, Entailment);
    b.nli(&ctx(q1, "portuguese"), c1, Contradiction);
    b.nli(&ctx(q1, "from Europe"), c1, Neutral);
    for (sample, label) in s[1..]
        .iter()
        .zip([Contradiction, Neutral, Entailment, Entailment])
    {
        b.nli(sample, c1, label);
    }

    // Profession.
    let profession = [
        "footballer",
        "midfielder",
        "footballer",
        "footballer",
        "midfielder",
    ];
    for (i, a) in profession.iter().enumerate() {
        b.qa_in(q2, s[i], s[i], a, 0.9);
    }
    b.nli(s[0], c2, Entailment);
    for a in ["footballer", "midfielder"] {
        b.nli(c2, &ctx(q2, a), Entailment);
        b.nli(&ctx(q2, a), c2, Entailment);
    }
    b.nli(&ctx(q2, "footballer"), &ctx(q2, "midfielder"), Neutral);
    b.nli(&ctx(q2, "midfielder"), &ctx(q2, "footballer"), Entailment);
    for sample in &s[1..] {
        b.nli(sample, c2, Entailment);
    }
    b.table
}

pub const FEATHERSTONE_PROMPT: &str = "Tell me about Don Featherstone";

pub const FEATHERSTONE_SENTENCES: [&str; 4] = [
    "Don Featherstone (1936 – 2015) was an American artist best known for having created the iconic pink plastic flamingo lawn ornament.",
    "He was born in Leominster, Massachusetts and studied at the Worcester Art Museum school.",
    "He worked at Union Products, Inc. in 1956.",
    "After much trial and error, he designed the pink flamingo in 1957.",
];
pub const BIRTHPLACE_EDIT: &str = "Featherstone was born in Massachusetts.";
pub const YEAR_EDIT: &str = "He worked at Union Products, Inc.";
pub const BRUSH_TEXT: &str = "having created the iconic pink plastic flamingo lawn ornament";
pub const BRUSH_QUESTION: &str = "What is Don Featherstone known for?";

/// Presented text with sentences replaced as given.
pub fn featherstone_text(birthplace_edit: bool, year_edit: bool) -> String {
    let mut s = FEATHERSTONE_SENTENCES.map(str::to_string);
    if birthplace_edit {
        s[1] = BIRTHPLACE_EDIT.into();
    }
    if year_edit {
        s[2] = YEAR_EDIT.into();
    }
    s.join(" ")
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Fact {
    Birth,
    Death,
    Nationality,
    KnownFor,
    Birthplace,
    BirthState,
    School,
    Employer,
    WorkYear,
    Design,
    DesignYear,
    Manner,
}

struct FClaim {
    sentence: usize,
    text: &'static str,
    fact: Fact,
    value: &'static str,
    question: &'static str,
}

const F_CLAIMS: [FClaim; 11] = [
    FClaim {
        sentence: 0,
        text: "Don Featherstone was born in 1936.",
        fact: Fact::Birth,
        value: "1936",
        question: "When was Don Featherstone born?",
    },
    FClaim {
        sentence: 0,
        text: "Don Featherstone died in 2015.",
        fact: Fact::Death,
        value: "2015",
        question: "When did Don Featherstone die?",
    },
    FClaim {
        sentence: 0,
        text: "Don Featherstone was an American artist.",
        fact: Fact::Nationality,
        value: "American",
        question: "What nationality was Don Featherstone?",
    },
    FClaim {
        sentence: 1,
        text: "Don Featherstone was born in Leominster, Massachusetts.",
        fact: Fact::Birthplace,
        value: "Leominster, Massachusetts",
        question: "Where was Don Featherstone born?",
    },
    FClaim {
        sentence: 1,
        text: "Don Featherstone studied at the Worcester Art Museum school.",
        fact: Fact::School,
        value: "the Worcester Art Museum school",
        question: "Where did Don Featherstone study?",
    },
    FClaim {
        sentence: 2,
        text: "Don Featherstone worked at Union Products, Inc.",
        fact: Fact::Employer,
        value: "Union Products, Inc.",
        question: "Where did Don Featherstone work?",
    },
    FClaim {
        sentence: 2,
        text: "Don Featherstone worked at Union Products, Inc. in 1956.",
        fact: Fact::WorkYear,
        value: "1956",
        question: "When did Don Featherstone work at Union Products, Inc.?",
    },
    FClaim {
        sentence: 3,
        text: "Don Featherstone designed the pink flamingo.",
        fact: Fact::Design,
        value: "the pink flamingo",
        question: "What did Don Featherstone design?",
    },
    FClaim {
        sentence: 3,
        text: "Don Featherstone designed the pink flamingo in 1957.",
        fact: Fact::DesignYear,
        value: "1957",
        question: "When did Don Featherstone design the pink flamingo?",
    },
    FClaim {
        sentence: 3,
        text: "Don Featherstone designed the pink flamingo after much trial and error.",
        fact: Fact::Manner,
        value: "After much trial and error",
        question: "How did Don Featherstone design the pink flamingo?",
    },
    FClaim {
        sentence: 4,
        text: "Featherstone was born in Massachusetts.",
        fact: Fact::BirthState,
        value: "Massachusetts",
        question: "Where was Featherstone born?",
    },
];

/// Claims of each sentence text, by claim index into `F_CLAIMS`.
fn claims_of(sentence: &str) -> Vec<usize> {
    let slot = if sentence == BIRTHPLACE_EDIT {
        4
    } else if sentence == YEAR_EDIT {
        return vec![5];
    } else {
        FEATHERSTONE_SENTENCES
            .iter()
            .position(|s| *s == sentence)
            .expect("known sentence")
    };
    (0..F_CLAIMS.len())
        .filter(|&i| F_CLAIMS[i].sentence == slot)
        .collect()
}

const KNOWN_FOR_A: [&str; 3] = [
    BRUSH_TEXT,
    "creating the pink plastic flamingo",
    "inventing the pink plastic flamingo",
];
const KNOWN_FOR_B: [&str; 2] = [
    "the pink plastic flamingo",
    "the plastic pink flamingo lawn ornament",
];

struct Sample {
    birth: Option<&'static str>,
    death: Option<&'static str>,
    known_for: &'static str,
    birthplace: Option<&'static str>,
    school: Option<&'static str>,
    union: bool,
    work_year: Option<&'static str>,
    designs: bool,
}

/// A sentence together with the facts it states.
struct Stated {
    text: String,
    facts: Vec<(Fact, &'static str)>,
}

fn samples() -> Vec<Sample> {
    let birth = [
        Some("1936"),
        Some("1936"),
        Some("1925"),
        Some("1936"),
        Some("1933"),
        Some("1936"),
        Some("1936"),
        Some("1920"),
        Some("1936"),
        Some("1936"),
        Some("1930"),
        Some("1936"),
        None,
        Some("1936"),
        Some("1926"),
        Some("1936"),
        None,
        Some("1931"),
        Some("1936"),
        None,
    ];
    let [a0, a1, a2] = KNOWN_FOR_A;
    let _ = a0;
    let [b0, b1] = KNOWN_FOR_B;
    let known_for = [
        a1, b0, a2, a1, b1, a2, a1, b0, a1, a2, b1, a1, b0, a2, a1, b1, a1, b0, a2, a1,
    ];
    let (l, w, bo, fi) = (
        "Leominster, Massachusetts",
        "Worcester, Massachusetts",
        "Boston, Massachusetts",
        "Fitchburg, Massachusetts",
    );
    let birthplace = [
        Some(l),
        Some(l),
        Some(w),
        Some(l),
        Some(l),
        Some(bo),
        Some(l),
        Some(l),
        Some(w),
        Some(l),
        Some(l),
        None,
        Some(l),
        Some(l),
        Some(fi),
        Some(l),
        Some(w),
        Some(l),
        Some(l),
        Some(l),
    ];
    let (wam, mca) = (
        "the Worcester Art Museum school",
        "the Massachusetts College of Art",
    );
    let school = [
        Some(wam),
        Some(mca),
        None,
        Some(wam),
        Some(mca),
        None,
        Some(mca),
        Some(wam),
        None,
        Some(mca),
        None,
        Some(wam),
        None,
        Some(mca),
        None,
        Some(wam),
        Some(mca),
        None,
        None,
        None,
    ];
    let work_year = [
        Some("1956"),
        Some("1957"),
        Some("1955"),
        Some("1957"),
        None,
        Some("1956"),
        Some("1957"),
        None,
        None,
        Some("1956"),
        Some("1957"),
        None,
        Some("1957"),
        Some("1956"),
        None,
        Some("1957"),
        None,
        Some("1957"),
        Some("1955"),
        Some("1957"),
    ];
    (0..20)
        .map(|k| Sample {
            birth: birth[k],
            death: if k == 16 { None } else { Some("2015") },
            known_for: known_for[k],
            birthplace: birthplace[k],
            school: school[k],
            union: k != 7 && k != 14,
            work_year: work_year[k],
            designs: k != 12,
        })
        .collect()
}

fn sample_sentences(s: &Sample) -> Vec<Stated> {
    let mut out = Vec::new();
    let years = match (s.birth, s.death) {
        (Some(b), Some(d)) => format!(" ({b} – {d})"),
        (None, Some(d)) => format!(" (died {d})"),
        (Some(b), None) => format!(" (born {b})"),
        (None, None) => String::new(),
    };
    let mut facts = vec![
        (Fact::Nationality, "American"),
        (Fact::KnownFor, s.known_for),
    ];
    facts.extend(s.birth.map(|b| (Fact::Birth, b)));
    facts.extend(s.death.map(|d| (Fact::Death, d)));
    out.push(Stated {
        text: format!(
            "Don Featherstone{years} was an American artist known for {}.",
            s.known_for
        ),
        facts,
    });
    let text = match (s.birthplace, s.school) {
        (Some(p), Some(sc)) => Some(format!("He was born in {p} and studied at {sc}.")),
        (Some(p), None) => Some(format!("He was born in {p}.")),
        (None, Some(sc)) => Some(format!("He studied at {sc}.")),
        (None, None) => None,
    };
    if let Some(text) = text {
        let mut facts: Vec<(Fact, &'static str)> =
            s.school.map(|sc| (Fact::School, sc)).into_iter().collect();
        if let Some(p) = s.birthplace {
            facts.push((Fact::Birthplace, p));
            facts.push((Fact::BirthState, p));
        }
        out.push(Stated { text, facts });
    }
    if s.union {
        let mut facts = vec![(Fact::Employer, "Union Products, Inc.")];
        let text = match s.work_year {
            Some(y) => {
                facts.push((Fact::WorkYear, y));
                format!("He worked at Union Products, Inc. in {y}.")
            }
            None => "He worked at Union Products, Inc.".to_string(),
        };
        out.push(Stated { text, facts });
    } else {
        out.push(Stated {
            text: "He later worked for a plastics company.".into(),
            facts: vec![(Fact::Employer, "a plastics company")],
        });
    }
    if s.designs {
        out.push(Stated {
            text: "He designed the pink flamingo in 1957.".into(),
            facts: vec![
                (Fact::Design, "the pink flamingo"),
                (Fact::DesignYear, "1957"),
            ],
        });
    }
    out
}

fn presented_sentence(sentence: &str) -> Stated {
    let facts = match FEATHERSTONE_SENTENCES.iter().position(|s| *s == sentence) {
        Some(0) => vec![
            (Fact::Birth, "1936"),
            (Fact::Death, "2015"),
            (Fact::Nationality, "American"),
            (Fact::KnownFor, BRUSH_TEXT),
        ],
        Some(1) => vec![
            (Fact::Birthplace, "Leominster, Massachusetts"),
            (Fact::BirthState, "Leominster, Massachusetts"),
            (Fact::School, "the Worcester Art Museum school"),
        ],
        Some(2) => vec![
            (Fact::Employer, "Union Products, Inc."),
            (Fact::WorkYear, "1956"),
        ],
        Some(3) => vec![
            (Fact::Design, "the pink flamingo"),
            (Fact::DesignYear, "1957"),
            (Fact::Manner, "After much trial and error"),
        ],
        _ if sentence == BIRTHPLACE_EDIT => vec![(Fact::BirthState, "Massachusetts")],
        _ if sentence == YEAR_EDIT => vec![(Fact::Employer, "Union Products, Inc.")],
        _ => panic!("unknown sentence {sentence:?}"),
    };
    Stated {
        text: sentence.to_string(),
        facts,
    }
}

/// How an answer `w` to a claim's question relates to the claim, read as
/// "question + w entails / contradicts the claim".
fn answer_to_claim(claim: &FClaim, w: &str) -> Label {
    if w == claim.value {
        return Label::Entailment;
    }
    match claim.fact {
        Fact::Birth | Fact::Death | Fact::WorkYear | Fact::DesignYear | Fact::Birthplace => {
            Label::Contradiction
        }
        Fact::BirthState if w.ends_with("Massachusetts") => Label::Entailment,
        _ => Label::Neutral,
    }
}

/// Label of a sentence as premise for a claim: entailment beats contradiction.
fn sentence_to_claim(claim: &FClaim, stated: &Stated) -> Label {
    let mut label = Label::Neutral;
    for (fact, w) in &stated.facts {
        if *fact != claim.fact {
            continue;
        }
        match answer_to_claim(claim, w) {
            Label::Entailment => return Label::Entailment,
            Label::Contradiction => label = Label::Contradiction,
            Label::Neutral => {}
        }
    }
    label
}

/// Non-strict table for the case-study session: the run, the brush and the edits.
pub fn featherstone() -> FixtureTable {
    let mut b = Builder::new(false);
    let samples = samples();
    let sample_texts: Vec<(String, Vec<Stated>)> = samples
        .iter()
        .map(|s| {
            let stated = sample_sentences(s);
            (
                stated
                    .iter()
                    .map(|x| x.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
                stated,
            )
        })
        .collect();
    for (text, stated) in &sample_texts {
        assert_eq!(
            segment_sentences(text).len(),
            stated.len(),
            "segmentation of {text:?}"
        );
    }
    let presented = featherstone_text(false, false);
    b.table.generations = std::iter::once(presented.clone())
        .chain(sample_texts.iter().map(|(t, _)| t.clone()))
        .collect();

    let decompositions: [(&str, &[usize]); 6] = [
        (FEATHERSTONE_SENTENCES[0], &[0, 1, 2]),
        (FEATHERSTONE_SENTENCES[1], &[3, 4]),
        (FEATHERSTONE_SENTENCES[2], &[5, 6]),
        (FEATHERSTONE_SENTENCES[3], &[7, 8, 9]),
        (BIRTHPLACE_EDIT, &[10]),
        (YEAR_EDIT, &[5]),
    ];
    for (sentence, claims) in decompositions {
        assert_eq!(claims_of(sentence), claims.to_vec());
        let list: Vec<String> = claims
            .iter()
            .map(|&i| format!("- {}", F_CLAIMS[i].text))
            .collect();
        b.task(
            TemplateId::ClaimDecomposition,
            &[("sentence", sentence)],
            &list.join("\n"),
        );
    }

    let variants = [(false, false), (true, false), (false, true), (true, true)];
    for claim in &F_CLAIMS {
        b.task(
            TemplateId::QuestionFromClaim,
            &[("claim", claim.text)],
            claim.question,
        );
    }

    // Answers found in the presented text of every edit state.
    for (e1, e2) in variants {
        let text = featherstone_text(e1, e2);
        for sentence in segment_sentences(&text).iter().map(|s| s.text(&text)) {
            let stated = presented_sentence(sentence);
            for ci in claims_of(sentence) {
                let claim = &F_CLAIMS[ci];
                let (_, value) = stated
                    .facts
                    .iter()
                    .find(|(f, _)| *f == claim.fact)
                    .expect("claim fact stated");
                b.qa_in(claim.question, &text, sentence, value, 0.95);
                b.nli(&text, claim.text, Label::Entailment);
            }
        }
    }

    // Answers in the additional samples, and the judgments built on them.
    for claim in &F_CLAIMS {
        let mut answers: Vec<&str> = vec![claim.value];
        for (text, stated) in &sample_texts {
            let hit = stated.iter().find_map(|s| {
                s.facts
                    .iter()
                    .find(|(f, _)| *f == claim.fact)
                    .map(|(_, w)| (s, *w))
            });
            match hit {
                Some((s, w)) => {
                    b.qa_in(claim.question, text, &s.text, w, 0.9);
                    if !answers.contains(&w) {
                        answers.push(w);
                    }
                }
                None => b.qa_none(claim.question, text),
            }
            for s in stated {
                b.nli(&s.text, claim.text, sentence_to_claim(claim, s));
            }
        }
        for w in &answers {
            b.nli(claim.text, &ctx(claim.question, w), Label::Entailment);
            b.nli(
                &ctx(claim.question, w),
                claim.text,
                answer_to_claim(claim, w),
            );
        }
    }

    // The brushed span in the first sentence.
    b.task(
        TemplateId::QuestionFromSpan,
        &[
            ("context", FEATHERSTONE_SENTENCES[0]),
            ("target", BRUSH_TEXT),
        ],
        BRUSH_QUESTION,
    );
    for (e1, e2) in variants {
        let text = featherstone_text(e1, e2);
        b.qa_in(
            BRUSH_QUESTION,
            &text,
            FEATHERSTONE_SENTENCES[0],
            BRUSH_TEXT,
            0.95,
        );
        b.nli(&text, &ctx(BRUSH_QUESTION, BRUSH_TEXT), Label::Entailment);
    }
    for (text, stated) in &sample_texts {
        b.qa_in(
            BRUSH_QUESTION,
            text,
            &stated[0].text,
            samples_known_for(stated),
            0.9,
        );
    }
    let proxy = ctx(BRUSH_QUESTION, BRUSH_TEXT);
    for x in KNOWN_FOR_A.iter().chain(&KNOWN_FOR_B) {
        b.nli(&proxy, &ctx(BRUSH_QUESTION, x), Label::Entailment);
        for y in KNOWN_FOR_A.iter().chain(&KNOWN_FOR_B) {
            let a = |s: &str| KNOWN_FOR_A.contains(&s);
            let label = if a(x) == a(y) || a(x) {
                Label::Entailment
            } else {
                Label::Neutral
            };
            b.nli(&ctx(BRUSH_QUESTION, x), &ctx(BRUSH_QUESTION, y), label);
        }
    }
    b.table
}

fn samples_known_for(stated: &[Stated]) -> &'static str {
    stated[0]
        .facts
        .iter()
        .find(|(f, _)| *f == Fact::KnownFor)
        .map(|(_, w)| *w)
        .expect("first sentence names it")
}
