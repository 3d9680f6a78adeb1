use selfcheck_core::text::{char_slice, segment_sentences};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    text: String,
    sentences: Vec<String>,
}

fn corpus() -> Vec<Case> {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/segmentation/corpus.json"
    );
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn hand_segmented_corpus() {
    let corpus = corpus();
    let total: usize = corpus.iter().map(|c| c.sentences.len()).sum();
    assert_eq!(total, 50);
    let mut wrong = Vec::new();
    for case in &corpus {
        let got: Vec<&str> = segment_sentences(&case.text)
            .iter()
            .map(|s| s.text(&case.text))
            .collect();
        if got != case.sentences {
            wrong.push(format!("{:?}\n  got {got:?}", case.text));
        }
    }
    assert!(wrong.is_empty(), "{}", wrong.join("\n"));
}

#[test]
fn corpus_offsets_are_char_offsets() {
    for case in corpus() {
        let spans = segment_sentences(&case.text);
        let mut rebuilt = String::new();
        let mut at = 0;
        for s in &spans {
            rebuilt.push_str(char_slice(&case.text, at, s.start));
            rebuilt.push_str(char_slice(&case.text, s.start, s.end));
            assert!(char_slice(&case.text, at, s.start).trim().is_empty());
            at = s.end;
        }
        rebuilt.push_str(char_slice(&case.text, at, case.text.chars().count()));
        assert_eq!(rebuilt, case.text);
    }
}
