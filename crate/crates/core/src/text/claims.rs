use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TextError;
use crate::gateway::{slots, Gateway, TemplateId};

/// A single verifiable proposition taken from one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomicClaim {
    pub id: String,
    pub text: String,
    pub sentence_index: usize,
    pub ordinal: usize,
}

/// Stable claim identifier: depends only on the sentence text and the ordinal,
/// so an unchanged sentence keeps its claim ids across edits.
pub fn claim_id(sentence: &str, ordinal: usize) -> String {
    let mut h = Sha256::new();
    h.update(sentence.as_bytes());
    h.update([0x1f]);
    h.update(ordinal.to_le_bytes());
    let digest = h.finalize();
    let mut id = String::with_capacity(18);
    id.push_str("c-");
    for b in &digest[..8] {
        write!(id, "{b:02x}").expect("writing to a String");
    }
    id
}

/// Claims from a `- `-prefixed list, one per line, in order.
pub fn parse_claim_list(completion: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in completion.lines() {
        let line = line.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        match line.strip_prefix("- ").map(str::trim) {
            Some(claim) if !claim.is_empty() => out.push(claim.to_string()),
            _ => warn!("skipping malformed claim line {line:?}"),
        }
    }
    out
}

/// Breaks one sentence into atomic claims via the decomposition prompt.
pub fn decompose_claims(
    sentence: &str,
    sentence_index: usize,
    gateway: &Gateway,
) -> Result<Vec<AtomicClaim>, TextError> {
    let sentence = sentence.trim();
    if sentence.is_empty() {
        return Err(TextError::Empty("sentence"));
    }
    let completion = gateway.complete_task(
        TemplateId::ClaimDecomposition,
        &slots([("sentence", sentence)]),
    )?;
    let claims = parse_claim_list(&completion);
    if claims.is_empty() {
        return Err(TextError::EmptyDecomposition {
            sentence: sentence.to_string(),
        });
    }
    Ok(claims
        .into_iter()
        .enumerate()
        .map(|(ordinal, text)| AtomicClaim {
            id: claim_id(sentence, ordinal),
            text,
            sentence_index,
            ordinal,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Backend, BackendConfig, FixtureBackend, FixtureTable, Template};
    use std::sync::Arc;

    const COLLINS: &str = "Michael Collins (born October 31, 1930) is a retired American astronaut and test pilot who was the Command Module Pilot for the Apollo 11 mission in 1969.";
    const COLLINS_CLAIMS: &str = "- Michael Collins was born on October 31, 1930.
- Michael Collins is retired.
- Michael Collins is an American.
- Michael Collins was an astronaut.
- Michael Collins was a test pilot.
- Michael Collins was the Command Module Pilot.
- Michael Collins was the Command Module Pilot for the Apollo 11 mission.
- Michael Collins was the Command Module Pilot for the Apollo 11 mission in 1969.";
    const RODRIGO: &str = "Rodrigo Hernández is a Spanish professional footballer who currently plays as a central midfielder for Premier League club Manchester City.";
    const RODRIGO_CLAIMS: &str = "- Rodrigo Hernández is Spanish.
- Rodrigo Hernández is a professional footballer.
- Rodrigo Hernández plays as a central midfielder
- Rodrigo Hernández plays for Manchester City.
- Rodrigo Hernández plays for a Premier League club.";

    fn gateway_with(pairs: &[(&str, &str)]) -> (Gateway, Arc<FixtureBackend>) {
        let mut t = FixtureTable::default();
        for (sentence, completion) in pairs {
            let prompt = Template::get(TemplateId::ClaimDecomposition)
                .render(&slots([("sentence", sentence)]))
                .unwrap();
            t.insert_task(TemplateId::ClaimDecomposition, &prompt, completion)
                .unwrap();
        }
        let b = Arc::new(FixtureBackend::new(t));
        (Gateway::new(b.clone(), BackendConfig::default()), b)
    }

    #[test]
    fn collins_sentence_yields_eight_claims() {
        let (g, _) = gateway_with(&[(COLLINS, COLLINS_CLAIMS)]);
        let claims = decompose_claims(COLLINS, 0, &g).unwrap();
        assert_eq!(claims.len(), 8);
        assert_eq!(
            claims[0].text,
            "Michael Collins was born on October 31, 1930."
        );
        assert_eq!(
            claims.iter().map(|c| c.ordinal).collect::<Vec<_>>(),
            (0..8).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rodrigo_sentence_yields_five_claims() {
        let (g, _) = gateway_with(&[(RODRIGO, RODRIGO_CLAIMS)]);
        let claims = decompose_claims(RODRIGO, 3, &g).unwrap();
        assert_eq!(claims.len(), 5);
        assert!(claims
            .iter()
            .any(|c| c.text == "Rodrigo Hernández is Spanish."));
        assert!(claims.iter().all(|c| c.sentence_index == 3));
    }

    #[test]
    fn no_facts_is_an_empty_decomposition() {
        let (g, _) = gateway_with(&[("Hello there.", "no facts")]);
        assert!(matches!(
            decompose_claims("Hello there.", 0, &g),
            Err(TextError::EmptyDecomposition { .. })
        ));
    }

    #[test]
    fn ids_are_stable_and_cached() {
        let (g, b) = gateway_with(&[(RODRIGO, RODRIGO_CLAIMS)]);
        let first = decompose_claims(RODRIGO, 0, &g).unwrap();
        let second = decompose_claims(RODRIGO, 0, &g).unwrap();
        assert_eq!(first, second);
        assert_eq!(b.call_counts().unwrap().task, 1);
        assert_eq!(first[1].id, claim_id(RODRIGO, 1));
        assert_ne!(first[0].id, first[1].id);
    }

    #[test]
    fn malformed_lines_are_skipped() {
        let parsed = parse_claim_list("Output:\n- first.  \n* nope\n-\n- second.\n\n");
        assert_eq!(parsed, vec!["first.", "second."]);
    }
}
