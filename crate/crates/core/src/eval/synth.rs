use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dataset_to_jsonl, io_error, ClaimLabel, EvalError, LabeledClaim, LabeledGeneration};
use crate::gateway::{FixtureTable, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub generations: usize,
    /// Chance that a sample supports a supported claim.
    pub s_rate: f64,
    /// Chance that a sample supports an unsupported claim.
    pub ns_rate: f64,
    pub samples: usize,
    pub min_claims: usize,
    pub max_claims: usize,
    pub s_share: f64,
    pub ns_share: f64,
    /// Chance that a non-supporting sample contradicts instead of staying silent.
    pub contradict_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 1,
            generations: 50,
            s_rate: 0.564,
            ns_rate: 0.156,
            samples: 20,
            min_claims: 24,
            max_claims: 36,
            s_share: 0.44,
            ns_share: 0.42,
            contradict_rate: 0.5,
        }
    }
}

/// Labeled records plus the NLI table that plants their support pattern.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub records: Vec<LabeledGeneration>,
    pub fixture: FixtureTable,
}

const GIVEN: &[&str] = &[
    "Ada", "Bram", "Cora", "Dario", "Edda", "Fenn", "Greta", "Hugo", "Ilse", "Joren", "Kaia",
    "Lars", "Mira", "Nils", "Orla", "Piet", "Quinn", "Rosa", "Sven", "Tova", "Ulla", "Vito",
    "Wren", "Yara",
];
const FAMILY: &[&str] = &[
    "Achterberg",
    "Brandt",
    "Castellan",
    "Dunmore",
    "Eskildsen",
    "Falk",
    "Gallo",
    "Hartwell",
    "Ivers",
    "Jansen",
    "Kovalenko",
    "Lindqvist",
    "Marchetti",
    "Norberg",
    "Okafor",
    "Pereira",
    "Quist",
    "Rasmussen",
    "Solberg",
    "Thorne",
];
const CITIES: &[&str] = &[
    "Aarhus",
    "Bergen",
    "Coimbra",
    "Dresden",
    "Eindhoven",
    "Florence",
    "Galway",
    "Hamburg",
    "Innsbruck",
    "Krakow",
    "Leuven",
    "Malmo",
    "Nantes",
    "Oulu",
    "Porto",
    "Riga",
    "Salzburg",
    "Tartu",
    "Utrecht",
    "Valencia",
];
const FIELDS: &[&str] = &[
    "architecture",
    "botany",
    "chemistry",
    "economics",
    "geology",
    "history",
    "linguistics",
    "mathematics",
    "music",
    "painting",
    "philosophy",
    "physics",
    "sculpture",
    "zoology",
];
const THINGS: &[&str] = &[
    "a novel",
    "a bridge",
    "a symphony",
    "a textbook",
    "a museum",
    "a prize",
    "a journal",
    "a school",
    "a theatre",
    "a lighthouse",
    "a garden",
    "an observatory",
    "a film",
    "a ship",
];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn claim_text(rng: &mut ChaCha8Rng, name: &str) -> String {
    let year = rng.gen_range(1850..2020);
    match rng.gen_range(0..8) {
        0 => format!("{name} was born in {}.", pick(rng, CITIES)),
        1 => format!(
            "{name} studied {} in {}.",
            pick(rng, FIELDS),
            pick(rng, CITIES)
        ),
        2 => format!("{name} moved to {} in {year}.", pick(rng, CITIES)),
        3 => format!("{name} founded {} in {year}.", pick(rng, THINGS)),
        4 => format!(
            "{name} received {} for {}.",
            pick(rng, &["an award", "a medal", "a grant"]),
            pick(rng, FIELDS)
        ),
        5 => format!(
            "{name} taught {} at a college in {}.",
            pick(rng, FIELDS),
            pick(rng, CITIES)
        ),
        6 => format!(
            "{name} designed {} in {}.",
            pick(rng, THINGS),
            pick(rng, CITIES)
        ),
        _ => format!("{name} wrote about {} in {year}.", pick(rng, FIELDS)),
    }
}

fn contradiction_of(claim: &str) -> String {
    format!("It is false that {}.", claim.trim_end_matches('.'))
}

/// Generates a labeled dataset whose samples repeat a claim (support) with
/// the class's rate, otherwise deny it (contradiction) or say nothing of it.
/// Identical parameters give identical output.
pub fn synthesize(params: &SynthParams) -> Result<SyntheticDataset, EvalError> {
    for (name, r) in [
        ("s_rate", params.s_rate),
        ("ns_rate", params.ns_rate),
        ("contradict_rate", params.contradict_rate),
        ("s_share", params.s_share),
        ("ns_share", params.ns_share),
    ] {
        if !(0.0..=1.0).contains(&r) {
            return Err(EvalError::Precondition(format!(
                "{name} = {r} is outside [0, 1]"
            )));
        }
    }
    if params.s_share + params.ns_share > 1.0 {
        return Err(EvalError::Precondition(
            "s_share + ns_share exceeds 1".into(),
        ));
    }
    if params.min_claims == 0 || params.min_claims > params.max_claims {
        return Err(EvalError::Precondition(
            "claim range must satisfy 1 <= min <= max".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut fixture = FixtureTable {
        strict: false,
        nli_default: Label::Neutral,
        ..Default::default()
    };
    let mut records = Vec::with_capacity(params.generations);
    for g in 0..params.generations {
        let name = format!("{} {}", pick(&mut rng, GIVEN), pick(&mut rng, FAMILY));
        let topic = format!("{name} ({})", g + 1);
        let n_claims = rng.gen_range(params.min_claims..=params.max_claims);
        let mut claims: Vec<LabeledClaim> = Vec::with_capacity(n_claims);
        while claims.len() < n_claims {
            let text = claim_text(&mut rng, &name);
            if claims.iter().any(|c| c.text == text) {
                continue;
            }
            let u: f64 = rng.gen();
            let label = if u < params.s_share {
                ClaimLabel::S
            } else if u < params.s_share + params.ns_share {
                ClaimLabel::NS
            } else {
                ClaimLabel::IR
            };
            claims.push(LabeledClaim { text, label });
        }
        let generation = claims
            .iter()
            .map(|c| c.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");

        let mut additional_samples = Vec::with_capacity(params.samples);
        for k in 0..params.samples {
            let mut sentences = vec![format!("This is account {} of {name}.", k + 1)];
            for c in &claims {
                let rate = match c.label {
                    ClaimLabel::S => params.s_rate,
                    ClaimLabel::NS => params.ns_rate,
                    ClaimLabel::IR => continue,
                };
                if rng.gen::<f64>() < rate {
                    sentences.push(c.text.clone());
                } else if rng.gen::<f64>() < params.contradict_rate {
                    let denial = contradiction_of(&c.text);
                    fixture
                        .nli
                        .entry((denial.clone(), c.text.clone()))
                        .or_insert(Label::Contradiction);
                    sentences.push(denial);
                }
            }
            sentences[1..].shuffle(&mut rng);
            additional_samples.push(sentences.join(" "));
        }
        records.push(LabeledGeneration {
            topic,
            generation,
            claims,
            additional_samples,
        });
    }
    Ok(SyntheticDataset { records, fixture })
}

impl SyntheticDataset {
    /// Path of the fixture written next to a dataset file.
    pub fn fixture_path(dataset: &Path) -> PathBuf {
        let stem = dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        dataset.with_file_name(format!("{stem}.fixture.json"))
    }

    /// Writes the dataset as JSON lines and the fixture next to it.
    pub fn write(&self, dataset: &Path) -> Result<PathBuf, EvalError> {
        std::fs::write(dataset, dataset_to_jsonl(&self.records))
            .map_err(|e| io_error(dataset, e))?;
        let fixture = Self::fixture_path(dataset);
        std::fs::write(&fixture, self.fixture.to_json()).map_err(|e| io_error(&fixture, e))?;
        Ok(fixture)
    }
}
