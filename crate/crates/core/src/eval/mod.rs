//! Batch evaluation: score labeled claims against additional samples and
//! report how well the consistency score separates supported claims from
//! unsupported ones.

mod synth;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{judge_sample, score_from_labels, GenerationSample, SupportLabel};
use crate::gateway::Gateway;
use crate::metrics::{auroc, mean, variance, Histogram};
use crate::parallel::{bounded_map, DEFAULT_FAN_OUT};
use crate::text::{claim_id, AtomicClaim};

pub use synth::{synthesize, SynthParams, SyntheticDataset};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("record {record}: {message}")]
    Schema { record: usize, message: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimLabel {
    /// Supported
    S,
    /// Not supported
    NS,
    /// Irrelevant
    IR,
}

impl ClaimLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClaimLabel::S => "S",
            ClaimLabel::NS => "NS",
            ClaimLabel::IR => "IR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledClaim {
    pub text: String,
    pub label: ClaimLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledGeneration {
    pub topic: String,
    pub generation: String,
    pub claims: Vec<LabeledClaim>,
    pub additional_samples: Vec<String>,
}

/// A loaded dataset with irrelevant claims removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub generations: Vec<LabeledGeneration>,
    pub dropped_irrelevant: usize,
    /// Records left without claims after dropping irrelevant ones.
    pub excluded: usize,
}

impl Dataset {
    pub fn from_records(records: Vec<LabeledGeneration>) -> Self {
        let mut dropped_irrelevant = 0;
        let mut excluded = 0;
        let mut generations = Vec::with_capacity(records.len());
        for mut g in records {
            let before = g.claims.len();
            g.claims.retain(|c| c.label != ClaimLabel::IR);
            dropped_irrelevant += before - g.claims.len();
            if g.claims.is_empty() {
                excluded += 1;
            } else {
                generations.push(g);
            }
        }
        Self {
            generations,
            dropped_irrelevant,
            excluded,
        }
    }

    pub fn min_samples(&self) -> usize {
        self.generations
            .iter()
            .map(|g| g.additional_samples.len())
            .min()
            .unwrap_or(0)
    }
}

/// Parses JSON lines; blank lines are ignored. Record numbers in errors are 1-based lines.
pub fn parse_dataset(text: &str) -> Result<Dataset, EvalError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: LabeledGeneration =
            serde_json::from_str(line).map_err(|e| EvalError::Schema {
                record: i + 1,
                message: e.to_string(),
            })?;
        if record.claims.is_empty() {
            return Err(EvalError::Schema {
                record: i + 1,
                message: "no claims".into(),
            });
        }
        records.push(record);
    }
    Ok(Dataset::from_records(records))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_dataset(&text)
}

/// One line per record, as read by [`parse_dataset`].
pub fn dataset_to_jsonl(records: &[LabeledGeneration]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("dataset records serialize"));
        out.push('\n');
    }
    out
}

fn io_error(path: &Path, e: std::io::Error) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimScore {
    pub generation_index: usize,
    pub topic: String,
    pub claim: String,
    pub label: ClaimLabel,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub variance: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub pooled_auroc: Option<f64>,
    /// Mean of per-generation AUROC.
    pub mean_auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub samples: usize,
    pub n_generations: usize,
    pub n_claims: usize,
    pub mean_claims_per_generation: f64,
    pub errored_claims: usize,
    /// AUROC over all scored claims pooled, supported as the positive class.
    pub auroc: Option<f64>,
    /// AUROC per generation, over generations with both classes present.
    pub generation_auroc: Option<Spread>,
    /// Pooled AUROC over bootstrap resamples of the scored claims.
    pub bootstrap_auroc: Option<Spread>,
    pub mean_score_supported: Option<f64>,
    pub mean_score_not_supported: Option<f64>,
    pub variance_score_supported: Option<f64>,
    pub variance_score_not_supported: Option<f64>,
    pub histogram: Histogram,
    pub histogram_supported: Histogram,
    pub histogram_not_supported: Histogram,
    pub sweep: Option<Vec<SweepPoint>>,
    pub claims: Vec<ClaimScore>,
}

fn pooled(claims: &[&ClaimScore]) -> (Vec<f64>, Vec<bool>) {
    claims
        .iter()
        .filter_map(|c| c.score.map(|s| (s, c.label == ClaimLabel::S)))
        .unzip()
}

pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0;

/// Pooled AUROC over `resamples` draws of the claims with replacement.
/// Draws that miss a class are skipped.
fn bootstrap_auroc(scores: &[f64], labels: &[bool], resamples: usize, seed: u64) -> Option<Spread> {
    if scores.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = vec![0.0; scores.len()];
    let mut l = vec![false; scores.len()];
    let values: Vec<f64> = (0..resamples)
        .filter_map(|_| {
            for k in 0..scores.len() {
                let i = rng.gen_range(0..scores.len());
                s[k] = scores[i];
                l[k] = labels[i];
            }
            auroc(&s, &l).ok()
        })
        .collect();
    Some(Spread {
        mean: mean(&values)?,
        variance: variance(&values)?,
        count: values.len(),
    })
}

fn per_generation_auroc(claims: &[ClaimScore]) -> Option<Spread> {
    let mut by_generation: BTreeMap<usize, Vec<&ClaimScore>> = BTreeMap::new();
    for c in claims {
        by_generation.entry(c.generation_index).or_default().push(c);
    }
    let values: Vec<f64> = by_generation
        .values()
        .filter_map(|cs| {
            let (s, l) = pooled(cs);
            auroc(&s, &l).ok()
        })
        .collect();
    Some(Spread {
        mean: mean(&values)?,
        variance: variance(&values)?,
        count: values.len(),
    })
}

impl EvalReport {
    /// Every aggregate of a report, computed from its per-claim dump alone.
    pub fn summarize(model: &str, samples: usize, claims: Vec<ClaimScore>) -> Self {
        let all: Vec<&ClaimScore> = claims.iter().collect();
        let (scores, labels) = pooled(&all);
        let supported: Vec<f64> = claims
            .iter()
            .filter(|c| c.label == ClaimLabel::S)
            .filter_map(|c| c.score)
            .collect();
        let unsupported: Vec<f64> = claims
            .iter()
            .filter(|c| c.label == ClaimLabel::NS)
            .filter_map(|c| c.score)
            .collect();
        let mut generations: Vec<usize> = claims.iter().map(|c| c.generation_index).collect();
        generations.dedup();
        let n_generations = generations.len();
        Self {
            model: model.to_string(),
            samples,
            n_generations,
            n_claims: claims.len(),
            mean_claims_per_generation: if n_generations == 0 {
                0.0
            } else {
                claims.len() as f64 / n_generations as f64
            },
            errored_claims: claims.iter().filter(|c| c.score.is_none()).count(),
            auroc: auroc(&scores, &labels).ok(),
            generation_auroc: per_generation_auroc(&claims),
            bootstrap_auroc: None,
            mean_score_supported: mean(&supported),
            mean_score_not_supported: mean(&unsupported),
            variance_score_supported: variance(&supported),
            variance_score_not_supported: variance(&unsupported),
            histogram: Histogram::of(&scores),
            histogram_supported: Histogram::of(&supported),
            histogram_not_supported: Histogram::of(&unsupported),
            sweep: None,
            claims,
        }
    }

    /// Fills in `bootstrap_auroc` with a fixed seed, so reports stay reproducible.
    pub fn with_bootstrap(mut self, resamples: usize) -> Self {
        let all: Vec<&ClaimScore> = self.claims.iter().collect();
        let (scores, labels) = pooled(&all);
        self.bootstrap_auroc = bootstrap_auroc(&scores, &labels, resamples, BOOTSTRAP_SEED);
        self
    }

    pub fn write_json(&self, path: &Path) -> Result<(), EvalError> {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| io_error(path, e))
    }

    /// Per-claim scores as CSV with columns topic, claim, label, score.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["topic", "claim", "label", "score"])?;
        for c in &self.claims {
            let score = c.score.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([
                c.topic.as_str(),
                c.claim.as_str(),
                c.label.as_str(),
                score.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Support labels of every claim against the first `n` samples of its record.
fn label_claims(
    dataset: &Dataset,
    n: usize,
    gateway: &Gateway,
) -> Vec<Vec<Result<Vec<SupportLabel>, String>>> {
    bounded_map(&dataset.generations, DEFAULT_FAN_OUT, |g| {
        let samples: Vec<GenerationSample> = g.additional_samples[..n]
            .iter()
            .enumerate()
            .map(|(i, t)| GenerationSample::new(i + 1, t.as_str()))
            .collect();
        g.claims
            .iter()
            .enumerate()
            .map(|(ordinal, c)| {
                let claim = AtomicClaim {
                    id: claim_id(&g.generation, ordinal),
                    text: c.text.clone(),
                    sentence_index: 0,
                    ordinal,
                };
                samples
                    .iter()
                    .map(|s| {
                        judge_sample(s, &claim, gateway)
                            .map(|(l, _)| l)
                            .map_err(|e| e.to_string())
                    })
                    .collect()
            })
            .collect()
    })
}

fn check_samples(dataset: &Dataset, n: usize) -> Result<(), EvalError> {
    if n == 0 {
        return Err(EvalError::Precondition(
            "need at least one additional sample".into(),
        ));
    }
    if let Some((i, g)) = dataset
        .generations
        .iter()
        .enumerate()
        .find(|(_, g)| g.additional_samples.len() < n)
    {
        return Err(EvalError::Precondition(format!(
            "generation {i} ({}) has {} additional samples, {n} requested",
            g.topic,
            g.additional_samples.len()
        )));
    }
    Ok(())
}

fn claim_scores(
    dataset: &Dataset,
    labels: &[Vec<Result<Vec<SupportLabel>, String>>],
    n: usize,
) -> Vec<ClaimScore> {
    let mut out = Vec::new();
    for (gi, (g, per_claim)) in dataset.generations.iter().zip(labels).enumerate() {
        for (c, result) in g.claims.iter().zip(per_claim) {
            let (score, error) = match result {
                Ok(l) => (score_from_labels(&l[..n]).ok(), None),
                Err(e) => (None, Some(e.clone())),
            };
            out.push(ClaimScore {
                generation_index: gi,
                topic: g.topic.clone(),
                claim: c.text.clone(),
                label: c.label,
                score,
                error,
            });
        }
    }
    out
}

fn model_name(gateway: &Gateway) -> String {
    gateway.config().nli_model.clone()
}

/// Scores every claim against the first `n` additional samples of its record.
pub fn score_dataset(
    dataset: &Dataset,
    n: usize,
    gateway: &Gateway,
) -> Result<EvalReport, EvalError> {
    check_samples(dataset, n)?;
    let labels = label_claims(dataset, n, gateway);
    Ok(
        EvalReport::summarize(&model_name(gateway), n, claim_scores(dataset, &labels, n))
            .with_bootstrap(BOOTSTRAP_RESAMPLES),
    )
}

/// AUROC for every sample count 1..=n_max. Judgments are made once at n_max
/// and reused for the shorter prefixes.
pub fn sweep_sample_size(
    dataset: &Dataset,
    n_max: usize,
    gateway: &Gateway,
) -> Result<Vec<SweepPoint>, EvalError> {
    Ok(score_with_sweep(dataset, n_max, gateway)?
        .sweep
        .expect("sweep requested"))
}

/// The report at `n_max` with the sweep curve attached.
pub fn score_with_sweep(
    dataset: &Dataset,
    n_max: usize,
    gateway: &Gateway,
) -> Result<EvalReport, EvalError> {
    check_samples(dataset, n_max)?;
    let labels = label_claims(dataset, n_max, gateway);
    let sweep = (1..=n_max)
        .map(|n| {
            let r = EvalReport::summarize("", n, claim_scores(dataset, &labels, n));
            info!("n = {n}: pooled AUROC {:?}", r.auroc);
            SweepPoint {
                n,
                pooled_auroc: r.auroc,
                mean_auroc: r.generation_auroc.map(|s| s.mean),
            }
        })
        .collect();
    let mut report = EvalReport::summarize(
        &model_name(gateway),
        n_max,
        claim_scores(dataset, &labels, n_max),
    )
    .with_bootstrap(BOOTSTRAP_RESAMPLES);
    report.sweep = Some(sweep);
    Ok(report)
}
