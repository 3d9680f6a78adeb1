//! Summary statistics for consistency scores.

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("{scores} scores but {labels} labels")]
    Length { scores: usize, labels: usize },
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
}

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counting one half.
pub fn auroc<T: Float>(scores: &[T], labels: &[bool]) -> Result<T, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Length {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricError::Undefined("NaN score"));
    }
    let positives = labels.iter().filter(|l| **l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::Undefined("both classes must be present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));

    // Mann-Whitney U from midranks of tie groups, counted in doubled units to stay integral.
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let doubled_midrank = (i + 1 + j + 1) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        doubled_rank_sum += doubled_midrank * pos_in_group;
        i = j + 1;
    }
    let p = positives as u128;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    let denom = 2 * p * negatives as u128;
    Ok(T::from(doubled_u).expect("finite") / T::from(denom).expect("finite"))
}

pub fn mean<T: Float>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let sum = xs.iter().fold(T::zero(), |acc, &x| acc + x);
    Some(sum / T::from(xs.len()).expect("length fits"))
}

/// Population variance.
pub fn variance<T: Float>(xs: &[T]) -> Option<T> {
    let m = mean(xs)?;
    let ss = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m) * (x - m));
    Some(ss / T::from(xs.len()).expect("length fits"))
}

pub const HISTOGRAM_BINS: usize = 10;

/// Counts of scores in ten equal bins over [0, 1]; 1.0 falls in the last bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: [usize; HISTOGRAM_BINS],
}

impl Histogram {
    pub fn of<T: Float>(scores: &[T]) -> Self {
        let mut counts = [0; HISTOGRAM_BINS];
        for &s in scores {
            let clamped = s.max(T::zero()).min(T::one());
            let bin = (clamped * T::from(HISTOGRAM_BINS).expect("small"))
                .floor()
                .to_usize()
                .unwrap_or(0);
            counts[bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}
