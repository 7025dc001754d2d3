//! Publication-event scoring.
//!
//! [`event_auc`] is the threshold score `(m1 + 0.5 m2) / m`: a researcher
//! counts toward `m1` when the predicted probability of publishing is above
//! 0.5 and they published, or below 0.5 and they did not; toward `m2` when
//! the probability is exactly 0.5. [`roc_auc`] is the rank-based ROC area.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::PublicationCorpus;
use crate::creativity::CreativityModel;
use crate::predictor::event_probability;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AUCResult {
    pub auc: f64,
    pub m1: u64,
    pub m2: u64,
    pub m: u64,
    pub cohort: Option<u64>,
    pub year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    Pooled,
    PerCohort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub pooled: AUCResult,
    /// Empty unless requested with [`Grouping::PerCohort`].
    pub per_cohort: Vec<AUCResult>,
}

pub fn auc_from_counts(m1: u64, m2: u64, m: u64, cohort: Option<u64>, year: i32) -> Result<AUCResult, EvalError> {
    if m == 0 {
        return Err(EvalError::NothingScored);
    }
    if m1 + m2 > m {
        return Err(EvalError::InvalidCounts { m1, m2, m });
    }
    Ok(AUCResult {
        auc: (m1 as f64 + 0.5 * m2 as f64) / m as f64,
        m1,
        m2,
        m,
        cohort,
        year,
    })
}

/// `(m1, m2)` contribution of one researcher.
pub fn score_event(probability: f64, published: bool) -> (u64, u64) {
    if probability == 0.5 {
        (0, 1)
    } else if (probability > 0.5) == published {
        (1, 0)
    } else {
        (0, 0)
    }
}

/// Scores researchers' outcomes in year `y` against the model's event
/// probabilities for their cohort at step `y`. Researchers are those of
/// `researchers` (default: the whole corpus) with history at least 1 over
/// `[T0, y - 1]`.
pub fn event_auc(
    model: &CreativityModel,
    corpus: &PublicationCorpus,
    researchers: Option<&[String]>,
    year: i32,
    grouping: Grouping,
) -> Result<AucReport, EvalError> {
    let grid = model.params.grid().map_err(|_| EvalError::YearOffGrid(year))?;
    let step = grid.step_of_year(year).ok_or(EvalError::YearOffGrid(year))?;
    let ids: Vec<&str> = match researchers {
        Some(list) => list.iter().map(String::as_str).collect(),
        None => corpus.researchers().collect(),
    };

    // per cohort: (m1, m2, m)
    let mut tallies: BTreeMap<u64, (u64, u64, u64)> = BTreeMap::new();
    for id in ids {
        let i = corpus.history_between(id, grid.origin, year - 1);
        if i == 0 {
            continue;
        }
        let p = event_probability(model, i, step)?;
        let (a, b) = score_event(p, corpus.count_in(id, year) > 0);
        let t = tallies.entry(i).or_default();
        t.0 += a;
        t.1 += b;
        t.2 += 1;
    }
    let (m1, m2, m) = tallies
        .values()
        .fold((0, 0, 0), |acc, t| (acc.0 + t.0, acc.1 + t.1, acc.2 + t.2));
    let pooled = auc_from_counts(m1, m2, m, None, year)?;
    let per_cohort = match grouping {
        Grouping::Pooled => Vec::new(),
        Grouping::PerCohort => tallies
            .iter()
            .map(|(&i, &(a, b, n))| auc_from_counts(a, b, n, Some(i), year))
            .collect::<Result<_, _>>()?,
    };
    Ok(AucReport { pooled, per_cohort })
}

/// Probability that a random positive outranks a random negative, ties
/// counting half. `None` unless both classes are present.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    if scores.len() != labels.len() {
        return None;
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of mid-ranks of the positives
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let mid_rank = (k + 1 + end) as f64 / 2.0;
        rank_sum += mid_rank * order[k..end].iter().filter(|&&r| labels[r]).count() as f64;
        k = end;
    }
    let p = positives as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}
