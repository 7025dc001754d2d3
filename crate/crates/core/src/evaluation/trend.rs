//! Cohort trend lines and predicted-vs-actual distribution comparison.

use serde::{Deserialize, Serialize};

use super::ks::{ks_two_sample, KSResult};
use super::EvalError;
use crate::corpus::PublicationCorpus;
use crate::creativity::CreativityModel;
use crate::predictor::{expected_trajectory, PredictError, PredictionRun};

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the two lists after sorting each independently.
pub fn sorted_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    pearson(&xs, &ys)
}

/// Predicted cumulative counts per researcher and year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedPaths {
    pub researchers: Vec<String>,
    pub years: Vec<i32>,
    /// `values[r][k]` is the prediction for `researchers[r]` at `years[k]`.
    pub values: Vec<Vec<f64>>,
}

impl PredictedPaths {
    /// Replicate means of a simulated run.
    pub fn from_run(run: &PredictionRun) -> Self {
        let values = (0..run.researchers.len())
            .map(|r| {
                (run.start_step..=run.end_step)
                    .map(|l| run.mean_at(r, l))
                    .collect()
            })
            .collect();
        Self {
            researchers: run.researchers.clone(),
            years: run.years().collect(),
            values,
        }
    }

    /// Deterministic trajectories from each researcher's initial history.
    pub fn from_expected(
        model: &CreativityModel,
        initial: &[(String, u64)],
        start: usize,
        end: usize,
    ) -> Result<Self, PredictError> {
        let mut sorted = initial.to_vec();
        sorted.sort();
        let values = sorted
            .iter()
            .map(|(_, h)| expected_trajectory(model, *h, start, end))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            researchers: sorted.into_iter().map(|(id, _)| id).collect(),
            years: (start..=end).map(|l| model.params.start + l as i32).collect(),
            values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendCorrelation {
    pub year: i32,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub year: i32,
    /// Mean actual cumulative count.
    pub actual_mean: f64,
    /// Mean predicted cumulative count.
    pub predicted_mean: f64,
    pub correlation: TrendCorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub cohort: u64,
    pub researchers: usize,
    pub points: Vec<TrendPoint>,
}

/// Trend series for the test researchers with history `cohort` over
/// `[origin, years[0]]`. An empty cohort yields an empty series.
pub fn trend_fit(
    predicted: &PredictedPaths,
    actual: &PublicationCorpus,
    origin: i32,
    cohort: u64,
) -> Result<TrendReport, EvalError> {
    let start_year = *predicted.years.first().ok_or(EvalError::EmptySample)?;
    if !predicted.researchers.iter().any(|r| actual.contains(r)) {
        return Err(EvalError::NoOverlap);
    }
    let members: Vec<usize> = (0..predicted.researchers.len())
        .filter(|&r| actual.history_between(&predicted.researchers[r], origin, start_year) == cohort)
        .collect();
    if members.is_empty() {
        return Ok(TrendReport {
            cohort,
            researchers: 0,
            points: Vec::new(),
        });
    }
    let points = predicted
        .years
        .iter()
        .enumerate()
        .map(|(k, &year)| {
            let act: Vec<f64> = members
                .iter()
                .map(|&r| actual.history_between(&predicted.researchers[r], origin, year) as f64)
                .collect();
            let pred: Vec<f64> = members.iter().map(|&r| predicted.values[r][k]).collect();
            TrendPoint {
                year,
                actual_mean: mean(&act),
                predicted_mean: mean(&pred),
                correlation: TrendCorrelation {
                    year,
                    s1: pearson(&act, &pred),
                    s2: sorted_pearson(&act, &pred),
                },
            }
        })
        .collect();
    Ok(TrendReport {
        cohort,
        researchers: members.len(),
        points,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Shape summary of one integer sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub mean: f64,
    pub median: u64,
    pub p95: u64,
    pub max: u64,
    /// Sample skewness; `None` when the variance is zero.
    pub skewness: Option<f64>,
}

impl Shape {
    pub fn of(sample: &[u64]) -> Option<Self> {
        if sample.is_empty() {
            return None;
        }
        let mut sorted = sample.to_vec();
        sorted.sort_unstable();
        let rank = |q: f64| sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        let n = sorted.len() as f64;
        let m = sorted.iter().map(|&v| v as f64).sum::<f64>() / n;
        let (m2, m3) = sorted.iter().fold((0.0, 0.0), |(a, b), &v| {
            let d = v as f64 - m;
            (a + d * d, b + d * d * d)
        });
        let (m2, m3) = (m2 / n, m3 / n);
        Some(Self {
            mean: m,
            median: rank(0.5),
            p95: rank(0.95),
            max: *sorted.last().expect("non-empty"),
            skewness: (m2 > 0.0).then(|| m3 / m2.powf(1.5)),
        })
    }

    /// Distance from the median to the 95th percentile.
    pub fn upper_spread(&self) -> u64 {
        self.p95 - self.median
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionComparison {
    pub year: i32,
    pub actual: Shape,
    pub predicted: Shape,
    pub ks: KSResult,
}

/// Per-year two-sample KS between actual cumulative counts over `[origin, y]`
/// and the run's predictions pooled over replicates. `members` restricts both
/// sides to a subset of the run's researchers.
pub fn compare_distributions(
    run: &PredictionRun,
    actual: &PublicationCorpus,
    origin: i32,
    members: Option<&[String]>,
) -> Result<Vec<DistributionComparison>, EvalError> {
    let idx: Vec<usize> = match members {
        None => (0..run.researchers.len()).collect(),
        Some(ids) => ids.iter().filter_map(|id| run.researcher_index(id)).collect(),
    };
    if !idx.iter().any(|&r| actual.contains(&run.researchers[r])) {
        return Err(EvalError::NoOverlap);
    }
    (run.start_step..=run.end_step)
        .map(|l| {
            let year = run.year_of(l);
            let act: Vec<u64> = idx
                .iter()
                .map(|&r| actual.history_between(&run.researchers[r], origin, year))
                .collect();
            let pred: Vec<u64> = idx.iter().flat_map(|&r| run.values_at(r, l)).collect();
            Ok(DistributionComparison {
                year,
                actual: Shape::of(&act).ok_or(EvalError::EmptySample)?,
                predicted: Shape::of(&pred).ok_or(EvalError::EmptySample)?,
                ks: ks_two_sample(&act, &pred)?,
            })
        })
        .collect()
}
