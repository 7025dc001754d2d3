//! Validation protocols for trained models and forecasts.
//!
//! * [`ks`]: Poisson-reference and two-sample Kolmogorov–Smirnov tests.
//! * [`screen`]: per-cohort Poisson screening of next-year output.
//! * [`trend`]: cohort mean trajectories, individual and sorted correlations,
//!   and predicted-vs-actual distribution comparison.
//! * [`auc`]: the 0.5-threshold publication-event score and a rank ROC-AUC.

pub mod auc;
pub mod ks;
pub mod screen;
pub mod trend;

use thiserror::Error;

use crate::creativity::ModelError;

pub use auc::{auc_from_counts, event_auc, roc_auc, score_event, AUCResult, AucReport, Grouping};
pub use ks::{ks_poisson, ks_two_sample, KSResult, PValueMethod, Reference};
pub use screen::{
    cohort_poisson_screen, screen_samples, CohortLabel, CohortSelection, ScreenConfig, ScreenReport, ScreenRow,
};
pub use trend::{
    compare_distributions, pearson, sorted_pearson, trend_fit, DistributionComparison, PredictedPaths, Shape,
    TrendCorrelation, TrendPoint, TrendReport,
};

/// Conventional significance level for pass/fail decisions.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty sample")]
    EmptySample,
    #[error("no test researchers overlap the ground-truth corpus")]
    NoOverlap,
    #[error("year {0} is not a step of the model grid")]
    YearOffGrid(i32),
    #[error("no researchers were scored")]
    NothingScored,
    #[error("invalid event counts: m1={m1} + m2={m2} exceeds m={m}")]
    InvalidCounts { m1: u64, m2: u64, m: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}
