//! Historical-quantity cohorts and the observed productivity matrix.
//!
//! Cohort `i` at step `j` holds the researchers with exactly `i` publications
//! over `[T0, t_{j-1}]`; step `j` covers the single year `t_j = T1 + j`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PublicationCorpus;
use crate::matrix::Grid;

#[derive(Debug, Error, PartialEq)]
pub enum CohortError {
    #[error("step {step} outside grid with {steps} steps")]
    StepOutOfRange { step: usize, steps: usize },
    #[error("history origin {origin} is after the first cutpoint {start}")]
    OriginAfterStart { origin: i32, start: i32 },
    #[error("grid must have at least one step")]
    NoSteps,
}

/// Annual cutpoints `t_0 = T1 < t_1 < ... < t_J` with history counted from `T0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub origin: i32,
    pub start: i32,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(origin: i32, start: i32, steps: usize) -> Result<Self, CohortError> {
        if origin > start {
            return Err(CohortError::OriginAfterStart { origin, start });
        }
        if steps == 0 {
            return Err(CohortError::NoSteps);
        }
        Ok(Self {
            origin,
            start,
            steps,
        })
    }

    /// `t_j`; also the calendar year covered by step `j`.
    pub fn cutpoint(&self, j: usize) -> i32 {
        self.start + j as i32
    }

    pub fn end(&self) -> i32 {
        self.cutpoint(self.steps)
    }

    /// Step whose interval is the given year, if on the grid.
    pub fn step_of_year(&self, year: i32) -> Option<usize> {
        let j = year - self.start;
        (1..=self.steps as i32).contains(&j).then_some(j as usize)
    }

    /// Cutpoint index of a year (`0..=J`).
    pub fn index_of_cutpoint(&self, year: i32) -> Option<usize> {
        let l = year - self.start;
        (0..=self.steps as i32).contains(&l).then_some(l as usize)
    }

    fn check_step(&self, j: usize) -> Result<(), CohortError> {
        if (1..=self.steps).contains(&j) {
            Ok(())
        } else {
            Err(CohortError::StepOutOfRange {
                step: j,
                steps: self.steps,
            })
        }
    }
}

/// Optional restriction used by the distributional screens: members must have
/// published in the year `t_{j-1}` itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortOptions {
    pub require_activity: bool,
}

fn is_member(
    corpus: &PublicationCorpus,
    researcher: &str,
    i: u64,
    j: usize,
    grid: &TimeGrid,
    options: CohortOptions,
) -> bool {
    let prior = grid.cutpoint(j - 1);
    corpus.history_between(researcher, grid.origin, prior) == i
        && (!options.require_activity || corpus.count_in(researcher, prior) > 0)
}

/// Researchers with exactly `i` publications over `[T0, t_{j-1}]`.
pub fn cohort_members(
    corpus: &PublicationCorpus,
    i: u64,
    j: usize,
    grid: &TimeGrid,
    options: CohortOptions,
) -> Result<BTreeSet<String>, CohortError> {
    grid.check_step(j)?;
    Ok(corpus
        .researchers()
        .filter(|r| is_member(corpus, r, i, j, grid, options))
        .map(str::to_string)
        .collect())
}

/// Researcher counts `n_ij` and their publication counts `m_ij` in step `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortCounts {
    pub n: Grid<u64>,
    pub m: Grid<u64>,
}

impl CohortCounts {
    pub fn max_cohort(&self) -> usize {
        self.n.rows()
    }

    pub fn max_step(&self) -> usize {
        self.n.cols()
    }
}

/// Tallies `n_ij`, `m_ij` for `i ∈ [1, max_cohort]`, `j ∈ [1, max_step]`.
/// Researchers with no history, or more than `max_cohort`, are not counted.
pub fn count_matrices(
    corpus: &PublicationCorpus,
    grid: &TimeGrid,
    max_cohort: usize,
    max_step: usize,
    options: CohortOptions,
) -> Result<CohortCounts, CohortError> {
    if max_step > grid.steps {
        return Err(CohortError::StepOutOfRange {
            step: max_step,
            steps: grid.steps,
        });
    }
    let mut n = Grid::filled(max_cohort, max_step, 0u64);
    let mut m = Grid::filled(max_cohort, max_step, 0u64);
    for researcher in corpus.researchers() {
        let mut history = corpus.history_between(researcher, grid.origin, grid.cutpoint(0));
        for j in 1..=max_step {
            let produced = corpus.count_in(researcher, grid.cutpoint(j));
            let active = corpus.count_in(researcher, grid.cutpoint(j - 1)) > 0;
            let i = history as usize;
            if (1..=max_cohort).contains(&i) && (!options.require_activity || active) {
                *n.get_mut(i, j) += 1;
                *m.get_mut(i, j) += produced;
            }
            history += produced;
        }
    }
    Ok(CohortCounts { n, m })
}

/// Observed `η_ij = m_ij / n_ij`; `None` where `n_ij = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductivityMatrix {
    pub eta: Grid<Option<f64>>,
}

impl ProductivityMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        *self.eta.get(i, j)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.eta
            .write_csv(&mut buf, |v| v.map(|x| x.to_string()).unwrap_or_default())
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("utf-8")
    }
}

pub fn productivity(counts: &CohortCounts) -> ProductivityMatrix {
    let eta = Grid::from_fn(counts.n.rows(), counts.n.cols(), |i, j| {
        let n = *counts.n.get(i, j);
        (n > 0).then(|| *counts.m.get(i, j) as f64 / n as f64)
    });
    ProductivityMatrix { eta }
}
