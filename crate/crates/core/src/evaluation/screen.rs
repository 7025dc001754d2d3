//! Per-cohort Poisson screening of next-year output.
//!
//! For a year `y`, cohort `i` holds the researchers with `i` publications over
//! `[T0, y]`, optionally restricted to those active in `y` and to those with at
//! most `cap` publications in `y + 1`. Each cohort's `y + 1` output is tested
//! against a fitted Poisson.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ks::{ks_poisson, KSResult, DEFAULT_BOOTSTRAP};
use super::{EvalError, ALPHA};
use crate::corpus::PublicationCorpus;
use crate::parallel::map_range;

pub const MIN_SAMPLE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum CohortSelection {
    Exact(u64),
    UpTo(u64),
}

impl CohortSelection {
    fn cohorts(self) -> std::ops::RangeInclusive<u64> {
        match self {
            CohortSelection::Exact(i) => i..=i,
            CohortSelection::UpTo(cap) => 1..=cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CohortLabel {
    Tested,
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    /// First year counted in a history.
    pub origin: i32,
    pub year: i32,
    pub selection: CohortSelection,
    pub require_activity: bool,
    /// Drop researchers with more than this many publications in `y + 1`.
    pub next_year_cap: Option<u64>,
    pub min_sample: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl ScreenConfig {
    pub fn new(origin: i32, year: i32, selection: CohortSelection) -> Self {
        Self {
            origin,
            year,
            selection,
            require_activity: true,
            next_year_cap: None,
            min_sample: MIN_SAMPLE,
            bootstrap: DEFAULT_BOOTSTRAP,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRow {
    pub cohort: u64,
    pub year: i32,
    pub researchers: usize,
    pub label: CohortLabel,
    pub result: Option<KSResult>,
}

impl ScreenRow {
    pub fn passed(&self) -> Option<bool> {
        self.result.as_ref().map(|r| !r.rejects(ALPHA))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub rows: Vec<ScreenRow>,
    /// Share of tested researchers whose cohort was not rejected.
    pub q: Option<f64>,
}

impl ScreenReport {
    pub fn row(&self, cohort: u64) -> Option<&ScreenRow> {
        self.rows.iter().find(|r| r.cohort == cohort)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["i", "year", "researchers", "label", "statistic", "p_value", "passed"])?;
        for row in &self.rows {
            let label = match row.label {
                CohortLabel::Tested => "tested",
                CohortLabel::Insufficient => "insufficient",
            };
            let (d, p) = row
                .result
                .as_ref()
                .map(|r| (r.statistic.to_string(), r.p_value.to_string()))
                .unwrap_or_default();
            let passed = row.passed().map(|b| b.to_string()).unwrap_or_default();
            w.write_record([
                row.cohort.to_string(),
                row.year.to_string(),
                row.researchers.to_string(),
                label.to_string(),
                d,
                p,
                passed,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Next-year outputs grouped by history over `[origin, year]`.
fn samples_by_cohort(corpus: &PublicationCorpus, config: &ScreenConfig) -> BTreeMap<u64, Vec<u64>> {
    let mut by_cohort: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    let wanted = config.selection.cohorts();
    for r in corpus.researchers() {
        let i = corpus.history_between(r, config.origin, config.year);
        if !wanted.contains(&i) {
            continue;
        }
        if config.require_activity && corpus.count_in(r, config.year) == 0 {
            continue;
        }
        let next = corpus.count_in(r, config.year + 1);
        if config.next_year_cap.is_some_and(|cap| next > cap) {
            continue;
        }
        by_cohort.entry(i).or_default().push(next);
    }
    by_cohort
}

pub fn cohort_poisson_screen(corpus: &PublicationCorpus, config: &ScreenConfig) -> ScreenReport {
    let mut by_cohort = samples_by_cohort(corpus, config);
    let samples: Vec<(u64, Vec<u64>)> = config
        .selection
        .cohorts()
        .map(|i| (i, by_cohort.remove(&i).unwrap_or_default()))
        .collect();
    screen_cells(&samples, config.year, config.min_sample, config.bootstrap, config.seed)
}

/// Screens cohort samples the caller has already assembled.
pub fn screen_samples(
    samples: &[(u64, Vec<u64>)],
    year: i32,
    min_sample: usize,
    bootstrap: usize,
    seed: u64,
) -> Result<ScreenReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySample);
    }
    Ok(screen_cells(samples, year, min_sample, bootstrap, seed))
}

fn screen_cells(samples: &[(u64, Vec<u64>)], year: i32, min_sample: usize, bootstrap: usize, seed: u64) -> ScreenReport {
    let rows = map_range(0..samples.len(), |k| {
        let (cohort, sample) = &samples[k];
        let tested = sample.len() >= min_sample.max(1);
        let result = tested.then(|| {
            ks_poisson(sample, bootstrap, seed ^ cohort.rotate_left(32)).expect("sample is non-empty")
        });
        ScreenRow {
            cohort: *cohort,
            year,
            researchers: sample.len(),
            label: if tested { CohortLabel::Tested } else { CohortLabel::Insufficient },
            result,
        }
    });
    let tested: usize = rows.iter().filter(|r| r.result.is_some()).map(|r| r.researchers).sum();
    let passed: usize = rows
        .iter()
        .filter(|r| r.passed() == Some(true))
        .map(|r| r.researchers)
        .sum();
    ScreenReport {
        q: (tested > 0).then(|| passed as f64 / tested as f64),
        rows,
    }
}
