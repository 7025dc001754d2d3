//! Monte Carlo forecasts of cumulative publication counts.
//!
//! Each researcher starts from their history `h` at `t_X`; at every step `l` in
//! `X+1..=Y` they add a Poisson draw with rate `λ_{h,l}` and move to the cohort
//! of their new total. Draws come from a dedicated `(researcher, replicate)`
//! substream, so a run is reproducible regardless of thread count.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::distr::Distribution;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::creativity::{CreativityModel, ModelError};
use crate::parallel::map_range;
use crate::rng::substream;

pub const DEFAULT_REPLICATES: usize = 100;
pub const TRAJECTORY_HEADER: [&str; 4] = ["researcher_id", "replicate", "year", "h"];

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("researcher `{0}` has negative initial history {1}")]
    NegativeHistory(String, i64),
    #[error("researcher `{0}` listed twice")]
    DuplicateResearcher(String),
    #[error("invalid window: need 0 <= X < Y <= {steps}, got X={start} Y={end}")]
    Window { start: usize, end: usize, steps: usize },
    #[error("replicates must be positive")]
    NoReplicates,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Simulated trajectories `h(t_X), ..., h(t_Y)` for every researcher and replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRun {
    pub start_step: usize,
    pub end_step: usize,
    /// Calendar year of `t_0`, so step `l` ends in `grid_start + l`.
    pub grid_start: i32,
    pub replicates: usize,
    /// `None` for runs read back from CSV.
    pub seed: Option<u64>,
    pub researchers: Vec<String>,
    values: Vec<u64>,
    clamped: Vec<bool>,
}

impl PredictionRun {
    /// Points per trajectory (`Y - X + 1`).
    pub fn width(&self) -> usize {
        self.end_step - self.start_step + 1
    }

    pub fn year_of(&self, step: usize) -> i32 {
        self.grid_start + step as i32
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (self.start_step..=self.end_step).map(|l| self.year_of(l))
    }

    pub fn researcher_index(&self, id: &str) -> Option<usize> {
        self.researchers.binary_search_by(|r| r.as_str().cmp(id)).ok()
    }

    /// Trajectory of researcher `r` (by index) in `replicate`.
    pub fn path(&self, r: usize, replicate: usize) -> &[u64] {
        let start = (r * self.replicates + replicate) * self.width();
        &self.values[start..start + self.width()]
    }

    /// Whether the trajectory read a clamped cohort row at any step.
    pub fn was_clamped(&self, r: usize, replicate: usize) -> bool {
        self.clamped[r * self.replicates + replicate]
    }

    /// `h` at step `l` across replicates for researcher `r`.
    pub fn values_at(&self, r: usize, step: usize) -> impl Iterator<Item = u64> + '_ {
        let k = step - self.start_step;
        (0..self.replicates).map(move |rep| self.path(r, rep)[k])
    }

    pub fn mean_at(&self, r: usize, step: usize) -> f64 {
        self.values_at(r, step).map(|v| v as f64).sum::<f64>() / self.replicates as f64
    }

    /// All researchers' `h` at step `l`, pooled over replicates.
    pub fn pooled_at(&self, step: usize) -> Vec<u64> {
        (0..self.researchers.len())
            .flat_map(|r| self.values_at(r, step))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PredictError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| PredictError::Io(e.into());
        w.write_record(TRAJECTORY_HEADER).map_err(io)?;
        for (r, id) in self.researchers.iter().enumerate() {
            for rep in 0..self.replicates {
                for (year, h) in self.years().zip(self.path(r, rep)) {
                    w.write_record([id.as_str(), &rep.to_string(), &year.to_string(), &h.to_string()])
                        .map_err(io)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Per-researcher, per-year mean and quantiles over replicates.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), PredictError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| PredictError::Io(e.into());
        w.write_record(["researcher_id", "year", "mean", "q05", "q25", "q50", "q75", "q95", "clamped"])
            .map_err(io)?;
        for (r, id) in self.researchers.iter().enumerate() {
            let clamped = (0..self.replicates).filter(|&rep| self.was_clamped(r, rep)).count();
            for step in self.start_step..=self.end_step {
                let mut v: Vec<u64> = self.values_at(r, step).collect();
                v.sort_unstable();
                let mut fields = vec![
                    id.clone(),
                    self.year_of(step).to_string(),
                    format!("{}", self.mean_at(r, step)),
                ];
                for q in [0.05, 0.25, 0.5, 0.75, 0.95] {
                    fields.push(nearest_rank(&v, q).to_string());
                }
                fields.push(clamped.to_string());
                w.write_record(&fields).map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the trajectory CSV written by [`PredictionRun::write_csv`].
    pub fn read_csv<R: Read>(input: R, grid_start: i32) -> Result<Self, PredictError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let parse_err = |line: u64, message: String| PredictError::Parse { line, message };
        let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        if header.iter().ne(TRAJECTORY_HEADER) {
            return Err(parse_err(1, format!("expected header `{}`", TRAJECTORY_HEADER.join(","))));
        }
        let mut rows: Vec<(String, usize, i32, u64)> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |k: usize| record.get(k).unwrap_or("");
            let num = |k: usize| -> Result<i64, PredictError> {
                field(k)
                    .parse()
                    .map_err(|_| parse_err(line, format!("`{}` is not an integer", field(k))))
            };
            let (rep, year, h) = (num(1)?, num(2)?, num(3)?);
            if rep < 0 || h < 0 {
                return Err(parse_err(line, "negative replicate or h".into()));
            }
            rows.push((field(0).to_string(), rep as usize, year as i32, h as u64));
        }
        let researchers: Vec<String> = rows.iter().map(|r| r.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let replicates = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let first = rows.iter().map(|r| r.2).min().unwrap_or(grid_start);
        let last = rows.iter().map(|r| r.2).max().unwrap_or(grid_start);
        if first < grid_start || rows.is_empty() || first == last {
            return Err(parse_err(0, "trajectories must span at least two grid years".into()));
        }
        let mut run = PredictionRun {
            start_step: (first - grid_start) as usize,
            end_step: (last - grid_start) as usize,
            grid_start,
            replicates,
            seed: None,
            values: Vec::new(),
            clamped: vec![false; researchers.len() * replicates],
            researchers,
        };
        let width = run.width();
        let mut values = vec![None; run.researchers.len() * replicates * width];
        for (id, rep, year, h) in rows {
            let r = run.researcher_index(&id).expect("collected above");
            values[(r * replicates + rep) * width + (year - first) as usize] = Some(h);
        }
        run.values = values
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| parse_err(0, "incomplete trajectories: every researcher needs every replicate and year".into()))?;
        Ok(run)
    }
}

fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn check_window(model: &CreativityModel, start: usize, end: usize) -> Result<(), PredictError> {
    if start >= end || end > model.steps() {
        return Err(PredictError::Window {
            start,
            end,
            steps: model.steps(),
        });
    }
    Ok(())
}

/// Simulates `replicates` trajectories per researcher from step `start` to `end`.
pub fn predict(
    model: &CreativityModel,
    initial: &[(String, i64)],
    start: usize,
    end: usize,
    replicates: usize,
    seed: u64,
) -> Result<PredictionRun, PredictError> {
    check_window(model, start, end)?;
    if replicates == 0 {
        return Err(PredictError::NoReplicates);
    }
    let mut sorted: Vec<(String, u64)> = Vec::with_capacity(initial.len());
    for (id, h) in initial {
        if *h < 0 {
            return Err(PredictError::NegativeHistory(id.clone(), *h));
        }
        sorted.push((id.clone(), *h as u64));
    }
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(PredictError::DuplicateResearcher(w[0].0.clone()));
    }

    let width = end - start + 1;
    let per_researcher = map_range(0..sorted.len(), |r| {
        let mut values = Vec::with_capacity(replicates * width);
        let mut clamped = Vec::with_capacity(replicates);
        for rep in 0..replicates {
            let mut rng = substream(seed, r, rep);
            let mut h = sorted[r].1;
            let mut hit_clamp = false;
            values.push(h);
            for l in start + 1..=end {
                let lookup = model.lookup(h, l).expect("window checked");
                hit_clamp |= lookup.clamped;
                let rate = Poisson::new(lookup.rate).expect("model rates are positive and finite");
                h += rate.sample(&mut rng) as u64;
                values.push(h);
            }
            clamped.push(hit_clamp);
        }
        (values, clamped)
    });

    let mut values = Vec::with_capacity(sorted.len() * replicates * width);
    let mut clamped = Vec::with_capacity(sorted.len() * replicates);
    for (v, c) in per_researcher {
        values.extend(v);
        clamped.extend(c);
    }
    Ok(PredictionRun {
        start_step: start,
        end_step: end,
        grid_start: model.params.start,
        replicates,
        seed: Some(seed),
        researchers: sorted.into_iter().map(|(id, _)| id).collect(),
        values,
        clamped,
    })
}

/// Deterministic companion of [`predict`]: adds `λ_{round(h), l}` each step.
/// Returns `Y - X + 1` values starting at `initial_h`.
pub fn expected_trajectory(
    model: &CreativityModel,
    initial_h: u64,
    start: usize,
    end: usize,
) -> Result<Vec<f64>, PredictError> {
    check_window(model, start, end)?;
    let mut h = initial_h as f64;
    let mut path = vec![h];
    for l in start + 1..=end {
        h += model.creativity_at(h.round() as u64, l)?;
        path.push(h);
    }
    Ok(path)
}

/// Probability of at least one publication in step `j` for cohort `i`: `1 - e^{-λ_ij}`.
pub fn event_probability(model: &CreativityModel, i: u64, j: usize) -> Result<f64, ModelError> {
    Ok(-(-model.creativity_at(i, j)?).exp_m1())
}
