//! The latent creativity matrix `λ` (cohort `i` × step `j`).
//!
//! The matrix is split at `i = K`, `j = L` into four zones:
//!
//! | zone | cohorts  | steps    | source                                              |
//! |------|----------|----------|-----------------------------------------------------|
//! | I    | `i <= K` | `j <= L` | time rows and cohort columns fitted on observed `η` |
//! | II   | `i <= K` | `j > L`  | time rows extrapolated forward                      |
//! | III  | `i > K`  | `j <= L` | cohort columns extrapolated upward                  |
//! | IV   | `i > K`  | `j > L`  | rows refitted on zone III, columns refitted on II   |
//!
//! Zones I and IV receive two candidate values which are combined by
//! [`AveragingRule`]; both candidates are kept in the model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{CohortCounts, CohortError, ProductivityMatrix, TimeGrid};
use crate::matrix::Grid;
use crate::parallel::map_range;
use crate::regression::{
    fit_log_linear, fit_log_log, fit_poisson_irls, significance_chi2, Chi2Test, FitKind,
    RegressionError, RegressionFit,
};

pub const MODEL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("step {step} outside 1..={steps}")]
    StepOutOfRange { step: usize, steps: usize },
    #[error("rate at ({i}, {j}) is not a positive finite number: {value}")]
    NonPositiveRate { i: usize, j: usize, value: f64 },
    #[error("matrix shape {rows}x{cols} does not match I={max_cohort}, J={steps}")]
    Shape {
        rows: usize,
        cols: usize,
        max_cohort: usize,
        steps: usize,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Params(#[from] ModelError),
    #[error("training matrix is {rows}x{cols}, need at least K={k} x L={l}")]
    TrainingShape {
        rows: usize,
        cols: usize,
        k: usize,
        l: usize,
    },
    #[error("no {route} fit has enough data: {}", describe_failures(.failures))]
    Insufficient {
        route: Route,
        failures: Vec<(usize, RegressionError)>,
    },
}

fn describe_failures(failures: &[(usize, RegressionError)]) -> String {
    failures
        .iter()
        .map(|(k, e)| format!("#{k}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AveragingRule {
    #[default]
    Average,
    RowFirst,
    ColumnFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Weight each cell by its cohort size `n_ij`.
    #[default]
    Counts,
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    /// Least squares on `log η`.
    #[default]
    LeastSquares,
    /// Poisson GLM with exposure `n_ij`, for sensitivity runs.
    PoissonIrls,
}

fn default_min_cell_count() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `I`, largest cohort index in the model.
    pub max_cohort: usize,
    /// `J`, number of annual steps.
    pub steps: usize,
    /// `K`, largest cohort used for training.
    pub train_cohorts: usize,
    /// `L`, last step used for training.
    pub train_steps: usize,
    /// `T0`, first year of counted history.
    pub origin: i32,
    /// `T1 = t_0`.
    pub start: i32,
    #[serde(default)]
    pub averaging: AveragingRule,
    #[serde(default)]
    pub weighting: Weighting,
    /// Additive smoothing `ε` on `m_ij` (0 disables it).
    #[serde(default)]
    pub smoothing: f64,
    #[serde(default)]
    pub method: FitMethod,
    /// Cells with fewer researchers are left out of the fits.
    #[serde(default = "default_min_cell_count")]
    pub min_cell_count: u64,
}

impl ModelParams {
    pub fn new(max_cohort: usize, steps: usize, train_cohorts: usize, train_steps: usize, origin: i32, start: i32) -> Self {
        Self {
            max_cohort,
            steps,
            train_cohorts,
            train_steps,
            origin,
            start,
            averaging: AveragingRule::default(),
            weighting: Weighting::default(),
            smoothing: 0.0,
            method: FitMethod::default(),
            min_cell_count: default_min_cell_count(),
        }
    }

    /// dblp 1995–2009 training set with prediction through 2018.
    pub fn set6() -> Self {
        Self::new(180, 23, 42, 14, 1951, 1995)
    }

    /// dblp 1994–2009 training set with prediction through 2018.
    pub fn set5() -> Self {
        Self::new(180, 24, 42, 15, 1951, 1994)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidParams(m));
        if !(1..=self.max_cohort).contains(&self.train_cohorts) {
            return bad(format!("need 1 <= K <= I, got K={} I={}", self.train_cohorts, self.max_cohort));
        }
        if !(1..=self.steps).contains(&self.train_steps) {
            return bad(format!("need 1 <= L <= J, got L={} J={}", self.train_steps, self.steps));
        }
        if self.origin > self.start {
            return bad(format!("T0={} after T1={}", self.origin, self.start));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return bad(format!("smoothing must be a finite non-negative number, got {}", self.smoothing));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid, CohortError> {
        TimeGrid::new(self.origin, self.start, self.steps)
    }

    /// Zone of cell `(i, j)`.
    pub fn zone_of(&self, i: usize, j: usize) -> Zone {
        match (i <= self.train_cohorts, j <= self.train_steps) {
            (true, true) => Zone::I,
            (true, false) => Zone::II,
            (false, true) => Zone::III,
            (false, false) => Zone::IV,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    I,
    II,
    III,
    IV,
}

/// Which family of regressions a fit belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// log-linear in time, one per cohort `i <= K`, fitted on `η`
    TimeRows,
    /// log-log in cohort, one per step `j <= L`, fitted on `η`
    CohortColumns,
    /// log-linear in time for `i > K`, fitted on zone III values
    ExtrapolatedRows,
    /// log-log in cohort for `j > L`, fitted on zone II values
    ExtrapolatedColumns,
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Route::TimeRows => "time-row",
            Route::CohortColumns => "cohort-column",
            Route::ExtrapolatedRows => "extrapolated-row",
            Route::ExtrapolatedColumns => "extrapolated-column",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum FitSource {
    Fitted,
    /// Coefficients borrowed from the fit at index `from`.
    Fallback { from: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub route: Route,
    /// Cohort `i` for row routes, step `j` for column routes.
    pub index: usize,
    pub fit: RegressionFit,
    pub source: FitSource,
    /// Likelihood-ratio test against the pooled rate (observed-data fits only).
    pub chi2: Option<Chi2Test>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLookup {
    pub rate: f64,
    /// The cohort index was outside `1..=I` and was clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreativityModel {
    pub version: String,
    pub params: ModelParams,
    pub lambda: Grid<f64>,
    pub zone: Grid<Zone>,
    /// Value from the row (time) route, where one exists.
    pub row_candidate: Grid<Option<f64>>,
    /// Value from the column (cohort) route, where one exists.
    pub column_candidate: Grid<Option<f64>>,
    /// One per cohort `1..=I` (empty for hand-built models).
    pub row_fits: Vec<FitRecord>,
    /// One per step `1..=J` (empty for hand-built models).
    pub column_fits: Vec<FitRecord>,
}

impl CreativityModel {
    /// Wraps a given `I × J` rate matrix without fits.
    pub fn from_lambda(params: ModelParams, lambda: Grid<f64>) -> Result<Self, ModelError> {
        params.validate()?;
        check_shape(&params, &lambda)?;
        for (i, j, &value) in lambda.cells() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositiveRate { i, j, value });
            }
        }
        let zone = Grid::from_fn(params.max_cohort, params.steps, |i, j| params.zone_of(i, j));
        let empty = Grid::filled(params.max_cohort, params.steps, None);
        Ok(Self {
            version: MODEL_VERSION.to_string(),
            params,
            lambda,
            zone,
            row_candidate: empty.clone(),
            column_candidate: empty,
            row_fits: Vec::new(),
            column_fits: Vec::new(),
        })
    }

    pub fn max_cohort(&self) -> usize {
        self.params.max_cohort
    }

    pub fn steps(&self) -> usize {
        self.params.steps
    }

    /// `λ_ij` with cohort clamping: `i = 0` reads cohort 1, `i > I` reads cohort `I`.
    pub fn lookup(&self, i: u64, j: usize) -> Result<RateLookup, ModelError> {
        if !(1..=self.steps()).contains(&j) {
            return Err(ModelError::StepOutOfRange {
                step: j,
                steps: self.steps(),
            });
        }
        let top = self.max_cohort() as u64;
        let row = i.clamp(1, top);
        Ok(RateLookup {
            rate: *self.lambda.get(row as usize, j),
            clamped: row != i,
        })
    }

    pub fn creativity_at(&self, i: u64, j: usize) -> Result<f64, ModelError> {
        self.lookup(i, j).map(|l| l.rate)
    }

    pub fn row_fit(&self, i: usize) -> Option<&FitRecord> {
        self.row_fits.iter().find(|r| r.index == i)
    }

    pub fn column_fit(&self, j: usize) -> Option<&FitRecord> {
        self.column_fits.iter().find(|r| r.index == j)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let model: Self = serde_json::from_str(text)?;
        model.params.validate()?;
        check_shape(&model.params, &model.lambda)?;
        check_shape(&model.params, &model.zone)?;
        Ok(model)
    }

    pub fn lambda_csv(&self) -> String {
        self.lambda.to_csv_string()
    }
}

fn check_shape<T>(params: &ModelParams, grid: &Grid<T>) -> Result<(), ModelError> {
    if grid.rows() != params.max_cohort || grid.cols() != params.steps {
        return Err(ModelError::Shape {
            rows: grid.rows(),
            cols: grid.cols(),
            max_cohort: params.max_cohort,
            steps: params.steps,
        });
    }
    Ok(())
}

/// Time covariate `t_j - t_1` of step `j`.
fn elapsed(j: usize) -> f64 {
    j as f64 - 1.0
}

struct Observed {
    eta: f64,
    m: u64,
    n: u64,
}

type Outcome = Result<(RegressionFit, Option<Chi2Test>), RegressionError>;

/// Fits the four-zone creativity matrix to observed productivity.
pub fn train(
    eta: &ProductivityMatrix,
    counts: &CohortCounts,
    params: &ModelParams,
) -> Result<CreativityModel, TrainError> {
    params.validate()?;
    let (k, l) = (params.train_cohorts, params.train_steps);
    let (big_i, big_j) = (params.max_cohort, params.steps);
    for (rows, cols) in [(eta.eta.rows(), eta.eta.cols()), (counts.n.rows(), counts.n.cols())] {
        if rows < k || cols < l {
            return Err(TrainError::TrainingShape { rows, cols, k, l });
        }
    }

    let min_n = params.min_cell_count.max(1);
    let observed = |i: usize, j: usize| -> Option<Observed> {
        let n = *counts.n.get(i, j);
        if n < min_n {
            return None;
        }
        let m = *counts.m.get(i, j);
        let eta = if params.smoothing > 0.0 {
            (m as f64 + params.smoothing) / n as f64
        } else {
            eta.get(i, j)?
        };
        Some(Observed { eta, m, n })
    };
    let weight = |o: &Observed| match params.weighting {
        Weighting::Counts => o.n as f64,
        Weighting::Unweighted => 1.0,
    };

    // Observed-data fit over `cells` (covariate, observation) for one route.
    let fit_observed = |kind: FitKind, cells: Vec<(f64, Observed)>| -> Outcome {
        let fit = match params.method {
            FitMethod::LeastSquares => {
                let points: Vec<(f64, f64)> = cells.iter().map(|(x, o)| (*x, o.eta)).collect();
                let weights: Vec<f64> = cells.iter().map(|(_, o)| weight(o)).collect();
                match kind {
                    FitKind::LogLinear => fit_log_linear(&points, Some(&weights))?,
                    FitKind::LogLog => fit_log_log(&points, Some(&weights))?,
                }
            }
            FitMethod::PoissonIrls => {
                let xs: Vec<f64> = cells.iter().map(|c| c.0).collect();
                let ms: Vec<u64> = cells.iter().map(|c| c.1.m).collect();
                let ns: Vec<u64> = cells.iter().map(|c| c.1.n).collect();
                fit_poisson_irls(kind, &xs, &ms, &ns)?
            }
        };
        let ms: Vec<u64> = cells.iter().map(|c| c.1.m).collect();
        let ns: Vec<u64> = cells.iter().map(|c| c.1.n).collect();
        let fitted: Vec<f64> = cells.iter().map(|c| fit.predict(c.0)).collect();
        let chi2 = significance_chi2(&ms, &ns, &fitted).ok();
        Ok((fit, chi2))
    };

    // Step 1: per cohort, log η against elapsed time.
    let time_rows = map_range(1..k + 1, |i| {
        let cells = (1..=l)
            .filter_map(|j| observed(i, j).map(|o| (elapsed(j), o)))
            .collect();
        (i, fit_observed(FitKind::LogLinear, cells))
    });
    let time_rows = resolve(Route::TimeRows, time_rows)?;

    // Step 2: per step, log η against log cohort.
    let cohort_columns = map_range(1..l + 1, |j| {
        let cells = (1..=k)
            .filter_map(|i| observed(i, j).map(|o| (i as f64, o)))
            .collect();
        (j, fit_observed(FitKind::LogLog, cells))
    });
    let cohort_columns = resolve(Route::CohortColumns, cohort_columns)?;

    let row_value = |i: usize, j: usize| time_rows[i - 1].fit.predict(elapsed(j));
    let column_value = |i: usize, j: usize| cohort_columns[j - 1].fit.predict(i as f64);

    // Step 3, row route: cohorts above K refitted over time on zone III values.
    let extrapolated_rows = map_range(k + 1..big_i + 1, |i| {
        let points: Vec<(f64, f64)> = (1..=l).map(|j| (elapsed(j), column_value(i, j))).collect();
        (i, fit_log_linear(&points, None).map(|f| (f, None)))
    });
    let extrapolated_rows = if big_i > k {
        resolve(Route::ExtrapolatedRows, extrapolated_rows)?
    } else {
        Vec::new()
    };

    // Step 3, column route: steps after L refitted over cohorts on zone II values.
    let extrapolated_columns = map_range(l + 1..big_j + 1, |j| {
        let points: Vec<(f64, f64)> = (1..=k).map(|i| (i as f64, row_value(i, j))).collect();
        (j, fit_log_log(&points, None).map(|f| (f, None)))
    });
    let extrapolated_columns = if big_j > l {
        resolve(Route::ExtrapolatedColumns, extrapolated_columns)?
    } else {
        Vec::new()
    };

    let mut row_candidate = Grid::filled(big_i, big_j, None);
    let mut column_candidate = Grid::filled(big_i, big_j, None);
    let mut lambda = Grid::filled(big_i, big_j, 0.0);
    let zone = Grid::from_fn(big_i, big_j, |i, j| params.zone_of(i, j));
    for i in 1..=big_i {
        for j in 1..=big_j {
            let (row, column) = match params.zone_of(i, j) {
                Zone::I => (Some(row_value(i, j)), Some(column_value(i, j))),
                Zone::II => (Some(row_value(i, j)), None),
                Zone::III => (None, Some(column_value(i, j))),
                Zone::IV => (
                    Some(extrapolated_rows[i - k - 1].fit.predict(elapsed(j))),
                    Some(extrapolated_columns[j - l - 1].fit.predict(i as f64)),
                ),
            };
            let value = match (row, column) {
                (Some(r), Some(c)) => match params.averaging {
                    AveragingRule::Average => 0.5 * (r + c),
                    AveragingRule::RowFirst => r,
                    AveragingRule::ColumnFirst => c,
                },
                (Some(v), None) | (None, Some(v)) => v,
                (None, None) => unreachable!("every zone has at least one route"),
            };
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositiveRate { i, j, value }.into());
            }
            lambda.set(i, j, value);
            row_candidate.set(i, j, row);
            column_candidate.set(i, j, column);
        }
    }

    let mut row_fits = time_rows;
    row_fits.extend(extrapolated_rows);
    let mut column_fits = cohort_columns;
    column_fits.extend(extrapolated_columns);
    Ok(CreativityModel {
        version: MODEL_VERSION.to_string(),
        params: params.clone(),
        lambda,
        zone,
        row_candidate,
        column_candidate,
        row_fits,
        column_fits,
    })
}

/// Turns per-index outcomes into records, borrowing coefficients for failed
/// indices from the nearest lower successful index (or, failing that, the
/// nearest higher one).
fn resolve(route: Route, outcomes: Vec<(usize, Outcome)>) -> Result<Vec<FitRecord>, TrainError> {
    let successes: Vec<(usize, &RegressionFit)> = outcomes
        .iter()
        .filter_map(|(k, o)| o.as_ref().ok().map(|(f, _)| (*k, f)))
        .collect();
    if successes.is_empty() {
        let failures = outcomes
            .into_iter()
            .filter_map(|(k, o)| o.err().map(|e| (k, e)))
            .collect();
        return Err(TrainError::Insufficient { route, failures });
    }
    Ok(outcomes
        .iter()
        .map(|(index, outcome)| match outcome {
            Ok((fit, chi2)) => FitRecord {
                route,
                index: *index,
                fit: fit.clone(),
                source: FitSource::Fitted,
                chi2: chi2.clone(),
            },
            Err(e) => {
                let (from, fit) = successes
                    .iter()
                    .rev()
                    .find(|(k, _)| k < index)
                    .or_else(|| successes.iter().find(|(k, _)| k > index))
                    .expect("at least one success");
                FitRecord {
                    route,
                    index: *index,
                    fit: (*fit).clone(),
                    source: FitSource::Fallback {
                        from: *from,
                        reason: e.to_string(),
                    },
                    chi2: None,
                }
            }
        })
        .collect())
}
