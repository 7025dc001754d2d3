//! Browser bindings: fit a creativity matrix to a synthetic corpus, simulate
//! one researcher's trajectory, and test a count sample against a Poisson law.
//!
//! Each export takes and returns JSON so the page needs no generated glue
//! beyond `wasm-bindgen` itself.

use pubcast::cohort::{count_matrices, productivity, CohortOptions};
use pubcast::creativity::{train, CreativityModel, ModelParams, Zone};
use pubcast::evaluation::ks_poisson;
use pubcast::oracle::{generate_corpus, GeneratorSpec, Surface};
use pubcast::predictor::predict;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const FIRST_YEAR: i32 = 2000;

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct SurfaceRequest {
    pub a: f64,
    pub nu: f64,
    pub beta: f64,
    pub max_cohort: usize,
    pub steps: usize,
    pub train_cohorts: usize,
    pub train_steps: usize,
    pub population: usize,
    pub seed: u64,
}

impl Default for SurfaceRequest {
    fn default() -> Self {
        Self {
            a: 0.1,
            nu: 0.5,
            beta: -0.05,
            max_cohort: 30,
            steps: 12,
            train_cohorts: 15,
            train_steps: 6,
            population: 20_000,
            seed: 1,
        }
    }
}

impl SurfaceRequest {
    fn params(&self) -> ModelParams {
        ModelParams::new(
            self.max_cohort,
            self.steps,
            self.train_cohorts,
            self.train_steps,
            FIRST_YEAR,
            FIRST_YEAR,
        )
    }

    fn surface(&self) -> Surface {
        Surface::PowerLaw {
            a: self.a,
            nu: self.nu,
            beta: self.beta,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FitResponse {
    pub researchers: usize,
    pub publications: u64,
    /// `lambda[i-1][j-1]`, estimated.
    pub lambda: Vec<Vec<f64>>,
    pub true_lambda: Vec<Vec<f64>>,
    pub zones: Vec<Vec<Zone>>,
    /// Slope of each time-row fit (`β_i`, one per cohort up to `K`).
    pub row_slopes: Vec<f64>,
    /// Slope of each cohort-column fit (`ν_j`, one per step up to `L`).
    pub column_slopes: Vec<f64>,
}

fn rows<T: Clone>(grid: &pubcast::matrix::Grid<T>) -> Vec<Vec<T>> {
    (1..=grid.rows()).map(|i| grid.row(i).to_vec()).collect()
}

pub fn fit_surface(request: &SurfaceRequest) -> Result<FitResponse, String> {
    let params = request.params();
    let spec = GeneratorSpec::new(params.clone(), request.surface(), request.population, request.seed);
    let (corpus, truth) = generate_corpus(&spec).map_err(|e| e.to_string())?;
    let grid = params.grid().map_err(|e| e.to_string())?;
    let counts = count_matrices(
        &corpus,
        &grid,
        params.train_cohorts,
        params.train_steps,
        CohortOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let model = train(&productivity(&counts), &counts, &params).map_err(|e| e.to_string())?;
    let slopes = |fits: &[pubcast::creativity::FitRecord], n: usize| fits[..n].iter().map(|f| f.fit.slope).collect();
    Ok(FitResponse {
        researchers: corpus.researcher_count(),
        publications: corpus.publication_total(),
        lambda: rows(&model.lambda),
        true_lambda: rows(&truth.lambda),
        zones: rows(&model.zone),
        row_slopes: slopes(&model.row_fits, params.train_cohorts),
        column_slopes: slopes(&model.column_fits, params.train_steps),
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct SimulationRequest {
    #[serde(flatten)]
    pub surface: SurfaceRequest,
    pub initial_history: u64,
    pub replicates: usize,
    pub sample_paths: usize,
}

impl Default for SimulationRequest {
    fn default() -> Self {
        Self {
            surface: SurfaceRequest::default(),
            initial_history: 3,
            replicates: 2000,
            sample_paths: 5,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Band {
    pub year: i32,
    pub mean: f64,
    pub p05: u64,
    pub median: u64,
    pub p95: u64,
}

#[derive(Debug, Serialize)]
pub struct SimulationResponse {
    pub bands: Vec<Band>,
    pub paths: Vec<Vec<u64>>,
}

fn quantile(sorted: &[u64], q: f64) -> u64 {
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

/// Trajectories of one researcher under the true surface of `request`.
pub fn simulate(request: &SimulationRequest) -> Result<SimulationResponse, String> {
    let s = &request.surface;
    let params = s.params();
    let surface = s.surface();
    let lambda = pubcast::matrix::Grid::from_fn(s.max_cohort, s.steps, |i, j| surface.rate(i, j));
    let model = CreativityModel::from_lambda(params, lambda).map_err(|e| e.to_string())?;
    let initial = [("demo".to_string(), request.initial_history as i64)];
    let run = predict(&model, &initial, 0, s.steps, request.replicates, s.seed).map_err(|e| e.to_string())?;
    let bands = (run.start_step..=run.end_step)
        .map(|l| {
            let mut values: Vec<u64> = run.values_at(0, l).collect();
            values.sort_unstable();
            Band {
                year: run.year_of(l),
                mean: run.mean_at(0, l),
                p05: quantile(&values, 0.05),
                median: quantile(&values, 0.5),
                p95: quantile(&values, 0.95),
            }
        })
        .collect();
    let paths = (0..request.sample_paths.min(run.replicates))
        .map(|k| run.path(0, k).to_vec())
        .collect();
    Ok(SimulationResponse { bands, paths })
}

#[derive(Debug, Serialize)]
pub struct PoissonTest {
    pub n: usize,
    pub rate: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
}

/// Parses counts separated by commas or whitespace.
pub fn parse_counts(text: &str) -> Result<Vec<u64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("`{t}` is not a non-negative integer")))
        .collect()
}

pub fn poisson_test(counts: &[u64], bootstrap: usize, seed: u64) -> Result<PoissonTest, String> {
    let result = ks_poisson(counts, bootstrap, seed).map_err(|e| e.to_string())?;
    Ok(PoissonTest {
        n: counts.len(),
        rate: counts.iter().sum::<u64>() as f64 / counts.len() as f64,
        statistic: result.statistic,
        p_value: result.p_value,
        rejected: result.rejects(0.05),
    })
}

fn respond<T: Serialize>(result: Result<T, String>) -> Result<String, JsValue> {
    result
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

fn request<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T, JsValue> {
    serde_json::from_str(json).map_err(|e| JsValue::from_str(&format!("bad request: {e}")))
}

#[wasm_bindgen(js_name = fitSurface)]
pub fn fit_surface_js(request_json: &str) -> Result<String, JsValue> {
    respond(fit_surface(&request(request_json)?))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(request_json: &str) -> Result<String, JsValue> {
    respond(simulate(&request(request_json)?))
}

#[wasm_bindgen(js_name = poissonTest)]
pub fn poisson_test_js(counts: &str, bootstrap: usize, seed: u32) -> Result<String, JsValue> {
    let counts = parse_counts(counts).map_err(|e| JsValue::from_str(&e))?;
    respond(poisson_test(&counts, bootstrap, u64::from(seed)))
}
