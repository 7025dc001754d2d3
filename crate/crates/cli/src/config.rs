use std::path::{Path, PathBuf};

use pubcast::creativity::{AveragingRule, FitMethod, ModelParams, Weighting};
use pubcast::oracle::{GeneratorSpec, HeavyTail, InitialHistory, Surface};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SET6: &str = include_str!("../configs/set6.toml");
pub const SET5: &str = include_str!("../configs/set5.toml");

/// Everything a pipeline run needs. Every section and field is optional in
/// the file; missing values fall back to the Set-6 setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub model: ModelSection,
    pub prediction: Prediction,
    pub evaluation: Evaluation,
    pub ingest: Ingest,
    pub synth: Synth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory receiving every artifact not given an explicit path.
    pub output: PathBuf,
    pub corpus: Option<PathBuf>,
    /// Ground-truth corpus for evaluation; the training corpus when unset.
    pub truth: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub max_cohort: usize,
    pub steps: usize,
    pub train_cohorts: usize,
    pub train_steps: usize,
    pub origin: i32,
    pub start: i32,
    pub averaging: AveragingRule,
    pub weighting: Weighting,
    pub smoothing: f64,
    pub method: FitMethod,
    pub min_cell_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prediction {
    /// `t_X`: histories are read through this year.
    pub start_year: i32,
    /// `t_Y`: last predicted year.
    pub end_year: i32,
    pub replicates: usize,
    pub seed: u64,
    /// Skip researchers whose history at `t_X` exceeds this.
    pub max_history: Option<u64>,
    /// File with one researcher id per line. Without it, every researcher
    /// publishing in `t_X` is predicted.
    pub researchers: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evaluation {
    pub trend: bool,
    pub ks: bool,
    pub auc: bool,
    /// Cohorts (history at `t_X`) reported in the trend series.
    pub trend_cohorts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ingest {
    pub from: i32,
    pub to: i32,
    /// dblp venue keys such as `journals/tkde`; empty keeps every venue.
    pub venues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Synth {
    pub population: usize,
    pub seed: u64,
    pub surface: Surface,
    /// Lotka on `1..=K` with exponent 2 when unset.
    pub initial: Option<InitialHistory>,
    pub heavy_tail: Option<HeavyTail>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            model: ModelSection::from(ModelParams::set6()),
            prediction: Prediction::default(),
            evaluation: Evaluation::default(),
            ingest: Ingest::default(),
            synth: Synth::default(),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            output: PathBuf::from("pubcast-out"),
            corpus: None,
            truth: None,
            model: None,
            predictions: None,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelParams::set6().into()
    }
}

impl From<ModelParams> for ModelSection {
    fn from(p: ModelParams) -> Self {
        Self {
            max_cohort: p.max_cohort,
            steps: p.steps,
            train_cohorts: p.train_cohorts,
            train_steps: p.train_steps,
            origin: p.origin,
            start: p.start,
            averaging: p.averaging,
            weighting: p.weighting,
            smoothing: p.smoothing,
            method: p.method,
            min_cell_count: p.min_cell_count,
        }
    }
}

impl Default for Prediction {
    fn default() -> Self {
        Self {
            start_year: 2000,
            end_year: 2018,
            replicates: 100,
            seed: 1,
            max_history: None,
            researchers: None,
        }
    }
}

impl Default for Evaluation {
    fn default() -> Self {
        Self {
            trend: true,
            ks: true,
            auc: true,
            trend_cohorts: vec![1, 2, 3, 4, 5],
        }
    }
}

impl Default for Ingest {
    fn default() -> Self {
        Self {
            from: 1951,
            to: 2018,
            venues: Vec::new(),
        }
    }
}

impl Default for Synth {
    fn default() -> Self {
        Self {
            population: 20_000,
            seed: 7,
            surface: Surface::PowerLaw {
                a: 0.1,
                nu: 0.5,
                beta: -0.05,
            },
            initial: None,
            heavy_tail: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Input(format!("{origin}: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        match name {
            "set6" => Self::parse(SET6, "preset set6"),
            "set5" => Self::parse(SET5, "preset set5"),
            other => Err(CliError::Input(format!("unknown preset `{other}` (expected set6 or set5)"))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params().validate().map_err(|e| CliError::Input(e.to_string()))?;
        let p = &self.prediction;
        if p.start_year >= p.end_year {
            return Err(CliError::Input(format!(
                "prediction window needs t_X < t_Y, got {} and {}",
                p.start_year, p.end_year
            )));
        }
        if self.ingest.from > self.ingest.to {
            return Err(CliError::Input(format!(
                "ingest range {}..{} is empty",
                self.ingest.from, self.ingest.to
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        let mut p = ModelParams::new(m.max_cohort, m.steps, m.train_cohorts, m.train_steps, m.origin, m.start);
        p.averaging = m.averaging;
        p.weighting = m.weighting;
        p.smoothing = m.smoothing;
        p.method = m.method;
        p.min_cell_count = m.min_cell_count;
        p
    }

    /// Steps `(X, Y)` of the prediction window on the model grid.
    pub fn window(&self, params: &ModelParams) -> Result<(usize, usize), CliError> {
        let p = &self.prediction;
        let last = params.start + params.steps as i32;
        if p.start_year < params.start || p.end_year > last {
            return Err(CliError::Input(format!(
                "prediction window {}..{} lies outside the model grid {}..{}",
                p.start_year, p.end_year, params.start, last
            )));
        }
        Ok(((p.start_year - params.start) as usize, (p.end_year - params.start) as usize))
    }

    pub fn generator(&self) -> GeneratorSpec {
        let s = &self.synth;
        let mut spec = GeneratorSpec::new(self.params(), s.surface.clone(), s.population, s.seed);
        if let Some(initial) = &s.initial {
            spec.initial = initial.clone();
        }
        spec.heavy_tail = s.heavy_tail;
        spec
    }

    fn artifact(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.paths.output.join(name))
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.artifact(&self.paths.corpus, "corpus.csv")
    }

    pub fn truth_path(&self) -> PathBuf {
        self.paths.truth.clone().unwrap_or_else(|| self.corpus_path())
    }

    pub fn model_path(&self) -> PathBuf {
        self.artifact(&self.paths.model, "model.json")
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.artifact(&self.paths.predictions, "trajectories.csv")
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.paths.output.join(name)
    }
}
