use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use pubcast::cohort::CohortError;
use pubcast::corpus::CorpusError;
use pubcast::creativity::{ModelError, TrainError};
use pubcast::evaluation::EvalError;
use pubcast::oracle::OracleError;
use pubcast::predictor::PredictError;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent input (exit 1).
    Input(String),
    /// Too little data for a fit or a test (exit 2).
    Insufficient(String),
    /// Anything else (exit 3).
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    pub fn in_file(path: &Path, e: impl Into<CliError>) -> Self {
        let name = path.display();
        match e.into() {
            CliError::Input(m) => CliError::Input(format!("{name}: {m}")),
            CliError::Insufficient(m) => CliError::Insufficient(format!("{name}: {m}")),
            CliError::Internal(m) => CliError::Internal(format!("{name}: {m}")),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Input(_) => 1,
            CliError::Insufficient(_) => 2,
            CliError::Internal(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Insufficient(m) => write!(f, "insufficient data: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CohortError> for CliError {
    fn from(e: CohortError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Json(_) | ModelError::InvalidParams(_) | ModelError::Shape { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Params(e) => e.into(),
            e => CliError::Insufficient(e.to_string()),
        }
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::Model(e) => e.into(),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(e) => e.into(),
            EvalError::YearOffGrid(_) | EvalError::InvalidCounts { .. } => CliError::Input(e.to_string()),
            e => CliError::Insufficient(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Invalid(_) | OracleError::Model(_) => CliError::Input(e.to_string()),
            OracleError::PopulationTooSmall(_) => CliError::Insufficient(e.to_string()),
            e => CliError::Internal(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
