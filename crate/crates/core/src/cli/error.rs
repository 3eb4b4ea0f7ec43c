use calibkit::decision::DecisionError;
use calibkit::fit::FitError;
use calibkit::io::IoError;
use calibkit::metrics::MetricError;
use calibkit::reliability::ReliabilityError;
use calibkit::synth::SynthError;
use calibkit::ValidationError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("--{flag}: {message}")]
    InvalidFlag { flag: &'static str, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] IoError),

    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error(transparent)]
    Fit(#[from] FitError),

    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error(transparent)]
    Reliability(#[from] ReliabilityError),

    #[error(transparent)]
    Decision(#[from] DecisionError),

    #[error(transparent)]
    Synth(#[from] SynthError),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn flag(flag: &'static str, message: impl Into<String>) -> Self {
        CliError::InvalidFlag {
            flag,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 2,
            _ => 1,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::InvalidFlag { .. } => "invalid_flag",
            CliError::Usage(_) => "usage",
            CliError::Io(IoError::Parse { .. }) => "parse_error",
            CliError::Io(IoError::MissingField(_)) => "missing_field",
            CliError::Io(IoError::Validation(_)) | CliError::Validation(_) => "validation_error",
            CliError::Io(_) => "io_error",
            CliError::Fit(FitError::EmptyCalibrationSubset) => "empty_calibration_subset",
            CliError::Fit(FitError::IncompatibleSelector(_)) => "incompatible_selector",
            CliError::Fit(_) => "fit_error",
            CliError::Metric(_) => "metric_error",
            CliError::Reliability(ReliabilityError::Io(_)) => "io_error",
            CliError::Reliability(_) => "reliability_error",
            CliError::Decision(DecisionError::ShapeMismatch(_)) => "shape_mismatch",
            CliError::Decision(_) => "decision_error",
            CliError::Synth(_) => "invalid_synth_spec",
            CliError::Internal(_) => "internal",
        }
    }
}

#[derive(Serialize)]
struct JsonError<'a> {
    code: &'a str,
    exit_code: i32,
    message: &'a str,
}

/// Writes the diagnostic (and, if requested, a final JSON line) to stderr.
pub fn report(code: &str, exit_code: i32, message: &str, json: bool) {
    eprintln!("error: {message}");
    if json {
        let line = serde_json::to_string(&serde_json::json!({
            "error": JsonError { code, exit_code, message }
        }))
        .expect("error JSON serialises");
        eprintln!("{line}");
    }
}
