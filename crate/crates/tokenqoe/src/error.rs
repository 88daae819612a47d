use std::fmt;
use std::path::Path;

use tokenqoe_core::analysis::AnalysisError;
use tokenqoe_core::assign::AssignError;
use tokenqoe_core::model::ValidationError;
use tokenqoe_core::pca::PcaError;
use tokenqoe_core::pipeline::PipelineError;
use tokenqoe_core::predictor::PredictorError;

/// A domain failure with a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Error {
    pub code: &'static str,
    pub detail: String,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn new(code: &'static str, detail: impl Into<String>) -> Self {
        Self { code, detail: detail.into() }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        let code = if err.kind() == std::io::ErrorKind::NotFound { "file-not-found" } else { "io-error" };
        Self::new(code, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

impl std::error::Error for Error {}

/// The core error types render as `code: detail`; keep only the detail.
fn detail_of(display: String, code: &str) -> String {
    display.strip_prefix(code).and_then(|s| s.strip_prefix(": ")).map(str::to_owned).unwrap_or(display)
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for Error {
            fn from(e: $t) -> Self {
                let code = e.code();
                Self::new(code, detail_of(e.to_string(), code))
            }
        }
    )*};
}

from_core!(ValidationError, PipelineError, PredictorError, AnalysisError, AssignError);

impl From<PcaError> for Error {
    fn from(e: PcaError) -> Self {
        let code = match e {
            PcaError::TooFewSamples(_) => "too-few-samples",
            _ => "degenerate-input",
        };
        Self::new(code, e.to_string())
    }
}
