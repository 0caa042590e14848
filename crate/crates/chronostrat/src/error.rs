use std::fmt;

/// One dataset-invariant violation, with enough context to locate it.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveSigma { sample_id: String, index: usize, sigma: f64 },
    NonFiniteAge { sample_id: String, index: usize },
    EmptyStratum { stratum: String },
    EmptySample { sample_id: String },
    DuplicateSampleId { sample_id: String },
    NoStrata,
    BadWindow { t_start: f64, t_end: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveSigma { sample_id, index, sigma } => {
                write!(f, "nonpositive standard error {sigma} in sample {sample_id} (determination {index})")
            }
            Violation::NonFiniteAge { sample_id, index } => {
                write!(f, "non-finite age in sample {sample_id} (determination {index})")
            }
            Violation::EmptyStratum { stratum } => write!(f, "stratum {stratum} has no samples"),
            Violation::EmptySample { sample_id } => write!(f, "sample {sample_id} has no determinations"),
            Violation::DuplicateSampleId { sample_id } => write!(f, "duplicate sample id {sample_id}"),
            Violation::NoStrata => write!(f, "dataset has no strata"),
            Violation::BadWindow { t_start, t_end } => {
                write!(f, "window start {t_start} is not before window end {t_end}")
            }
        }
    }
}

/// Every violation found in one validation pass.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dataset validation failed:\n{0}")]
    Validation(ValidationReport),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("unknown sample id: {0}")]
    UnknownSample(String),
    #[error("unknown study id: {0} (valid: {1})")]
    UnknownStudy(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
