use thiserror::Error;

use crate::series::YearMonth;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in a scenario panel a sampling failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSite {
    pub omega: usize,
    pub step: usize,
    pub subsystem: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("month {month} has zero standard deviation")]
    DegenerateMonth { month: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular system for month {month}: {detail}")]
    SingularSystem { month: usize, detail: String },

    #[error("correlation matrix for month {month} is not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { month: usize, jitter: f64 },

    #[error("nonnegative shift lambda = {lambda} (conditional mean is not positive){}", site_suffix(.site))]
    PositivityViolation { lambda: f64, site: Option<SampleSite> },

    #[error("forecaster {id} produced a non-positive or non-finite value {value}")]
    InvalidForecast { id: String, value: f64 },

    #[error("gap in monthly series: missing {missing} (row {row})")]
    Gap { missing: YearMonth, row: usize },

    #[error("validation error at row {row}: {message}")]
    Validation { row: usize, message: String },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn site_suffix(site: &Option<SampleSite>) -> String {
    match site {
        Some(s) => format!(" at scenario {}, step {}, subsystem {}", s.omega, s.step, s.subsystem),
        None => String::new(),
    }
}

impl Error {
    /// Errors caused by bad input (data files, configuration, arguments) as
    /// opposed to failures during estimation or simulation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::Gap { .. }
                | Error::Validation { .. }
                | Error::Parse { .. }
                | Error::Config(_)
        )
    }

    pub(crate) fn with_site(self, site: SampleSite) -> Self {
        match self {
            Error::PositivityViolation { lambda, .. } => Error::PositivityViolation {
                lambda,
                site: Some(site),
            },
            other => other,
        }
    }
}
