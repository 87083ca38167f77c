use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("weather gap of {days} consecutive days starting {start} exceeds the 7-day limit")]
    WeatherGap { start: NaiveDate, days: i64 },

    #[error("series of length {len} is too short: period {period} needs at least 2*period = {needed} observations")]
    SeriesTooShort {
        len: usize,
        period: usize,
        needed: usize,
    },

    #[error("rank-deficient design: columns {columns:?} are linearly dependent on earlier columns")]
    RankDeficient { columns: Vec<usize> },

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("unstable or non-invertible polynomial: {0}")]
    Unstable(String),

    #[error("optimizer failed to converge for {spec} after {restarts} restarts (best loglik {best_loglik:.4})")]
    NonConvergence {
        spec: String,
        restarts: usize,
        best_loglik: f64,
        best_params: Vec<f64>,
        evaluations: usize,
    },

    #[error("all {} grid-search fits failed", .0.len())]
    AllFitsFailed(Vec<(String, String)>),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
