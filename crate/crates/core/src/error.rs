use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("season {region} {year_label} is missing epidemiological week {week}")]
    Gap {
        region: String,
        year_label: String,
        week: u32,
    },

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("cannot split {available} seasons: need at least {required}")]
    Sizing { required: usize, available: usize },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {required} samples, got {got}")]
    SampleSize { required: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {msg}")]
    Divergence { epoch: usize, msg: String },

    #[error("region {0} is not present in the data")]
    MissingRegion(String),

    #[error("week alignment mismatch: {0}")]
    Alignment(String),

    #[error("invalid model checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
