use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("table has no data rows")]
    EmptyTable,

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("missing source columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("column `{0}` has zero standard deviation and cannot be scaled")]
    ConstantColumn(String),

    #[error("categorical column `{0}` has a single level")]
    SingleLevel(String),

    #[error("column `{column}`: {message}")]
    InvalidColumn { column: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("weight at row {row} must be finite and positive, got {value}")]
    InvalidWeight { row: usize, value: f64 },

    #[error("coefficient vector contains non-finite values")]
    NonFiniteCoefficients,

    #[error("design is rank deficient and some coefficients have flat priors; use a proper prior")]
    RankDeficient,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported {kind} version {found} (this build reads major version {supported})")]
    UnsupportedVersion {
        kind: &'static str,
        found: String,
        supported: u32,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
