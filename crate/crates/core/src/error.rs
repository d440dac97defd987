use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("degenerate vector: {0}")]
    DegenerateVector(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stratification failed: {0}")]
    Stratification(String),

    /// The query matched neither trend nor seasonality template strongly enough.
    #[error(
        "recommendation inapplicable: trend divergence {ds_trend:.4} and season divergence \
         {ds_season:.4} are both below the threshold {threshold}"
    )]
    Inapplicable {
        ds_trend: f64,
        ds_season: f64,
        threshold: f64,
    },

    #[error("malformed CSV at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("data asset error: {0}")]
    Asset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
