use thiserror::Error;

use crate::geometry::BoundingBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("inverted box corners ({x1}, {y1}, {x2}, {y2})")]
    InvertedCorners { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("non-finite box coordinate ({x1}, {y1}, {x2}, {y2})")]
    NonFinite { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("ground-truth box {0:?} has zero area")]
    DegenerateGroundTruth(BoundingBox),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuppressionError {
    #[error("fusion rule {rule} requires `{field}` on the detection")]
    MissingPrediction { rule: &'static str, field: &'static str },
    #[error("gaussian soft-nms needs sigma > 0, received {0}")]
    NonPositiveSigma(f64),
    #[error("nms threshold must lie in (0, 1], received {0}")]
    BadThreshold(f64),
    #[error("unknown suppressor `{0}`")]
    UnknownSuppressor(String),
    #[error("unknown fusion rule `{0}`")]
    UnknownFusionRule(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error("object size range [{min}, {max}] does not fit a {canvas} canvas")]
    InfeasibleSize { min: f64, max: f64, canvas: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("feature length {actual} does not match model input {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty training batch")]
    EmptyBatch,
    #[error("no positive samples to train on")]
    NoPositives,
    #[error("parameter shapes differ")]
    ShapeMismatch,
    #[error("parameters became non-finite in epoch {0}")]
    Diverged(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("pearson correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("average precision undefined: no ground truth")]
    NoGroundTruth,
    #[error("report is empty")]
    EmptyReport,
    #[error("report row `{row}` is missing `{cell}`")]
    MissingCell { row: String, cell: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Suppression(#[from] SuppressionError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("config: {0}")]
    Config(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Config problems are reported separately from runtime failures by the CLI.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::World(WorldError::InvalidConfig(_)) | Error::World(WorldError::InfeasibleSize { .. })
        ) || matches!(
            self,
            Error::Suppression(
                SuppressionError::UnknownSuppressor(_)
                    | SuppressionError::UnknownFusionRule(_)
                    | SuppressionError::NonPositiveSigma(_)
                    | SuppressionError::BadThreshold(_)
            )
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
