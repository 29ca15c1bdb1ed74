use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("channel is not square: dim_in = {dim_in}, dim_out = {dim_out}")]
    NonSquareChannel { dim_in: usize, dim_out: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("bad dimension: expected {expected}, found {found}")]
    BadDimension { expected: usize, found: usize },

    #[error("map is singular: smallest/largest singular value ratio {ratio:e}")]
    SingularMap { ratio: f64 },

    #[error("not a Choi state: {0}")]
    NotAChoiState(String),

    #[error("not a qubit channel (dim = {dim})")]
    NotAQubitChannel { dim: usize },

    #[error("parameter `{name}` = {value} is out of range ({range})")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("channel is not CPT: tp residual {tp_residual:e}, min Choi eigenvalue {min_choi_eig:e}")]
    NotCpt { tp_residual: f64, min_choi_eig: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("rate pole at t = {t}")]
    PoleEncountered { t: f64 },

    #[error("generator extraction is singular at t = {t}")]
    ExtractionSingular { t: f64 },

    #[error("step size collapsed at t = {t} (h = {h:e})")]
    StiffnessFailure { t: f64, h: f64 },

    #[error("no solution: constraint residual {residual:e}")]
    NoSolution { residual: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("conditional state norm collapsed at t = {t}")]
    NormCollapse { t: f64 },

    #[error("invalid jump scheme: {0}")]
    InvalidScheme(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
