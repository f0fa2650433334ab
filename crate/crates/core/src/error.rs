use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two and at least 8")]
    GridSize(usize),
    #[error("domain length must be positive and finite, got {0}")]
    GridLength(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("symbol is not finite at xi = {xi}")]
    NonFiniteSymbol { xi: f64 },
    #[error("Lebesgue index p = {0} outside the admissible range")]
    LebesgueIndex(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical blow-up after t = {last_valid_time}")]
    BlowUp {
        last_valid_time: f64,
        partial: Box<crate::evolution::Trajectory>,
    },
    #[error("need at least {needed} time samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("window of length {window} is not commensurate with the torus of length {length}")]
    Incommensurate { window: f64, length: f64 },
    #[error("field is not band-limited to |k| < {limit}")]
    NotBandLimited { limit: usize },
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
