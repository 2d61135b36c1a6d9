use thiserror::Error;

/// Errors produced by the model, sweep, fitting and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative applied field: {0} Oe")]
    NegativeField(f64),

    #[error("negative frequency: {0}")]
    NegativeFrequency(f64),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("singular response matrix (condition estimate {condition:e})")]
    SingularResponse { condition: f64 },

    #[error("eigenvalue iteration did not converge for matrix {matrix}")]
    EigenFailure { matrix: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("at H = {field} Oe, omega = {freq:?}: {source}")]
    AtGridPoint {
        field: f64,
        freq: Option<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("window [{lo}, {hi}] Oe holds {points} field points, need at least 3")]
    WindowTooNarrow { lo: f64, hi: f64, points: usize },

    #[error("branch separation is monotone across [{lo}, {hi}] Oe; window misses the crossing")]
    NoMinimum { lo: f64, hi: f64 },

    #[error("coupling model evaluates to {value} < 0 at t = {t} um")]
    NegativeCoupling { t: f64, value: f64 },

    #[error("spectrum map is empty")]
    EmptyMap,

    #[error("degenerate fit problem: {0}")]
    DegenerateProblem(String),

    #[error("degenerate regression data: {0}")]
    DegenerateData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn at(self, field: f64, freq: Option<f64>) -> Self {
        Error::AtGridPoint {
            field,
            freq,
            source: Box::new(self),
        }
    }
}
