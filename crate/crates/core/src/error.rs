//! Error type shared by every stage of the solver.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel evaluated at separation {0:e}, below the singular cutoff")]
    SingularPoint(f64),

    #[error("series expansion requested for coincident points")]
    CoincidentPoints,

    #[error("expansion order {requested} exceeds the supported maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },

    #[error("|delta| = {delta} is outside the injectivity budget delta0 = {delta0}")]
    DeltaOutOfRange { delta: f64, delta0: f64 },

    #[error("singular quadrature failed: {0}")]
    SingularAssemblyFailure(String),

    #[error("evaluation point at distance {distance:.3e} from the boundary; minimum is {limit:.3e}")]
    TooCloseToBoundary { distance: f64, limit: f64 },

    #[error("no sigma_min dip inside [{lo}, {hi}]")]
    NoDipInBracket { lo: f64, hi: f64 },

    #[error("{count} sigma_min dips inside [{lo}, {hi}]; narrow the bracket")]
    MultipleDips { lo: f64, hi: f64, count: usize },

    #[error("contour point {lambda} has sigma_min {sigma:.3e} below the threshold {threshold:.3e}")]
    ContourThroughEigenvalue { lambda: String, sigma: f64, threshold: f64 },

    #[error("matrix factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("winding number {value} is not within 0.05 of an integer")]
    NonIntegerWinding { value: f64 },

    #[error("gauge alignment failed: {0}")]
    GaugeAlignmentFailure(String),

    #[error("integration path from the reference point leaves the domain at {point:?}")]
    PathLeavesDomain { point: [f64; 3] },

    #[error("no sign change found for zero {s} of j_{n}")]
    BracketFailure { n: usize, s: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
