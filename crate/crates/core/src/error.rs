use faer::c64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("no trapped ray: scene has {0} obstacle(s), need at least 2")]
    NoTrappedRay(usize),

    #[error("under-resolved grid: {0}")]
    UnderResolved(String),

    #[error("degenerate domain: no interior grid nodes")]
    DegenerateDomain,

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("tau = {tau} is within {distance:e} of the eigenvalue {nearest}")]
    PoleProximity { tau: c64, nearest: c64, distance: f64 },

    #[error("time step {dt} does not resolve the fastest mode (need dt <= {limit})")]
    Resolution { dt: f64, limit: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("corrupt basis cache: {0}")]
    Cache(String),
}
