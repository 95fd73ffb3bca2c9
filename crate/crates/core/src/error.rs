use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("basis is not orthonormal (deviation {0:.3e})")]
    NonOrthonormalBasis(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integrator step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("quadrature did not converge (estimated error {0:.3e})")]
    Quadrature(f64),

    #[error("insufficient Fourier cutoff: |c^±{n_max}| = {magnitude:.3e}")]
    Aliasing { n_max: i32, magnitude: f64 },

    #[error("ambiguous Floquet label matching at grid index {0}")]
    AmbiguousLabels(usize),

    #[error("hierarchy too large: {count} auxiliary operators (limit {limit})")]
    HierarchyTooLarge { count: usize, limit: usize },

    #[error("relaxation fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
