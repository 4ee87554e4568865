use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model one needs equal damping rates to decouple (gamma1 = {gamma1}, gamma2 = {gamma2})")]
    AsymmetryUnsupported { gamma1: f64, gamma2: f64 },

    #[error("basis mismatch: covariance in {covariance:?}, drift in {drift:?}")]
    BasisMismatch {
        covariance: crate::model::Basis,
        drift: crate::model::Basis,
    },

    #[error("diverged at t = {t}: |entry| = {value:e} exceeds cap {cap:e}")]
    Diverged { t: f64, value: f64, cap: f64 },

    #[error("not converged by t_max = {t_max} (scaled residual {residual:e})")]
    NotConverged { t_max: f64, residual: f64 },

    #[error("newton iteration failed: {0}")]
    NoConvergence(String),

    #[error("drift matrix is not Hurwitz (largest real eigenvalue {0})")]
    NotHurwitz(f64),

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("time step too large: dt * spectral radius = {0} > 0.1")]
    StepTooLarge(f64),

    #[error("mechanical frequency {omega_m} too low: need at least {required}")]
    FrequencyTooLow { omega_m: f64, required: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::AsymmetryUnsupported { .. }
            | Error::BasisMismatch { .. }
            | Error::Config(_)
            | Error::Io(_)
            | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
