//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate surface at ({theta1}, {theta2}): |x,1 ^ x,2| = {cross_norm:.3e}")]
    DegenerateSurface { theta1: f64, theta2: f64, cross_norm: f64 },

    #[error("umbilic point at ({theta1}, {theta2}): principal directions indeterminate (|k1-k2| = {gap:.3e})")]
    UmbilicPoint { theta1: f64, theta2: f64, gap: f64 },

    #[error("umbilic encountered while tracing at ({theta1}, {theta2})")]
    UmbilicEncountered { theta1: f64, theta2: f64 },

    #[error("parametrization is not a curvature-line net: {detail}")]
    NotCurvatureNet { detail: String },

    #[error("reparametrization does not preserve orientation: det(d eta/d theta) = {det:.3e} at ({theta1}, {theta2})")]
    OrientationError { theta1: f64, theta2: f64, det: f64 },

    #[error("curvature-line integration diverged near ({theta1}, {theta2}): {detail}")]
    IntegrationDiverged { theta1: f64, theta2: f64, detail: String },

    #[error("reparametrization folds over (non-bijective): {detail}")]
    NonBijective { detail: String },

    #[error("shifter singular across thickness: |kappa * Z| >= 1 (kappa = {kappa:.3e}, Z = {z:.3e})")]
    ThicknessSingularity { kappa: f64, z: f64 },

    #[error("parameter point ({theta1}, {theta2}) outside domain {detail}")]
    DomainError { theta1: f64, theta2: f64, detail: String },

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error("catalog entry `{0}` has no closed-form oracle")]
    NoOracle(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code classes used by the command-line driver:
    /// 2 for input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnknownEntry(_)
            | Error::NoOracle(_)
            | Error::Expr(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::DomainError { .. } => 2,
            _ => 3,
        }
    }
}
