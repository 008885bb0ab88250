//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape or argument validation failed before any numerics ran.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A matrix that must be Hurwitz has an eigenvalue with real part
    /// above the stability tolerance.
    #[error("matrix is not Hurwitz: spectral abscissa {abscissa:.6e} (tolerance {tol:.6e})")]
    NotHurwitz { abscissa: f64, tol: f64 },

    /// An eigenvalue/Schur/SVD iteration failed to converge.
    #[error("{algorithm} did not converge after {iterations} iterations")]
    NoConvergence {
        algorithm: &'static str,
        iterations: usize,
    },

    /// Spectra of the Sylvester operands overlap, the solve is singular.
    #[error("singular Sylvester operator: eigenvalue sum {value:.6e} below tolerance {tol:.6e}")]
    SingularOperator { value: f64, tol: f64 },

    /// A matrix required to be (semi-)definite is indefinite.
    #[error("matrix is indefinite: most negative eigenvalue {min_eig:.6e} (tolerance {tol:.6e})")]
    Indefinite { min_eig: f64, tol: f64 },

    /// A Gramian or factor does not have the rank the operation needs.
    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    /// A fixed-point iteration started to diverge.
    #[error("fixed-point iteration diverging after {iterations} iterations (last change {last_change:.6e})")]
    Diverged {
        iterations: usize,
        last_change: f64,
    },

    /// A simulation produced a non-finite value.
    #[error("simulation blew up: first non-finite value at t = {time:.6}")]
    SimulationBlowUp { time: f64 },

    /// File parsing / schema errors.
    #[error("malformed file {path}: {reason}")]
    Malformed { path: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Process exit code used by the CLI: 2 validation, 3 numerical, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) | Error::Malformed { .. } => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
