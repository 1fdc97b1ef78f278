//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("value rank mismatch: {0}")]
    RankMismatch(String),

    #[error("quasimomentum {xi:?} outside the reduced zone [-pi, pi]^3")]
    OutsideReducedZone { xi: [f64; 3] },

    #[error("material tensor violates Hermitian symmetry: max deviation {deviation:.3e} at grid point {index}")]
    NotHermitian { deviation: f64, index: usize },

    #[error("material tensor violates ellipticity: min eigenvalue {min_eig:.6e} < alpha = {alpha:.6e}")]
    EllipticityViolation { min_eig: f64, alpha: f64 },

    #[error("iterative solver did not converge: residual {residual:.3e} after {iterations} iterations (target {target:.3e})")]
    SolverDidNotConverge {
        residual: f64,
        iterations: usize,
        target: f64,
    },

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("grid misaligned: {0}")]
    GridMisaligned(String),

    #[error("frequency {freq:?} is not on the macroscopic lattice (tolerance {tol:.1e})")]
    OffLattice { freq: [f64; 3], tol: f64 },

    #[error("divergence constraint violated: {label} has relative divergence {value:.3e} > {tol:.1e}")]
    DivergenceViolation {
        label: String,
        value: f64,
        tol: f64,
    },

    #[error("transport coefficients inconsistent: ||b_lq - conj(b_ql)|| = {deviation:.3e} exceeds {tol:.1e}")]
    TransportInconsistent { deviation: f64, tol: f64 },

    #[error("forcing with slow-time dependence is not supported: {0}")]
    UnsupportedTimeDependence(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code category: 1 usage/config, 2 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
