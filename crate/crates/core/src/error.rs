use thiserror::Error;

use crate::basis::BasisTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("basis dimension {dim} exceeds the cap of {cap} states")]
    DimensionCap { dim: u128, cap: usize },

    #[error("state lookup failed: {0}")]
    Lookup(String),

    #[error("operands act on different bases ({left} vs {right})")]
    BasisMismatch { left: BasisTag, right: BasisTag },

    #[error("operator is not Hermitian: max |A - A^H| = {0:e}")]
    NotHermitian(f64),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("requested {requested} eigenvalues but the dimension is {dim}")]
    TooManyEigenvalues { requested: usize, dim: usize },

    #[error("dense eigensolver limited to dimension {limit}, got {dim}")]
    DenseLimit { dim: usize, limit: usize },

    #[error("propagation failed at t = {t}: {reason}")]
    Propagation { t: f64, reason: String },

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("too few distinct levels for spacing statistics ({0}, need at least 4)")]
    TooFewLevels(usize),

    #[error("unknown scenario kind '{0}'")]
    UnknownScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field B = {b} lies within {guard:e} of the resonance pole B0 = {b0}")]
    FeshbachPole { b: f64, b0: f64, guard: f64 },
}
