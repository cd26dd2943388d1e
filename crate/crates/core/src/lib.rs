//! Exact-diagonalization toolkit for Loschmidt echoes in the 1-D
//! Bose-Hubbard chain.
//!
//! Units: `hbar = 1`, energies in `U`, times in `hbar / U`, lattice spacing 1.
//! The interaction term is `U sum_j n_j (n_j - 1)` without a factor 1/2.

pub mod analysis;
pub mod basis;
pub mod echo;
pub mod error;
mod krylov;
pub mod operators;
pub mod propagator;
pub mod spectra;
pub mod state;

pub use analysis::{
    critical_scan, fit_decay, loglog_slope, perturbative_prediction, variance, variance_oracle, CriticalScan, DecayFit,
    DecayModel, FeshbachParams, PointStatus, Prediction, PredictionKind, ScanConfig, WindowPolicy,
    THERMODYNAMIC_CRITICAL_J,
};
pub use basis::{BasisTag, FockBasis, FockState, LatticeSpec};
pub use echo::{
    auto_time_grid, echo_curve, sequence_echo, two_leg_fidelity, AutoGrid, EchoCurve, ImprintMode, PhysicalUnits,
    Scenario, ScenarioKind, SequenceSpec,
};
pub use error::{Error, Result};
pub use operators::{BhmOperators, BhmParams, DiagonalOperator, DiagonalUnitary, HermitianOperator};
pub use propagator::{evolve, PropagatorConfig};
pub use spectra::{ground_state, low_spectrum, spacing_ratio, EigConfig, EigMethod, SpectrumSlice};
pub use state::StateVector;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
