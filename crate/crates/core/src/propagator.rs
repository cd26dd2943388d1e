//! Krylov time evolution `psi -> exp(-i H t) psi`.
//!
//! Each substep builds a Lanczos basis of at most `krylov_dim` vectors from
//! the current state, exponentiates the small tridiagonal matrix through its
//! eigendecomposition, and halves the step until the a posteriori error
//! estimate `||psi|| * beta_m * |[exp(-i T_m dt) e_1]_m|` falls below
//! `step_tolerance`. The basis is reused while searching for the step.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krylov::{lanczos, tridiagonal_eigen, Krylov};
use crate::operators::HermitianOperator;
use crate::state::{norm, StateVector};

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorConfig {
    pub krylov_dim: usize,
    pub step_tolerance: f64,
    pub max_substeps: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self { krylov_dim: 30, step_tolerance: 1e-10, max_substeps: 100_000 }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.krylov_dim < 2 {
            return Err(Error::InvalidParameter("krylov_dim must be at least 2".into()));
        }
        if !(self.step_tolerance > 0.0 && self.step_tolerance.is_finite()) {
            return Err(Error::InvalidParameter("step_tolerance must be positive".into()));
        }
        if self.max_substeps == 0 {
            return Err(Error::InvalidParameter("max_substeps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvolveStats {
    pub substeps: usize,
    pub matvecs: usize,
    /// sum of the per-step error estimates
    pub error_estimate: f64,
}

// halvings allowed per substep before giving up
const MAX_HALVINGS: u32 = 60;
// smallest Krylov space considered for early termination, and the factor
// below the step tolerance the estimate must reach there
const MIN_EARLY_DIM: usize = 4;
const EARLY_STOP_MARGIN: f64 = 0.1;

pub fn evolve(h: &HermitianOperator, psi: &StateVector, t: f64, cfg: &PropagatorConfig) -> Result<StateVector> {
    evolve_with_stats(h, psi, t, cfg).map(|(s, _)| s)
}

pub fn evolve_with_stats(
    h: &HermitianOperator,
    psi: &StateVector,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<(StateVector, EvolveStats)> {
    cfg.validate()?;
    h.check_tag(psi.tag())?;
    if !t.is_finite() {
        return Err(Error::Propagation { t, reason: "non-finite time".into() });
    }
    let mut stats = EvolveStats::default();
    if t == 0.0 {
        return Ok((psi.clone(), stats));
    }
    let breakdown = 1e-13 * h.norm_bound().max(1.0);
    let mut current = psi.amplitudes().to_vec();
    let mut elapsed = 0.0f64;
    let mut dt_hint = t;

    while elapsed != t {
        if stats.substeps >= cfg.max_substeps {
            return Err(Error::Propagation {
                t,
                reason: format!("exceeded {} substeps at t = {elapsed}", cfg.max_substeps),
            });
        }
        let beta0 = norm(&current);
        if beta0 == 0.0 {
            break;
        }
        let start: Vec<Complex64> = current.iter().map(|z| z / beta0).collect();
        let remaining = t - elapsed;
        let planned = if dt_hint.abs() < remaining.abs() { dt_hint } else { remaining };
        // stop growing the space once the planned step is already accurate
        let accurate = |kr: &Krylov| {
            let m = kr.len();
            if m < MIN_EARLY_DIM {
                return false;
            }
            let eig = tridiagonal_eigen(&kr.alpha, &kr.beta[..m - 1]);
            let last = (0..m).fold(Complex64::new(0.0, 0.0), |acc, k| {
                acc + Complex64::from_polar(eig.vectors[(0, k)] * eig.vectors[(m - 1, k)], -eig.values[k] * planned)
            });
            beta0 * kr.beta[m - 1] * last.norm() <= EARLY_STOP_MARGIN * cfg.step_tolerance
        };
        let kr = lanczos(h, &start, cfg.krylov_dim, &[], breakdown, accurate);
        stats.matvecs += kr.len();
        let eig = kr.tridiagonal_eigen();
        let m = kr.len();
        let residual = kr.residual_norm();

        // small-space coefficients of exp(-i T dt) e_1
        let coeffs = |dt: f64| -> Vec<Complex64> {
            let w: Vec<Complex64> =
                (0..m).map(|k| Complex64::from_polar(eig.vectors[(0, k)], -eig.values[k] * dt)).collect();
            (0..m).map(|r| (0..m).fold(Complex64::new(0.0, 0.0), |acc, k| acc + w[k] * eig.vectors[(r, k)])).collect()
        };

        let mut dt = planned;
        let mut c = coeffs(dt);
        let mut err = beta0 * residual * c[m - 1].norm();
        let mut halvings = 0;
        while err > cfg.step_tolerance {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::Propagation {
                    t,
                    reason: format!("Krylov step did not converge at t = {elapsed} (estimate {err:e})"),
                });
            }
            dt *= 0.5;
            c = coeffs(dt);
            err = beta0 * residual * c[m - 1].norm();
        }

        current = kr.combine(c.into_iter().map(|z| z * beta0));
        stats.substeps += 1;
        stats.error_estimate += err;
        if dt == remaining {
            elapsed = t;
        } else {
            elapsed += dt;
            // let the step grow back when the last one was comfortably accurate
            dt_hint = if halvings == 0 { dt * 2.0 } else { dt };
        }
    }
    Ok((StateVector::from_amplitudes(psi.tag(), current), stats))
}
