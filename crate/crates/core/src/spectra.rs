//! Ground states, low-lying spectra, full dense spectra and level-spacing
//! statistics.
//!
//! The iterative path is a restarted Lanczos solver that locks converged
//! eigenvectors and searches the orthogonal complement for the next one, so
//! degenerate levels are returned with their multiplicity. The dense path
//! is a full Hermitian eigendecomposition, used for small bases.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::krylov::lanczos;
use crate::operators::HermitianOperator;
use crate::state::{dot, norm, scale, sub_scaled, StateVector};

/// Levels closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigMethod {
    /// dense below [`EigConfig::auto_dense_below`], Lanczos above
    Auto,
    Lanczos,
    Dense,
}

#[derive(Clone, Debug)]
pub struct EigConfig {
    /// bound on `||H v - lambda v||` for every returned pair
    pub tol: f64,
    pub method: EigMethod,
    /// Krylov subspace size per restart cycle
    pub max_krylov: usize,
    pub max_restarts: usize,
    /// largest dimension accepted by the dense path
    pub dense_limit: usize,
    pub auto_dense_below: usize,
    /// seeds the Lanczos start vectors
    pub seed: u64,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            method: EigMethod::Auto,
            max_krylov: 120,
            max_restarts: 60,
            dense_limit: 2000,
            auto_dense_below: 200,
            seed: 0x5eed_cafe,
        }
    }
}

/// Eigenvalues in ascending order with optional eigenvectors and the
/// residual of each pair.
#[derive(Clone, Debug)]
pub struct SpectrumSlice {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
    pub residuals: Vec<f64>,
}

impl SpectrumSlice {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `lambda_1 - lambda_0`.
    pub fn gap(&self) -> Option<f64> {
        (self.eigenvalues.len() >= 2).then(|| self.eigenvalues[1] - self.eigenvalues[0])
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// `index,eigenvalue,residual`
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,eigenvalue,residual")?;
        for (i, (e, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            writeln!(w, "{i},{e:.16e},{r:.6e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    pub residual: f64,
    /// `lambda_1`, when the basis has more than one state
    pub first_excited: Option<f64>,
    /// `lambda_1 - lambda_0 < DEGENERACY_TOL`; `state` is then some vector
    /// of the ground space
    pub degenerate: bool,
}

impl GroundState {
    pub fn gap(&self) -> Option<f64> {
        self.first_excited.map(|e1| e1 - self.energy)
    }
}

pub fn ground_state(h: &HermitianOperator, cfg: &EigConfig) -> Result<GroundState> {
    let k = h.dim().min(2);
    let slice = low_spectrum(h, k, cfg)?;
    let first_excited = slice.eigenvalues.get(1).copied();
    Ok(GroundState {
        energy: slice.eigenvalues[0],
        state: slice.eigenvectors[0].clone(),
        residual: slice.residuals[0],
        first_excited,
        degenerate: first_excited.is_some_and(|e1| e1 - slice.eigenvalues[0] < DEGENERACY_TOL),
    })
}

/// The `k` lowest eigenpairs.
pub fn low_spectrum(h: &HermitianOperator, k: usize, cfg: &EigConfig) -> Result<SpectrumSlice> {
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::TooManyEigenvalues { requested: k, dim });
    }
    let dense = match cfg.method {
        EigMethod::Dense => true,
        EigMethod::Lanczos => false,
        EigMethod::Auto => dim < cfg.auto_dense_below,
    };
    if dense {
        let mut full = dense_spectrum(h, cfg.dense_limit)?;
        full.eigenvalues.truncate(k);
        full.eigenvectors.truncate(k);
        full.residuals.truncate(k);
        if full.max_residual() > cfg.tol {
            return Err(Error::NoConvergence { iterations: 0, residual: full.max_residual() });
        }
        Ok(full)
    } else {
        lanczos_lowest(h, k, cfg)
    }
}

/// Iterative solver: one restarted Lanczos search per eigenpair, each in
/// the orthogonal complement of the pairs already locked.
pub fn lanczos_lowest(h: &HermitianOperator, k: usize, cfg: &EigConfig) -> Result<SpectrumSlice> {
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::TooManyEigenvalues { requested: k, dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let breakdown = 1e-13 * h.norm_bound().max(1.0);
    let mut locked: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    let mut pairs: Vec<(f64, Vec<Complex64>, f64)> = Vec::with_capacity(k);

    for _ in 0..k {
        let m_max = cfg.max_krylov.min(dim - locked.len()).max(1);
        let mut start: Vec<Complex64> = (0..dim).map(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
        project_out(&mut start, &locked);
        let n = norm(&start);
        scale(&mut start, 1.0 / n);

        let mut found = None;
        let mut last_residual = f64::INFINITY;
        let mut iterations = 0;
        for _ in 0..cfg.max_restarts {
            let target = 0.1 * cfg.tol;
            let kr = lanczos(h, &start, m_max, &locked, breakdown, |kr| {
                kr.len() % 8 == 0 && {
                    let eig = kr.tridiagonal_eigen();
                    let last = eig.vectors[(kr.len() - 1, 0)];
                    (kr.residual_norm() * last).abs() < target
                }
            });
            iterations += kr.len();
            let eig = kr.tridiagonal_eigen();
            let mut v = kr.combine(eig.vectors.column(0).iter().map(|&c| Complex64::new(c, 0.0)));
            project_out(&mut v, &locked);
            let n = norm(&v);
            scale(&mut v, 1.0 / n);
            let (theta, res) = rayleigh_residual(h, &v);
            last_residual = res;
            if res <= cfg.tol {
                found = Some((theta, v, res));
                break;
            }
            start = v;
        }
        let (theta, v, res) = found.ok_or(Error::NoConvergence { iterations, residual: last_residual })?;
        locked.push(v.clone());
        pairs.push((theta, v, res));
    }

    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tag = h.tag();
    Ok(SpectrumSlice {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        residuals: pairs.iter().map(|p| p.2).collect(),
        eigenvectors: pairs
            .into_iter()
            .map(|(_, mut v, _)| {
                fix_phase(&mut v);
                StateVector::from_amplitudes(tag, v)
            })
            .collect(),
    })
}

/// Full eigendecomposition. A real symmetric matrix takes the real path.
pub fn dense_spectrum(h: &HermitianOperator, limit: usize) -> Result<SpectrumSlice> {
    let dim = h.dim();
    if dim > limit {
        return Err(Error::DenseLimit { dim, limit });
    }
    let (values, columns): (Vec<f64>, Vec<Vec<Complex64>>) = if h.is_real() {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for (j, v) in h.row(i) {
                m[(i, j)] = v.re;
            }
        }
        let eig = SymmetricEigen::new(m);
        let cols =
            (0..dim).map(|c| eig.eigenvectors.column(c).iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
        (eig.eigenvalues.iter().copied().collect(), cols)
    } else {
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..dim {
            for (j, v) in h.row(i) {
                m[(i, j)] = v;
            }
        }
        let eig = SymmetricEigen::new(m);
        let cols = (0..dim).map(|c| eig.eigenvectors.column(c).iter().copied().collect()).collect();
        (eig.eigenvalues.iter().copied().collect(), cols)
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let tag = h.tag();
    let mut slice = SpectrumSlice { eigenvalues: Vec::new(), eigenvectors: Vec::new(), residuals: Vec::new() };
    for i in order {
        let mut v = columns[i].clone();
        fix_phase(&mut v);
        let mut hv = vec![Complex64::new(0.0, 0.0); dim];
        h.matvec(&v, &mut hv);
        sub_scaled(&mut hv, Complex64::new(values[i], 0.0), &v);
        slice.eigenvalues.push(values[i]);
        slice.residuals.push(norm(&hv));
        slice.eigenvectors.push(StateVector::from_amplitudes(tag, v));
    }
    Ok(slice)
}

/// Eigenvalues only, dense path.
pub fn dense_eigenvalues(h: &HermitianOperator, limit: usize) -> Result<Vec<f64>> {
    Ok(dense_spectrum(h, limit)?.eigenvalues)
}

fn project_out(v: &mut [Complex64], locked: &[Vec<Complex64>]) {
    for _ in 0..2 {
        for q in locked {
            let c = dot(q, v);
            sub_scaled(v, c, q);
        }
    }
}

fn rayleigh_residual(h: &HermitianOperator, v: &[Complex64]) -> (f64, f64) {
    let mut hv = vec![Complex64::new(0.0, 0.0); v.len()];
    h.matvec(v, &mut hv);
    let theta = dot(v, &hv).re;
    sub_scaled(&mut hv, Complex64::new(theta, 0.0), v);
    (theta, norm(&hv))
}

/// Rotates the global phase so the largest component is real and positive.
fn fix_phase(v: &mut [Complex64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(pivot) = v.iter().find(|z| z.norm() >= max * (1.0 - 1e-9)) {
        let phase = pivot.conj() / pivot.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Mean consecutive-spacing ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpacingRatio {
    pub mean: f64,
    /// ratios entering the mean
    pub samples: usize,
    /// spacings below the degeneracy threshold, excluded
    pub degenerate_spacings: usize,
}

/// Spacings at or below this are degenerate.
pub const SPACING_DEGENERACY_TOL: f64 = 1e-12;

/// `r_n = min(s_n, s_{n+1}) / max(s_n, s_{n+1})` averaged over `n`, with
/// `s_n = lambda_{n+1} - lambda_n`. Ratios touching a degenerate spacing
/// are skipped.
pub fn spacing_ratio(levels: &[f64]) -> Result<SpacingRatio> {
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("levels must be sorted ascending".into()));
    }
    let spacings: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let degenerate = spacings.iter().filter(|&&s| s <= SPACING_DEGENERACY_TOL).count();
    let distinct = if levels.is_empty() { 0 } else { 1 + spacings.len() - degenerate };
    if distinct < 4 {
        return Err(Error::TooFewLevels(distinct));
    }
    let (sum, count) = spacings
        .windows(2)
        .filter(|w| w[0] > SPACING_DEGENERACY_TOL && w[1] > SPACING_DEGENERACY_TOL)
        .fold((0.0, 0usize), |(s, c), w| (s + w[0].min(w[1]) / w[0].max(w[1]), c + 1));
    if count == 0 {
        return Err(Error::TooFewLevels(distinct));
    }
    Ok(SpacingRatio { mean: sum / count as f64, samples: count, degenerate_spacings: degenerate })
}
