use num_complex::Complex64;

use crate::basis::{BasisTag, FockBasis, FockState};
use crate::error::{Error, Result};

/// Complex amplitude vector over a Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    tag: BasisTag,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(tag: BasisTag, amps: Vec<Complex64>) -> Self {
        Self { tag, amps }
    }

    pub fn zeros(tag: BasisTag, dim: usize) -> Self {
        Self { tag, amps: vec![Complex64::new(0.0, 0.0); dim] }
    }

    /// Basis vector for a single occupation configuration.
    pub fn fock(basis: &FockBasis, state: &FockState) -> Result<Self> {
        let idx = basis.index_of(state)?;
        let mut v = Self::zeros(basis.tag(), basis.dim());
        v.amps[idx] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    /// Unit-filling Mott state `(1, ..., 1)`.
    pub fn mott(basis: &FockBasis) -> Result<Self> {
        Self::fock(basis, &FockState::mott(basis.n_sites()))
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero or non-finite state".into()));
        }
        scale(&mut self.amps, 1.0 / n);
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_tag(other.tag)?;
        Ok(dot(&self.amps, &other.amps))
    }

    pub(crate) fn check_tag(&self, other: BasisTag) -> Result<()> {
        if self.tag != other {
            return Err(Error::BasisMismatch { left: self.tag, right: other });
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &StateVector, b: Complex64) -> Result<StateVector> {
        self.check_tag(other.tag)?;
        let amps = self.amps.iter().zip(&other.amps).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { tag: self.tag, amps })
    }
}

/// Conjugate-linear in the first argument.
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

pub(crate) fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn scale(a: &mut [Complex64], s: f64) {
    a.iter_mut().for_each(|z| *z *= s);
}

/// `y -= c * x`
pub(crate) fn sub_scaled(y: &mut [Complex64], c: Complex64, x: &[Complex64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi -= c * xi);
}
