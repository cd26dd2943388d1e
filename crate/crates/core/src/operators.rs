//! Sparse operators of the Bose-Hubbard chain.
//!
//! The Hamiltonian is `H = -J T + U D_int + F D_tilt` with
//!
//! * `T = sum_<i,j> a_i^dag a_j` over both directions of every bond,
//! * `D_int = sum_j n_j (n_j - 1)` (no factor 1/2),
//! * `D_tilt = sum_j j n_j` with 0-based site index `j`.
//!
//! `T`, `D_int` and `D_tilt` are built once per basis ([`BhmOperators`]) and
//! combined with coefficients on demand.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{BasisTag, FockBasis};
use crate::error::{Error, Result};
use crate::state::StateVector;

/// Row count above which matrix-vector products are split across threads.
const PAR_ROWS: usize = 1 << 14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Model couplings in units where `hbar = 1`. Any sign is allowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BhmParams {
    /// hopping `J`
    pub j: f64,
    /// on-site interaction `U`
    pub u: f64,
    /// tilt per site `F` (`m g d` for gravity)
    pub f: f64,
}

impl BhmParams {
    pub fn new(j: f64, u: f64, f: f64) -> Result<Self> {
        if !(j.is_finite() && u.is_finite() && f.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite couplings J={j} U={u} F={f}")));
        }
        Ok(Self { j, u, f })
    }

    pub fn hubbard(j: f64, u: f64) -> Self {
        Self { j, u, f: 0.0 }
    }
}

/// Hermitian matrix in compressed-row storage.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    tag: BasisTag,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl HermitianOperator {
    /// Builds from per-row entry lists. Columns within a row are sorted,
    /// duplicates summed, exact zeros dropped. Hermiticity is not checked
    /// here; see [`HermitianOperator::hermitian_defect`].
    pub fn from_rows(tag: BasisTag, rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = row[k].1;
                k += 1;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != ZERO {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { tag, row_ptr, cols, vals }
    }

    pub fn zeros(tag: BasisTag, dim: usize) -> Self {
        Self { tag, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// True when every stored entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    /// `max |A_ij - conj(A_ji)|` over stored entries.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        let d = self.hermitian_defect();
        if d > tol {
            return Err(Error::NotHermitian(d));
        }
        Ok(())
    }

    /// Infinity norm, an upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim()).map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `y = A x`. Row partitions are independent so the result does not
    /// depend on the thread count.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let row = |(i, yi): (usize, &mut Complex64)| {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            let mut acc = ZERO;
            for (c, v) in self.cols[r.clone()].iter().zip(&self.vals[r]) {
                acc += v * x[*c];
            }
            *yi = acc;
        };
        if self.dim() >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(row);
        } else {
            y.iter_mut().enumerate().for_each(row);
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_tag(psi.tag())?;
        let mut out = StateVector::zeros(self.tag, self.dim());
        self.matvec(psi.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    /// `<psi|A|psi>`, real for Hermitian `A`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let a_psi = self.apply(psi)?;
        Ok(psi.inner(&a_psi)?.re)
    }

    pub(crate) fn check_tag(&self, other: BasisTag) -> Result<()> {
        if self.tag != other {
            return Err(Error::BasisMismatch { left: self.tag, right: other });
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zeros(self.tag, self.dim());
        }
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<Self> {
        Self::linear_combination(&[(1.0, self), (1.0, other)], &[])
    }

    /// `sum_k c_k A_k + sum_l d_l D_l` with matching basis tags.
    pub fn linear_combination(
        terms: &[(f64, &HermitianOperator)],
        diagonals: &[(f64, &DiagonalOperator)],
    ) -> Result<Self> {
        let (tag, dim) = match (terms.first(), diagonals.first()) {
            (Some((_, a)), _) => (a.tag, a.dim()),
            (None, Some((_, d))) => (d.tag, d.entries.len()),
            (None, None) => {
                return Err(Error::InvalidParameter("empty linear combination".into()));
            }
        };
        for (_, a) in terms {
            if a.tag != tag {
                return Err(Error::BasisMismatch { left: tag, right: a.tag });
            }
        }
        for (_, d) in diagonals {
            if d.tag != tag {
                return Err(Error::BasisMismatch { left: tag, right: d.tag });
            }
        }
        let build_row = |i: usize| {
            let mut row: Vec<(usize, Complex64)> = Vec::new();
            for &(c, a) in terms.iter().filter(|(c, _)| *c != 0.0) {
                row.extend(a.row(i).map(|(j, v)| (j, v * c)));
            }
            for &(c, d) in diagonals.iter().filter(|(c, _)| *c != 0.0) {
                row.push((i, Complex64::new(c * d.entries[i], 0.0)));
            }
            row
        };
        let rows: Vec<_> = if dim >= PAR_ROWS {
            (0..dim).into_par_iter().map(build_row).collect()
        } else {
            (0..dim).map(build_row).collect()
        };
        Ok(Self::from_rows(tag, rows))
    }

    /// Coordinate-list dump: `row,col,re,im`.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row,col,re,im")?;
        for i in 0..self.dim() {
            for (j, v) in self.row(i) {
                writeln!(w, "{i},{j},{:.17e},{:.17e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Real diagonal operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalOperator {
    tag: BasisTag,
    entries: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(tag: BasisTag, entries: Vec<f64>) -> Self {
        Self { tag, entries }
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_operator(&self) -> HermitianOperator {
        let rows = self.entries.iter().enumerate().map(|(i, &d)| vec![(i, Complex64::new(d, 0.0))]).collect();
        HermitianOperator::from_rows(self.tag, rows)
    }
}

/// Diagonal unitary with unit-modulus entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalUnitary {
    tag: BasisTag,
    entries: Vec<Complex64>,
}

impl DiagonalUnitary {
    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self { tag: self.tag, entries: self.entries.iter().map(|z| z.conj()).collect() }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        let mut out = psi.clone();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, psi: &mut StateVector) -> Result<()> {
        psi.check_tag(self.tag)?;
        psi.amplitudes_mut().iter_mut().zip(&self.entries).for_each(|(a, u)| *a *= u);
        Ok(())
    }

    /// `P A P^dag`, entry `(m, n)` picks up `p_m conj(p_n)`.
    pub fn conjugate(&self, a: &HermitianOperator) -> Result<HermitianOperator> {
        a.check_tag(self.tag)?;
        let mut out = a.clone();
        for i in 0..out.dim() {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                let j = out.cols[k];
                out.vals[k] *= self.entries[i] * self.entries[j].conj();
            }
        }
        Ok(out)
    }
}

/// `T = sum_<i,j> a_i^dag a_j`, both bond directions, no diagonal.
pub fn build_hopping(basis: &FockBasis) -> HermitianOperator {
    let n = basis.n_sites();
    let build_row = |idx: usize| {
        let occ = basis.occupations(idx);
        let mut scratch = occ.to_vec();
        let mut row = Vec::with_capacity(2 * n.saturating_sub(1));
        for (a, b) in basis.spec().bonds() {
            for (to, from) in [(a, b), (b, a)] {
                if occ[from] == 0 {
                    continue;
                }
                // <target| a_to^dag a_from |occ> = sqrt(n_from (n_to + 1)); T is real symmetric
                let amp = (occ[from] as f64 * (occ[to] as f64 + 1.0)).sqrt();
                scratch[from] -= 1;
                scratch[to] += 1;
                let target = basis.find(&scratch).expect("hop stays in the fixed-M basis");
                scratch[from] += 1;
                scratch[to] -= 1;
                row.push((target, Complex64::new(amp, 0.0)));
            }
        }
        row
    };
    let rows: Vec<_> = if basis.dim() >= PAR_ROWS {
        (0..basis.dim()).into_par_iter().map(build_row).collect()
    } else {
        (0..basis.dim()).map(build_row).collect()
    };
    HermitianOperator::from_rows(basis.tag(), rows)
}

/// `sum_j n_j (n_j - 1)`.
pub fn build_interaction(basis: &FockBasis) -> DiagonalOperator {
    let entries = basis.iter().map(|occ| occ.iter().map(|&n| (n as f64) * (n as f64 - 1.0)).sum()).collect();
    DiagonalOperator::new(basis.tag(), entries)
}

/// `sum_j j n_j`, sites counted from zero.
pub fn build_tilt(basis: &FockBasis) -> DiagonalOperator {
    DiagonalOperator::new(basis.tag(), basis.iter().map(dipole).collect())
}

fn dipole(occ: &[u8]) -> f64 {
    occ.iter().enumerate().map(|(j, &n)| (j * n as usize) as f64).sum()
}

/// Linear phase imprint `exp(-i phi sum_j j n_j)`. At `phi = pi` it flips the
/// sign of every hopping matrix element.
pub fn phase_imprint(basis: &FockBasis, phi: f64) -> DiagonalUnitary {
    let entries = basis.iter().map(|occ| Complex64::from_polar(1.0, -phi * dipole(occ))).collect();
    DiagonalUnitary { tag: basis.tag(), entries }
}

/// `-J T + U D_int + F D_tilt`.
pub fn assemble_hamiltonian(
    hopping: &HermitianOperator,
    interaction: &DiagonalOperator,
    tilt: &DiagonalOperator,
    params: BhmParams,
) -> Result<HermitianOperator> {
    HermitianOperator::linear_combination(&[(-params.j, hopping)], &[(params.u, interaction), (params.f, tilt)])
}

/// Per-basis cache of the coefficient-free operators.
#[derive(Clone, Debug)]
pub struct BhmOperators {
    basis: FockBasis,
    hopping: HermitianOperator,
    interaction: DiagonalOperator,
    tilt: DiagonalOperator,
}

impl BhmOperators {
    pub fn new(basis: FockBasis) -> Self {
        let hopping = build_hopping(&basis);
        let interaction = build_interaction(&basis);
        let tilt = build_tilt(&basis);
        Self { basis, hopping, interaction, tilt }
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn tag(&self) -> BasisTag {
        self.basis.tag()
    }

    pub fn hopping(&self) -> &HermitianOperator {
        &self.hopping
    }

    pub fn interaction(&self) -> &DiagonalOperator {
        &self.interaction
    }

    pub fn tilt(&self) -> &DiagonalOperator {
        &self.tilt
    }

    pub fn hamiltonian(&self, params: BhmParams) -> HermitianOperator {
        assemble_hamiltonian(&self.hopping, &self.interaction, &self.tilt, params)
            .expect("cached operators share one basis")
    }

    pub fn imprint(&self, phi: f64) -> DiagonalUnitary {
        phase_imprint(&self.basis, phi)
    }
}
