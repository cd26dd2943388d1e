//! Fixed-particle-number Fock basis of an open 1-D chain.
//!
//! States are stored in descending lexicographic order of their occupation
//! vectors (site 0 most significant), so for `N = M = 2` the basis reads
//! `(2,0), (1,1), (0,2)`. Lookup is a binary search over the flat table.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

/// Default ceiling on the number of basis states.
pub const DEFAULT_DIMENSION_CAP: usize = 200_000;

/// Site count and particle number of an open chain with unit spacing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    pub n_sites: usize,
    pub n_bosons: usize,
}

impl LatticeSpec {
    pub fn new(n_sites: usize, n_bosons: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidLattice("n_sites must be at least 1".into()));
        }
        if n_bosons > u8::MAX as usize {
            return Err(Error::InvalidLattice(format!(
                "n_bosons = {n_bosons} exceeds the per-site occupation range (255)"
            )));
        }
        Ok(Self { n_sites, n_bosons })
    }

    /// Unit filling, one boson per site.
    pub fn unit_filling(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, n_sites)
    }

    /// Nearest-neighbour bonds `(i, i + 1)`.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize)> {
        (1..self.n_sites).map(|i| (i - 1, i))
    }

    pub fn n_bonds(&self) -> usize {
        self.n_sites - 1
    }

    /// Stars-and-bars count `binom(N + M - 1, M)`.
    pub fn dimension(&self) -> u128 {
        binomial((self.n_sites + self.n_bosons - 1) as u128, self.n_bosons as u128)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Identifies the basis an operator or state lives on. Bases with equal
/// `(N, M)` are identical because the enumeration is deterministic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisTag {
    pub n_sites: usize,
    pub n_bosons: usize,
}

impl fmt::Display for BasisTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={},M={}", self.n_sites, self.n_bosons)
    }
}

impl From<LatticeSpec> for BasisTag {
    fn from(spec: LatticeSpec) -> Self {
        Self { n_sites: spec.n_sites, n_bosons: spec.n_bosons }
    }
}

/// Occupation numbers `n_j`, one per site.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState(pub Vec<u8>);

impl FockState {
    pub fn new(occupations: impl Into<Vec<u8>>) -> Self {
        Self(occupations.into())
    }

    /// `(1, 1, ..., 1)`.
    pub fn mott(n_sites: usize) -> Self {
        Self(vec![1; n_sites])
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    pub fn n_bosons(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

/// Ordered Fock basis. Immutable once built.
#[derive(Clone, Debug)]
pub struct FockBasis {
    spec: LatticeSpec,
    // row-major, `n_sites` occupations per state
    table: Vec<u8>,
    dim: usize,
}

impl FockBasis {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        Self::with_cap(spec, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(spec: LatticeSpec, cap: usize) -> Result<Self> {
        let spec = LatticeSpec::new(spec.n_sites, spec.n_bosons)?;
        let dim = spec.dimension();
        if dim > cap as u128 {
            return Err(Error::DimensionCap { dim, cap });
        }
        let dim = dim as usize;
        let mut table = Vec::with_capacity(dim * spec.n_sites);
        let mut current = vec![0u8; spec.n_sites];
        fill(&mut table, &mut current, 0, spec.n_bosons);
        debug_assert_eq!(table.len(), dim * spec.n_sites);
        Ok(Self { spec, table, dim })
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn tag(&self) -> BasisTag {
        self.spec.into()
    }

    pub fn n_sites(&self) -> usize {
        self.spec.n_sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Occupations of the state at `index` as a borrowed slice.
    pub fn occupations(&self, index: usize) -> &[u8] {
        let n = self.spec.n_sites;
        &self.table[index * n..(index + 1) * n]
    }

    pub fn state_at(&self, index: usize) -> Result<FockState> {
        if index >= self.dim {
            return Err(Error::Lookup(format!("index {index} out of range (dim {})", self.dim)));
        }
        Ok(FockState(self.occupations(index).to_vec()))
    }

    pub fn index_of(&self, state: &FockState) -> Result<usize> {
        let occ = state.occupations();
        if occ.len() != self.spec.n_sites {
            return Err(Error::Lookup(format!(
                "state {state} has {} sites, basis has {}",
                occ.len(),
                self.spec.n_sites
            )));
        }
        if state.n_bosons() != self.spec.n_bosons {
            return Err(Error::Lookup(format!(
                "state {state} holds {} bosons, basis has {}",
                state.n_bosons(),
                self.spec.n_bosons
            )));
        }
        self.find(occ).ok_or_else(|| Error::Lookup(format!("state {state} not found")))
    }

    /// Binary search over the descending table.
    pub(crate) fn find(&self, occ: &[u8]) -> Option<usize> {
        let (mut lo, mut hi) = (0usize, self.dim);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            match self.occupations(mid).cmp(occ) {
                Ordering::Equal => return Some(mid),
                // descending: larger entries come first
                Ordering::Greater => lo = mid + 1,
                Ordering::Less => hi = mid,
            }
        }
        None
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.table.chunks_exact(self.spec.n_sites)
    }

    /// Index of the unit-filling Mott state, if the basis has one.
    pub fn mott_index(&self) -> Option<usize> {
        (self.spec.n_sites == self.spec.n_bosons).then(|| self.find(&vec![1u8; self.spec.n_sites])).flatten()
    }

    /// One row per state, columns are site occupations.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.spec.n_sites).map(|j| format!("n{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for occ in self.iter() {
            let row: Vec<String> = occ.iter().map(|n| n.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn fill(table: &mut Vec<u8>, current: &mut [u8], site: usize, left: usize) {
    if site + 1 == current.len() {
        current[site] = left as u8;
        table.extend_from_slice(current);
        return;
    }
    for k in (0..=left).rev() {
        current[site] = k as u8;
        fill(table, current, site + 1, left - k);
    }
}
