//! Test-only oracles, independent of the sparse/Krylov code paths.
#![allow(dead_code)]

use std::collections::HashMap;

use bhecho::{BhmOperators, FockBasis, HermitianOperator, LatticeSpec, StateVector};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub fn ops(n: usize, m: usize) -> BhmOperators {
    BhmOperators::new(FockBasis::new(LatticeSpec::new(n, m).unwrap()).unwrap())
}

/// Real dense copy of a real symmetric operator.
pub fn dense(h: &HermitianOperator) -> DMatrix<f64> {
    let n = h.dim();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in h.row(i) {
            assert_eq!(v.im, 0.0);
            m[(i, j)] = v.re;
        }
    }
    m
}

/// `exp(-i H t) psi` through a dense eigendecomposition.
pub fn dense_evolve(h: &DMatrix<f64>, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let eig = SymmetricEigen::new(h.clone());
    let n = psi.len();
    let v = &eig.eigenvectors;
    let coeff: Vec<Complex64> = (0..n)
        .map(|k| {
            let c: Complex64 = (0..n).map(|i| psi[i] * v[(i, k)]).sum();
            c * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|k| coeff[k] * v[(i, k)]).sum()).collect()
}

pub fn overlap(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Literal two-leg echo with dense exponentials.
pub fn dense_echo(hf: &DMatrix<f64>, hb: &DMatrix<f64>, psi: &[Complex64], t: f64) -> f64 {
    let fwd = dense_evolve(hf, psi, t);
    let back = dense_evolve(hb, &fwd, t);
    overlap(psi, &back).norm_sqr()
}

/// Hopping matrix built from scratch by applying `a_i^dag a_j` to every
/// occupation vector and looking the result up in a hash map.
pub fn brute_force_hopping(n_sites: usize, n_bosons: usize) -> (Vec<Vec<u8>>, DMatrix<f64>) {
    let mut states = Vec::new();
    let total = (n_bosons + 1).pow(n_sites as u32);
    for code in 0..total {
        let mut c = code;
        let occ: Vec<u8> = (0..n_sites)
            .map(|_| {
                let d = c % (n_bosons + 1);
                c /= n_bosons + 1;
                d as u8
            })
            .collect();
        if occ.iter().map(|&x| x as usize).sum::<usize>() == n_bosons {
            states.push(occ);
        }
    }
    let index: HashMap<Vec<u8>, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let dim = states.len();
    let mut t = DMatrix::zeros(dim, dim);
    for (col, s) in states.iter().enumerate() {
        for i in 0..n_sites.saturating_sub(1) {
            for (to, from) in [(i, i + 1), (i + 1, i)] {
                if s[from] == 0 {
                    continue;
                }
                let mut out = s.clone();
                let amp = (out[from] as f64).sqrt();
                out[from] -= 1;
                let amp = amp * (out[to] as f64 + 1.0).sqrt();
                out[to] += 1;
                t[(index[&out], col)] += amp;
            }
        }
    }
    (states, t)
}

pub fn spread_state(o: &BhmOperators, seed: f64) -> StateVector {
    let dim = o.basis().dim();
    let amps =
        (0..dim).map(|i| Complex64::new((seed * i as f64 + 0.3).sin(), (1.7 * seed * i as f64).cos() * 0.5)).collect();
    let mut s = StateVector::from_amplitudes(o.tag(), amps);
    s.normalize().unwrap();
    s
}
