mod common;

use std::f64::consts::PI;

use bhecho::echo::uniform_grid;
use bhecho::{
    echo_curve, evolve, ground_state, sequence_echo, two_leg_fidelity, variance, variance_oracle, BhmParams, EigConfig,
    FockState, ImprintMode, PropagatorConfig, Scenario, ScenarioKind, SequenceSpec, StateVector,
};
use common::{dense, dense_echo, dense_evolve, ops, overlap, spread_state};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn krylov_matches_dense_exponential() {
    let o = ops(4, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let params =
            BhmParams::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-0.5..0.5))
                .unwrap();
        let h = o.hamiltonian(params);
        let psi = spread_state(&o, rng.random_range(0.1..2.0));
        let got = evolve(&h, &psi, 3.0, &PropagatorConfig::default()).unwrap();
        let want = dense_evolve(&dense(&h), psi.amplitudes(), 3.0);
        let diff = got.amplitudes().iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{params:?}: {diff:e}");
    }
}

#[test]
fn norm_and_energy_conservation() {
    let o = ops(6, 6);
    let h = o.hamiltonian(BhmParams::new(1.0, 1.0, 0.1).unwrap());
    let cfg = PropagatorConfig::default();
    let mut psi = StateVector::mott(o.basis()).unwrap();
    let e0 = h.expectation(&psi).unwrap();
    let scale = h.norm_bound();
    for _ in 0..10 {
        psi = evolve(&h, &psi, 5.0, &cfg).unwrap();
        assert!((psi.norm() - 1.0).abs() <= 1e-9);
        assert!((h.expectation(&psi).unwrap() - e0).abs() <= 1e-8 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn evolution_is_linear(a_re in -1.0f64..1.0, a_im in -1.0f64..1.0, b_re in -1.0f64..1.0, t in -4.0f64..4.0) {
        let o = ops(4, 4);
        let h = o.hamiltonian(BhmParams::new(0.9, 1.1, 0.05).unwrap());
        let psi = spread_state(&o, 0.4);
        let phi = spread_state(&o, 1.3);
        let (a, b) = (Complex64::new(a_re, a_im), Complex64::new(b_re, 0.3));
        let mut mix = psi.combine(a, &phi, b).unwrap();
        let n = mix.norm();
        prop_assume!(n > 1e-3);
        mix.normalize().unwrap();
        let cfg = PropagatorConfig::default();
        let lhs = evolve(&h, &mix, t, &cfg).unwrap();
        let rhs = evolve(&h, &psi, t, &cfg).unwrap()
            .combine(a / n, &evolve(&h, &phi, t, &cfg).unwrap(), b / n).unwrap();
        for (x, y) in lhs.amplitudes().iter().zip(rhs.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn evolution_is_reversible(t in 0.1f64..6.0, j in 0.0f64..2.0) {
        let o = ops(5, 4);
        let h = o.hamiltonian(BhmParams::hubbard(j, 1.0));
        let psi = spread_state(&o, 0.8);
        let cfg = PropagatorConfig::default();
        let back = evolve(&h, &evolve(&h, &psi, t, &cfg).unwrap(), -t, &cfg).unwrap();
        for (x, y) in back.amplitudes().iter().zip(psi.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }
}

#[test]
fn two_site_delta_u_echo_matches_dense_two_leg() {
    let o = ops(2, 2);
    let s = Scenario::new(&o, ScenarioKind::DeltaU, 1.0, 1.0, 0.2).unwrap();
    let gs = ground_state(&s.forward, &EigConfig::default()).unwrap();
    let grid = uniform_grid(10.0, 51);
    let cfg = PropagatorConfig::default();
    let curve = echo_curve(&gs.state, &s, &grid, &cfg).unwrap();
    let (hf, hb) = (dense(&s.forward), dense(&s.backward));
    for (t, f) in grid.iter().zip(&curve.raw) {
        assert!((dense_echo(&hf, &hb, gs.state.amplitudes(), *t) - f).abs() < 1e-9);
    }
    assert!(curve.raw.iter().any(|f| *f < 0.999));
}

#[test]
fn copropagation_equals_two_leg_on_larger_basis() {
    let o = ops(5, 5);
    let cfg = PropagatorConfig::default();
    let psi = StateVector::mott(o.basis()).unwrap();
    for (kind, mag) in [(ScenarioKind::DeltaJSymmetric, 0.1), (ScenarioKind::Gravity, 0.1), (ScenarioKind::DeltaU, 0.2)]
    {
        let s = Scenario::new(&o, kind, 1.0, 1.0, mag).unwrap();
        let grid = uniform_grid(6.0, 13);
        let curve = echo_curve(&psi, &s, &grid, &cfg).unwrap();
        for (t, f) in grid.iter().zip(&curve.raw) {
            assert!((two_leg_fidelity(&psi, &s, *t, &cfg).unwrap() - f).abs() < 1e-9, "{kind} t={t}");
        }
    }
}

#[test]
fn short_time_law_matches_variance() {
    let o = ops(5, 5);
    let gs = ground_state(&o.hamiltonian(BhmParams::hubbard(0.6, 1.0)), &EigConfig::default()).unwrap();
    let cfg = PropagatorConfig::default();
    let t = 1e-2;
    for (kind, mag) in [
        (ScenarioKind::DeltaJSymmetric, 0.05),
        (ScenarioKind::DeltaJOneLeg, 0.05),
        (ScenarioKind::DeltaU, 0.2),
        (ScenarioKind::Gravity, 0.1),
    ] {
        let s = Scenario::new(&o, kind, 0.6, 1.0, mag).unwrap();
        let var = variance_oracle(&gs.state, &s).unwrap();
        assert!(var > 0.0);
        let f = echo_curve(&gs.state, &s, &[0.0, t], &cfg).unwrap().raw[1];
        let rate = (1.0 - f) / (t * t);
        assert!((rate / var - 1.0).abs() < 0.02, "{kind}: {rate} vs {var}");
    }
}

#[test]
fn fock_states_have_vanishing_variance_for_diagonal_perturbations() {
    let o = ops(5, 5);
    for occ in [vec![1u8, 1, 1, 1, 1], vec![2, 0, 1, 2, 0], vec![0, 0, 5, 0, 0]] {
        let psi = StateVector::fock(o.basis(), &FockState::new(occ)).unwrap();
        for kind in [ScenarioKind::DeltaU, ScenarioKind::Gravity] {
            let s = Scenario::new(&o, kind, 1.0, 1.0, 0.2).unwrap();
            assert_eq!(variance_oracle(&psi, &s).unwrap(), 0.0);
        }
    }
}

#[test]
fn mott_variance_is_four_per_bond() {
    // Var(dJ T) = dJ^2 (<T^2> - <T>^2) with T built by brute force
    for n in 2..=6usize {
        let (states, t) = common::brute_force_hopping(n, n);
        let mott = states.iter().position(|s| s.iter().all(|&x| x == 1)).unwrap();
        let t2 = &t * &t;
        let brute = t2[(mott, mott)] - t[(mott, mott)].powi(2);
        assert!((brute - 4.0 * (n as f64 - 1.0)).abs() < 1e-12);

        let o = ops(n, n);
        let psi = StateVector::mott(o.basis()).unwrap();
        let s = Scenario::new(&o, ScenarioKind::DeltaJSymmetric, 0.0, 1.0, 0.05).unwrap();
        let v = variance_oracle(&psi, &s).unwrap();
        assert!((v - 0.0025 * brute).abs() < 1e-14);
        assert!((variance(&psi, o.hopping()).unwrap() - brute).abs() < 1e-12);
    }
}

#[test]
fn ideal_imprint_sequence_reproduces_ideal_echo() {
    let o = ops(5, 5);
    let cfg = PropagatorConfig::default();
    let grid = uniform_grid(6.0, 25);
    let mott = StateVector::mott(o.basis()).unwrap();
    let seq = SequenceSpec::ideal(1.0, 1.0);
    let c = sequence_echo(&o, &mott, &seq, &grid, &cfg).unwrap();
    assert!(c.raw.iter().all(|f| (1.0 - f).abs() <= 1e-8));

    // a superfluid ground state returns as P(pi) psi0
    let gs = ground_state(&o.hamiltonian(BhmParams::hubbard(1.0, 1.0)), &EigConfig::default()).unwrap();
    let p = o.imprint(PI);
    let parity = overlap(gs.state.amplitudes(), p.apply(&gs.state).unwrap().amplitudes()).norm_sqr();
    assert!(parity < 0.99);
    let literal = sequence_echo(&o, &gs.state, &seq, &grid, &cfg).unwrap();
    assert!(literal.raw.iter().all(|f| (f - parity).abs() <= 1e-8));
    let closed = SequenceSpec { compare_to_imprinted: true, ..seq };
    let c = sequence_echo(&o, &gs.state, &closed, &grid, &cfg).unwrap();
    assert!(c.raw.iter().all(|f| (1.0 - f).abs() <= 1e-8));
}

#[test]
fn pulse_without_lattice_dynamics_equals_ideal_imprint() {
    let o = ops(4, 4);
    let cfg = PropagatorConfig::default();
    let grid = uniform_grid(4.0, 17);
    let psi = spread_state(&o, 0.9);
    let base = SequenceSpec { delta_u: 0.2, compare_to_imprinted: true, ..SequenceSpec::ideal(1.0, 1.0) };
    let ideal = sequence_echo(&o, &psi, &base, &grid, &cfg).unwrap();
    for tau in [0.01, 0.3] {
        let pulsed = SequenceSpec {
            imprint: ImprintMode::Pulsed { f_pulse: PI / tau, tau, lattice_active: false },
            ..base.clone()
        };
        let c = sequence_echo(&o, &psi, &pulsed, &grid, &cfg).unwrap();
        for (a, b) in c.raw.iter().zip(&ideal.raw) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(c.warnings().count(), 0);
    }
}

#[test]
fn finite_pulse_duration_degrades_the_echo() {
    let o = ops(5, 5);
    let cfg = PropagatorConfig::default();
    let psi = StateVector::mott(o.basis()).unwrap();
    let mut losses = Vec::new();
    for tau in [1e-3, 1e-2, 1e-1] {
        let seq = SequenceSpec {
            imprint: ImprintMode::Pulsed { f_pulse: PI / tau, tau, lattice_active: true },
            ..SequenceSpec::ideal(1.0, 1.0)
        };
        let c = sequence_echo(&o, &psi, &seq, &[0.0, 2.0], &cfg).unwrap();
        losses.push(1.0 - c.raw[1]);
    }
    assert!(losses[0] < losses[1] && losses[1] < losses[2], "{losses:?}");
    assert!(losses[0] > 0.0);
}

#[test]
fn phase_error_breaks_the_reversal() {
    let o = ops(4, 4);
    let psi = StateVector::mott(o.basis()).unwrap();
    let seq = SequenceSpec { phase_error: 0.1, ..SequenceSpec::ideal(1.0, 1.0) };
    let c = sequence_echo(&o, &psi, &seq, &uniform_grid(5.0, 11), &PropagatorConfig::default()).unwrap();
    assert!(c.raw.last().unwrap() < &0.999);
}
