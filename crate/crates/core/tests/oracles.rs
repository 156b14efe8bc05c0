//! Library results against independently computed references: a fixed-step
//! midpoint rule with Padé propagators for interval operators, and a literal
//! density-matrix collapse simulation for outcome strings.

mod common;

use std::f64::consts::PI;

use common::*;
use num_complex::Complex64 as C64;
use occtime::dynamics::{Hamiltonian, HeisenbergFamily};
use occtime::luders::{sequence_probability, OutcomeString};
use occtime::models::{build_rovelli, RabiModel};
use occtime::occurrence::{accumulate_f, EventFamily};
use occtime::quadrature::QuadratureSpec;

const F_ORACLE_TOL: f64 = 1e-7;
const SEQUENCE_TOL: f64 = 1e-12;

fn check_against_midpoint(family: &EventFamily, intervals: &[(f64, f64)]) {
    let h = family.evolution().hamiltonian().operator().as_dmatrix().clone();
    let p = family.event().as_dmatrix().clone();
    for &(a, b) in intervals {
        let f = accumulate_f(family, a, b, &QuadratureSpec::default()).unwrap();
        let oracle = midpoint_oracle(&h, &p, a, b, 10 * f.panels);
        let gap = f.operator.max_abs_diff(&oracle);
        eprintln!("[{a}, {b}] panels {} gap {gap:e}", f.panels);
        assert!(gap <= F_ORACLE_TOL, "[{a}, {b}]: gap {gap:e} with {} panels", f.panels);
    }
}

#[test]
fn rabi_interval_operators_match_midpoint() {
    let rabi = RabiModel::new(1.3).unwrap();
    let period = rabi.period();
    let intervals: Vec<(f64, f64)> =
        (0..4).map(|k| (k as f64 * period / 4.0, (k + 1) as f64 * period / 4.0)).chain([(0.0, period), (0.1, 2.9)]).collect();
    check_against_midpoint(&rabi.event_family().unwrap(), &intervals);
}

#[test]
fn rovelli_interval_operators_match_midpoint() {
    let model = build_rovelli(1.5, C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap();
    let t = model.measurement_time();
    let intervals = [(0.0, t / 3.0), (t / 3.0, t), (0.0, 2.0 * t), (0.7 * t, 1.9 * t)];
    check_against_midpoint(&model.event_family().unwrap(), &intervals);
}

#[test]
fn random_interval_operators_match_midpoint() {
    let mut r = rng(11);
    for dim in [2, 3, 5, 8] {
        let h = Hamiltonian::new(random_hermitian(&mut r, dim, 1.0)).unwrap();
        let p = random_projector(&mut r, dim, (dim / 2).max(1));
        let family = EventFamily::unitary(h, p).unwrap();
        check_against_midpoint(&family, &[(0.0, 1.0), (0.5, 3.0)]);
    }
}

fn check_all_strings(family: &HeisenbergFamily, psi: &occtime::linalg::StateVector, times: &[f64]) {
    let h = family.hamiltonian().operator().as_dmatrix().clone();
    let m = family.seed().as_dmatrix().clone();
    let mut total = 0.0;
    for string in OutcomeString::enumerate(times).unwrap() {
        let bits: Vec<u8> = string.outcomes().iter().map(|o| o.as_u8()).collect();
        let p = sequence_probability(family, psi, &string).unwrap().probability;
        let oracle = collapse_oracle(&h, &m, psi.amplitudes(), times, &bits);
        assert!((p - oracle).abs() <= SEQUENCE_TOL, "{bits:?}: {p} vs {oracle}");
        total += p;
    }
    assert!((total - 1.0).abs() <= 1e-9, "total {total}");
}

#[test]
fn rovelli_three_step_string_matches_collapse() {
    let model = build_rovelli(1.0, C64::new(0.6, 0.0), C64::new(0.8, 0.0)).unwrap();
    let family = model.heisenberg_family().unwrap();
    let times = [1.0 / 3.0, 2.0 / 3.0, 1.0];
    let string = OutcomeString::from_bits(&times, &[0, 0, 1]).unwrap();
    let p = sequence_probability(&family, model.initial_state(), &string).unwrap().probability;
    let h = model.hamiltonian().operator().as_dmatrix();
    let oracle = collapse_oracle(h, model.m().as_dmatrix(), model.initial_state().amplitudes(), &times, &[0, 0, 1]);
    assert!((p - oracle).abs() <= SEQUENCE_TOL);
    assert!(p > 0.0);
    check_all_strings(&family, model.initial_state(), &[0.2, 0.5, 1.0, 1.3, 2.0, 2.4]);
}

#[test]
fn random_sequences_match_collapse() {
    let mut r = rng(23);
    for dim in 2..=8 {
        for n in 1..=6 {
            let h = Hamiltonian::new(random_hermitian(&mut r, dim, 1.5)).unwrap();
            let m = random_projector(&mut r, dim, r_rank(dim, n));
            let family = HeisenbergFamily::new(h, &m).unwrap();
            let psi = random_state(&mut r, dim);
            let times: Vec<f64> = (0..n).map(|k| 0.37 * k as f64 + 0.05 * dim as f64).collect();
            check_all_strings(&family, &psi, &times);
        }
    }
}

fn r_rank(dim: usize, n: usize) -> usize {
    1 + (dim + n) % (dim - 1).max(1)
}

#[test]
fn rabi_period_fraction_with_known_value() {
    // ∫₀^{π/ω} sin²(ωt/2) dt = π/(2ω)
    let rabi = RabiModel::new(2.0).unwrap();
    let f = accumulate_f(&rabi.event_family().unwrap(), 0.0, PI / 2.0, &QuadratureSpec::default()).unwrap();
    assert!((f.operator[(0, 0)].re - PI / 4.0).abs() < 1e-11);
}
