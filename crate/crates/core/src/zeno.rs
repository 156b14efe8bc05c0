//! Repeated measurement of a projector: survival under `n + 1` uniformly
//! spaced Lüders measurements, its behaviour as `n` grows, and the contrast
//! between frequent pulsed measurement and weak continuous absorption.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{AbsorptiveGenerator, Hamiltonian, HeisenbergFamily};
use crate::error::{Error, Result};
use crate::linalg::{check_dim, Projector, StateVector};
use crate::luders::{sequence_probability, Outcome, OutcomeString};

/// Smallest `n` entering the rate fit of [`ZenoScan::fitted_c`].
pub const FIT_MIN_N: usize = 4;

/// Largest weight of the initial state inside the range of `M`.
pub const INITIAL_STATE_TOL: f64 = 1e-10;

/// `n + 1` measurements of `M` at `t_k = kτ/n`, `k = 0..=n`, starting from a
/// state with `M ψ0 = 0`.
#[derive(Debug, Clone)]
pub struct ZenoExperiment {
    family: HeisenbergFamily,
    psi0: StateVector,
    tau: f64,
    n: usize,
}

impl ZenoExperiment {
    pub fn new(hamiltonian: Hamiltonian, m: &Projector, psi0: StateVector, tau: f64, n: usize) -> Result<Self> {
        check_dim(hamiltonian.dim(), psi0.dim())?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let weight = m.expectation(&psi0)?;
        if weight > INITIAL_STATE_TOL {
            return Err(Error::BadInitialState { weight });
        }
        Ok(Self { family: HeisenbergFamily::new(hamiltonian, m)?, psi0, tau, n })
    }

    /// The same experiment with a different number of intervals.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        Ok(Self { n, ..self.clone() })
    }

    pub fn family(&self) -> &HeisenbergFamily {
        &self.family
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.psi0
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|k| if k == self.n { self.tau } else { self.tau * (k as f64 / self.n as f64) })
            .collect()
    }
}

/// Probability that all `n + 1` measurements return 0.
pub fn survival_probability(e: &ZenoExperiment) -> Result<f64> {
    let times = e.times();
    let outcomes = vec![Outcome::Zero; times.len()];
    let string = OutcomeString::new(times, outcomes)?;
    Ok(sequence_probability(&e.family, &e.psi0, &string)?.probability)
}

/// Survival as a function of the number of measurement intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ZenoScan {
    pub n_values: Vec<usize>,
    pub survival: Vec<f64>,
    pub transition: Vec<f64>,
    /// Leading coefficient `c` of the least-squares fit
    /// `1 − survival ≈ c/n + d/n²` over the points with `n ≥ FIT_MIN_N`
    /// (all points if fewer than two qualify). For a two-level rotation by
    /// `θ`, `c → θ²`.
    pub fitted_c: f64,
    /// Survival never decreases by more than round-off along the scan.
    pub monotone: bool,
}

pub fn zeno_scan(template: &ZenoExperiment, n_values: &[usize]) -> Result<ZenoScan> {
    if n_values.is_empty() {
        return Err(Error::InvalidParameter("n_values is empty".into()));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("n_values must be strictly increasing".into()));
    }
    let survival = n_values
        .par_iter()
        .map(|&n| survival_probability(&template.with_n(n)?))
        .collect::<Result<Vec<f64>>>()?;
    let transition = survival.iter().map(|s| 1.0 - s).collect();
    let fitted_c = fit_rate(n_values, &survival);
    let monotone = survival.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    Ok(ZenoScan { n_values: n_values.to_vec(), survival, transition, fitted_c, monotone })
}

fn fit_rate(n_values: &[usize], survival: &[f64]) -> f64 {
    let tail: Vec<(f64, f64)> = n_values
        .iter()
        .zip(survival)
        .filter(|(&n, _)| n >= FIT_MIN_N)
        .map(|(&n, s)| (1.0 / n as f64, 1.0 - s))
        .collect();
    let points: Vec<(f64, f64)> = if tail.len() >= 2 {
        tail
    } else {
        n_values.iter().zip(survival).map(|(&n, s)| (1.0 / n as f64, 1.0 - s)).collect()
    };
    if points.len() < 2 {
        let (x, y) = points[0];
        return y / x;
    }
    // normal equations for y = c·x + d·x²
    let (mut s2, mut s3, mut s4, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &points {
        s2 += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
        b1 += x * y;
        b2 += x * x * y;
    }
    (b1 * s4 - b2 * s3) / (s2 * s4 - s3 * s3)
}

/// Joint probability of the outcomes `{0, 0, 1, 1, 0}` at five increasing times.
pub fn flipback_probability(family: &HeisenbergFamily, psi0: &StateVector, times: &[f64]) -> Result<f64> {
    if times.len() != 5 {
        return Err(Error::InvalidParameter(format!("flipback needs 5 times, got {}", times.len())));
    }
    let string = OutcomeString::from_bits(times, &[0, 0, 1, 1, 0])?;
    Ok(sequence_probability(family, psi0, &string)?.probability)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// `n = max(1, round(g·τ))` projective measurements on `[0, τ]`.
    Pulsed,
    /// Absorption `Γ = g·M` acting throughout `[0, τ]`.
    Continuous,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Pulsed => "pulsed",
            Protocol::Continuous => "continuous",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pulsed" => Ok(Protocol::Pulsed),
            "continuous" => Ok(Protocol::Continuous),
            other => Err(Error::InvalidParameter(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub coupling: f64,
    pub protocol: Protocol,
    pub transition: f64,
}

/// Number of pulsed measurement intervals standing in for coupling `g`.
pub fn pulses_for_coupling(g: f64, tau: f64) -> usize {
    (g * tau).round().max(1.0) as usize
}

/// Transition probability over `[0, τ]` for each coupling, in input order.
///
/// Pulsed: `1 − survival` with [`pulses_for_coupling`] intervals. Continuous:
/// `1 − ‖(I − M) K_τ ψ0‖²` with `K_τ` generated by `H − i g M / 2`.
pub fn coupling_sweep(
    template: &ZenoExperiment,
    couplings: &[f64],
    protocol: Protocol,
) -> Result<Vec<SweepRow>> {
    if let Some(&g) = couplings.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::InvalidParameter(format!("couplings must be positive, got {g}")));
    }
    let m = template.family.projector_at(0.0)?;
    let hamiltonian = template.family.hamiltonian().clone();
    let tau = template.tau;
    couplings
        .par_iter()
        .map(|&g| {
            let transition = match protocol {
                Protocol::Pulsed => 1.0 - survival_probability(&template.with_n(pulses_for_coupling(g, tau))?)?,
                Protocol::Continuous => {
                    let generator = AbsorptiveGenerator::new(hamiltonian.clone(), m.scaled(g))?;
                    let v = generator.propagate(&template.psi0, tau)?;
                    let kept = m.complement().as_dmatrix() * v;
                    1.0 - kept.norm_squared()
                }
            };
            Ok(SweepRow { coupling: g, protocol, transition })
        })
        .collect()
}

/// `⟨ψ0|M_τ ψ0⟩` under the free dynamics.
pub fn uncoupled_transition(template: &ZenoExperiment) -> Result<f64> {
    let m = template.family.seed();
    let v = template.family.hamiltonian().spectrum().exp_skew_apply(template.tau, template.psi0.amplitudes());
    Ok(crate::linalg::expectation_raw(m.as_dmatrix(), &v))
}
