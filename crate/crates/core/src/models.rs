//! Concrete scenarios: exponential decay, a system ⊗ apparatus measurement
//! model, and a resonantly driven two-level system.

use std::f64::consts::PI;

use crate::dynamics::{AbsorptiveGenerator, Hamiltonian, HeisenbergFamily};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianOperator, Projector, StateVector, C64, NORM_TOL};
use crate::occurrence::EventFamily;

/// Exponential decay with rate `λ` (mean lifetime `1/λ`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialModel {
    lambda: f64,
}

impl ExponentialModel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("decay rate must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn from_half_life(half_life: f64) -> Result<Self> {
        if !(half_life.is_finite() && half_life > 0.0) {
            return Err(Error::InvalidParameter(format!("half-life must be positive, got {half_life}")));
        }
        Self::new(std::f64::consts::LN_2 / half_life)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mean_lifetime(&self) -> f64 {
        1.0 / self.lambda
    }

    pub fn half_life(&self) -> f64 {
        std::f64::consts::LN_2 / self.lambda
    }

    /// `λ e^{-λt}`.
    pub fn density(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.lambda * (-self.lambda * t).exp())
    }

    /// Absorptive surrogate on a single undecayed level: `H = 0`, `Γ = λ`,
    /// survival `‖K_t ψ‖² = e^{-λt}`.
    ///
    /// The event operator is `Γ/λ = 1`, so the occurrence density is the
    /// probability flux `λ e^{-λt}` out of the undecayed state up to the
    /// constant `λ`, which the normalization removes.
    pub fn absorptive_family(&self) -> Result<(EventFamily, StateVector)> {
        let gamma = HermitianOperator::from_real_diagonal(&[self.lambda]);
        let generator = AbsorptiveGenerator::new(Hamiltonian::zero(1)?, gamma)?;
        let family = EventFamily::absorptive(generator, Projector::identity(1))?;
        Ok((family, StateVector::basis(1, 0)?))
    }
}

/// `Pr(t1 ≤ t_o < t2) = e^{-λ t1} − e^{-λ t2}`; `t2` may be `+∞`.
pub fn exp_interval_probability(m: &ExponentialModel, t1: f64, t2: f64) -> Result<f64> {
    if !t1.is_finite() || t1 < 0.0 || t2.is_nan() || t2 <= t1 {
        return Err(Error::BadInterval { t1, t2 });
    }
    let upper = if t2 == f64::INFINITY { 0.0 } else { (-m.lambda * t2).exp() };
    Ok((-m.lambda * t1).exp() - upper)
}

/// `1 − e^{-λt}`.
pub fn exp_has_decayed(m: &ExponentialModel, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(-(-m.lambda * t).exp_m1())
}

/// System index for [`RovelliModel::basis_index`].
pub const SYS_A: usize = 0;
pub const SYS_B: usize = 1;
/// Apparatus index for [`RovelliModel::basis_index`].
pub const APP_INIT: usize = 0;
pub const APP_OA: usize = 1;
pub const APP_OB: usize = 2;

/// Two-state system `{|a⟩, |b⟩}` coupled to a three-state apparatus
/// `{|init⟩, |O_a⟩, |O_b⟩}`.
///
/// The interaction rotates `|a,init⟩ → |a,O_a⟩` and `|b,init⟩ → |b,O_b⟩` in
/// two decoupled planes with quarter period `T`, so the apparatus has read
/// the system exactly at `T`. `M` projects onto "the pointer agrees with the
/// system", `span{|a,O_a⟩, |b,O_b⟩}`.
#[derive(Debug, Clone)]
pub struct RovelliModel {
    period: f64,
    c_a: C64,
    c_b: C64,
    hamiltonian: Hamiltonian,
    m: Projector,
    psi0: StateVector,
}

impl RovelliModel {
    pub const DIM: usize = 6;

    /// Index of `|sys⟩ ⊗ |app⟩` in the product basis.
    pub fn basis_index(sys: usize, app: usize) -> usize {
        3 * sys + app
    }

    pub fn basis_state(sys: usize, app: usize) -> StateVector {
        StateVector::basis(Self::DIM, Self::basis_index(sys, app)).expect("index in range")
    }

    /// Measurement duration `T`.
    pub fn measurement_time(&self) -> f64 {
        self.period
    }

    pub fn amplitudes(&self) -> (C64, C64) {
        (self.c_a, self.c_b)
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn m(&self) -> &Projector {
        &self.m
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.psi0
    }

    /// `c_a |a,O_a⟩ + c_b |b,O_b⟩`.
    pub fn final_state(&self) -> StateVector {
        let mut v = nalgebra::DVector::zeros(Self::DIM);
        v[Self::basis_index(SYS_A, APP_OA)] = self.c_a;
        v[Self::basis_index(SYS_B, APP_OB)] = self.c_b;
        StateVector::new(v).expect("unit amplitudes")
    }

    pub fn heisenberg_family(&self) -> Result<HeisenbergFamily> {
        HeisenbergFamily::new(self.hamiltonian.clone(), &self.m)
    }

    pub fn event_family(&self) -> Result<EventFamily> {
        EventFamily::unitary(self.hamiltonian.clone(), &self.m)
    }

    /// `P(t) = ⟨Ψ(t)|M Ψ(t)⟩`.
    pub fn p(&self, t: f64) -> f64 {
        let v = self.hamiltonian.spectrum().exp_skew_apply(t, self.psi0.amplitudes());
        crate::linalg::expectation_raw(self.m.as_dmatrix(), &v)
    }
}

/// Builds the measurement model for system amplitudes `(c_a, c_b)` and
/// duration `T`.
pub fn build_rovelli(period: f64, c_a: C64, c_b: C64) -> Result<RovelliModel> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidParameter(format!("measurement time must be positive, got {period}")));
    }
    let norm_sq = c_a.norm_sqr() + c_b.norm_sqr();
    if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > NORM_TOL {
        return Err(Error::BadAmplitudes { norm_sq });
    }
    let dim = RovelliModel::DIM;
    // H = (π/2T) σ_y in each (init, O) plane: e^{-iθσ_y} = [[cos θ, -sin θ], [sin θ, cos θ]]
    let w = PI / (2.0 * period);
    let mut h = nalgebra::DMatrix::<C64>::zeros(dim, dim);
    for (sys, pointer) in [(SYS_A, APP_OA), (SYS_B, APP_OB)] {
        let init = RovelliModel::basis_index(sys, APP_INIT);
        let o = RovelliModel::basis_index(sys, pointer);
        h[(init, o)] = C64::new(0.0, -w);
        h[(o, init)] = C64::new(0.0, w);
    }
    let hamiltonian = Hamiltonian::new(HermitianOperator::new(ComplexMatrix::new(h)?)?)?;
    let m = Projector::onto_basis(
        dim,
        &[RovelliModel::basis_index(SYS_A, APP_OA), RovelliModel::basis_index(SYS_B, APP_OB)],
    )?;
    let mut v = nalgebra::DVector::zeros(dim);
    v[RovelliModel::basis_index(SYS_A, APP_INIT)] = c_a;
    v[RovelliModel::basis_index(SYS_B, APP_INIT)] = c_b;
    let psi0 = StateVector::new(v)?;
    Ok(RovelliModel { period, c_a, c_b, hamiltonian, m, psi0 })
}

/// One point of a `P(t)` curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub p: f64,
}

/// `P(t)` sampled on a grid.
pub fn rovelli_p_curve(m: &RovelliModel, t_grid: &[f64]) -> Vec<CurvePoint> {
    t_grid.iter().map(|&t| CurvePoint { t, p: m.p(t) }).collect()
}

/// Decreases smaller than this are not reported as violations.
pub const MONOTONICITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    pub monotone: bool,
    /// Grid time at which `P` first dropped below its predecessor.
    pub first_violation_t: Option<f64>,
}

pub fn monotonicity_report(curve: &[CurvePoint]) -> MonotonicityReport {
    let first_violation_t = curve.windows(2).find(|w| w[1].p < w[0].p - MONOTONICITY_TOL).map(|w| w[1].t);
    MonotonicityReport { monotone: first_violation_t.is_none(), first_violation_t }
}

/// `H = (ω/2) σ_x`, `P = |1⟩⟨1|`, `ψ0 = |0⟩`; the occurrence density is
/// `sin²(ωt/2)`.
#[derive(Debug, Clone)]
pub struct RabiModel {
    omega: f64,
    hamiltonian: Hamiltonian,
    p: Projector,
    psi0: StateVector,
}

impl RabiModel {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!("Rabi frequency must be positive, got {omega}")));
        }
        let sx = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])?;
        let hamiltonian = Hamiltonian::new(HermitianOperator::new(sx)?.scaled(omega / 2.0))?;
        Ok(Self { omega, hamiltonian, p: Projector::onto_basis(2, &[1])?, psi0: StateVector::basis(2, 0)? })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `2π/ω`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn projector(&self) -> &Projector {
        &self.p
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.psi0
    }

    pub fn heisenberg_family(&self) -> Result<HeisenbergFamily> {
        HeisenbergFamily::new(self.hamiltonian.clone(), &self.p)
    }

    pub fn event_family(&self) -> Result<EventFamily> {
        EventFamily::unitary(self.hamiltonian.clone(), &self.p)
    }

    /// `sin²(ωt/2)`.
    pub fn closed_form_density(&self, t: f64) -> f64 {
        (self.omega * t / 2.0).sin().powi(2)
    }
}
