//! Conditional probability distribution for the time at which an event
//! occurs.
//!
//! The Born value `f(t) = ⟨ψ|P_t ψ⟩` of a Heisenberg family of event
//! operators is read as an unnormalized density for the occurrence time.
//! Integrating the family over an interval `Δ` gives a positive operator
//! `F_Δ`; integrating over the whole horizon gives the first-moment operator
//! `S`. Conditioning on the event happening somewhere in the horizon yields
//!
//! ```text
//! Pr(t_o ∈ Δ) = ⟨ψ|F_Δ ψ⟩ / ⟨ψ|S ψ⟩
//! ```
//!
//! and operator normalization `E_Δ = S^{-1/2} F_Δ S^{-1/2}` turns the
//! unnormalized family into a POVM on the support of `S`. The two routes agree:
//! `Tr[S^{1/2} E_Δ S^{1/2} ρ] / Tr[Sρ] = Tr[F_Δ ρ] / Tr[Sρ]`.
//!
//! On unitary finite-dimensional dynamics `f` is quasi-periodic and its
//! integral over the real line diverges, so every construction here is taken
//! over a finite [`TimeHorizon`]. In [`HorizonMode::Window`] the probabilities
//! are conditioned on occurrence within the window. In
//! [`HorizonMode::Absorptive`] the evolution is a contraction `K_t` and the
//! horizon truncates a convergent integral; the size of the neglected tail is
//! reported by [`first_moment_s`].

use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dynamics::{AbsorptiveGenerator, Evolution, Hamiltonian};
use crate::error::{Error, Result};
use crate::linalg::{
    check_dim, eigh, expectation_raw, max_abs, positive_sqrt, pseudo_inverse_sqrt, trace_product, DensityOperator,
    Effect, HermitianOperator, Projector, StateVector, C64, SUPPORT_EPS,
};
use crate::quadrature::{compensated_prefix_sums, integrate, ordered_sum, QuadratureSpec};

/// Negative eigenvalues of an accumulated `F_Δ` down to
/// `-CLAMP_TOL·max(1, ‖F‖_max)` are quadrature noise and are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-10;
/// Spectral slack allowed for the normalized effects `E_Δ`.
pub const POVM_EFFECT_TOL: f64 = 1e-10;
/// Weight of `ρ` outside the support of `S` tolerated by [`consistency_residual`].
pub const SUPPORT_LEAKAGE_TOL: f64 = 1e-6;
/// Relative widening of the window used for the tail indicator.
pub const WINDOW_WIDENING: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonMode {
    Window,
    Absorptive,
}

/// Integration range `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeHorizon {
    t_min: f64,
    t_max: f64,
    mode: HorizonMode,
}

impl TimeHorizon {
    pub fn new(t_min: f64, t_max: f64, mode: HorizonMode) -> Result<Self> {
        if !t_min.is_finite() || !t_max.is_finite() || t_min >= t_max {
            return Err(Error::BadInterval { t1: t_min, t2: t_max });
        }
        if mode == HorizonMode::Absorptive && t_min < 0.0 {
            return Err(Error::NegativeTime(t_min));
        }
        Ok(Self { t_min, t_max, mode })
    }

    pub fn window(t_min: f64, t_max: f64) -> Result<Self> {
        Self::new(t_min, t_max, HorizonMode::Window)
    }

    pub fn absorptive(t_max: f64) -> Result<Self> {
        Self::new(0.0, t_max, HorizonMode::Absorptive)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn mode(&self) -> HorizonMode {
        self.mode
    }

    pub fn length(&self) -> f64 {
        self.t_max - self.t_min
    }
}

/// Disjoint intervals `[b_k, b_{k+1}]` covering a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    breakpoints: Vec<f64>,
}

impl Partition {
    pub fn uniform(horizon: &TimeHorizon, pieces: usize) -> Result<Self> {
        if pieces == 0 {
            return Err(Error::InvalidParameter("partition needs at least one interval".into()));
        }
        let breakpoints = (0..=pieces)
            .map(|k| {
                if k == pieces {
                    horizon.t_max
                } else {
                    horizon.t_min + horizon.length() * (k as f64 / pieces as f64)
                }
            })
            .collect();
        Ok(Self { breakpoints })
    }

    /// Breakpoints must be strictly increasing and start and end on the horizon.
    pub fn from_breakpoints(horizon: &TimeHorizon, breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidParameter("partition needs at least two breakpoints".into()));
        }
        if breakpoints[0] != horizon.t_min || *breakpoints.last().unwrap() != horizon.t_max {
            return Err(Error::InvalidParameter("partition must cover the horizon exactly".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("partition breakpoints must increase".into()));
        }
        Ok(Self { breakpoints })
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

/// The family `t ↦ P_t = X_t† P X_t` where `X_t` is `U_t` or `K_t`.
#[derive(Debug, Clone)]
pub struct EventFamily {
    evolution: Evolution,
    event: Effect,
}

impl EventFamily {
    pub fn new(evolution: Evolution, event: impl Into<Effect>) -> Result<Self> {
        let event = event.into();
        check_dim(evolution.dim(), event.dim())?;
        Ok(Self { evolution, event })
    }

    pub fn unitary(hamiltonian: Hamiltonian, event: impl Into<Effect>) -> Result<Self> {
        Self::new(Evolution::unitary(hamiltonian), event)
    }

    pub fn absorptive(generator: AbsorptiveGenerator, event: impl Into<Effect>) -> Result<Self> {
        Self::new(Evolution::Absorptive(generator), event)
    }

    pub fn evolution(&self) -> &Evolution {
        &self.evolution
    }

    pub fn event(&self) -> &Effect {
        &self.event
    }

    pub fn dim(&self) -> usize {
        self.event.dim()
    }

    /// `P_t` as a raw matrix.
    pub fn operator_at(&self, t: f64) -> Result<DMatrix<C64>> {
        Ok(HermitianOperator::hermitize(self.evolution.conjugate(self.event.as_dmatrix(), t)?).into_matrix().into_dmatrix())
    }

    /// `f(t) = ⟨ψ|P_t ψ⟩`.
    pub fn density(&self, psi: &StateVector, t: f64) -> Result<f64> {
        check_dim(self.dim(), psi.dim())?;
        let v = match &self.evolution {
            Evolution::Unitary(f) => f.hamiltonian().spectrum().exp_skew_apply(t, psi.amplitudes()),
            Evolution::Absorptive(g) => g.propagate(psi, t)?,
        };
        Ok(expectation_raw(self.event.as_dmatrix(), &v))
    }
}

/// `f(t) = ⟨ψ|P_t ψ⟩`.
pub fn density(family: &EventFamily, psi: &StateVector, t: f64) -> Result<f64> {
    family.density(psi, t)
}

/// A sample of the unnormalized occurrence density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySample {
    pub t: f64,
    pub value: f64,
}

pub fn density_samples(family: &EventFamily, psi: &StateVector, times: &[f64]) -> Result<Vec<DensitySample>> {
    times
        .par_iter()
        .map(|&t| Ok(DensitySample { t, value: family.density(psi, t)? }))
        .collect()
}

/// `F_Δ` together with its quadrature diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalOperator {
    pub t1: f64,
    pub t2: f64,
    pub operator: HermitianOperator,
    pub error_estimate: f64,
    pub evals: usize,
    pub panels: usize,
}

/// `F_{[t1,t2]} = ∫_{t1}^{t2} P_t dt`, entrywise, clamped to be positive.
pub fn accumulate_f(family: &EventFamily, t1: f64, t2: f64, spec: &QuadratureSpec) -> Result<IntervalOperator> {
    if t2 < t1 {
        return Err(Error::BadInterval { t1, t2 });
    }
    if family.evolution.is_absorptive() && t1 < 0.0 {
        return Err(Error::NegativeTime(t1));
    }
    let integrand = |t: f64| family.operator_at(t);
    let result = integrate(&integrand, t1, t2, family.dim(), spec)?;
    let operator = clamp_positive(HermitianOperator::hermitize(result.value))?;
    Ok(IntervalOperator {
        t1,
        t2,
        operator,
        error_estimate: result.error_estimate,
        evals: result.evals,
        panels: result.panels,
    })
}

fn clamp_positive(op: HermitianOperator) -> Result<HermitianOperator> {
    let eig = eigh(&op)?;
    let min = eig.values[0];
    if min >= 0.0 {
        return Ok(op);
    }
    if min < -CLAMP_TOL * op.max_abs().max(1.0) {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    Ok(eig.map_real(|l| l.max(0.0)))
}

/// Diagnostics of the first-moment computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDiagnostics {
    /// Window mode: `‖S_wide − S‖_max / ‖S‖_max` with the horizon widened by
    /// 25%. Absorptive mode: `‖K_{t_max} Π‖₂` with `Π` the support of `S`, the
    /// largest amplitude that can still produce the event after the horizon.
    /// States outside the support never meet the event and are left out.
    pub tail_indicator: f64,
    pub error_estimate: f64,
    pub evals: usize,
}

/// `S = F` over the whole horizon.
pub fn first_moment_s(
    family: &EventFamily,
    horizon: &TimeHorizon,
    spec: &QuadratureSpec,
) -> Result<(HermitianOperator, MomentDiagnostics)> {
    let s = accumulate_f(family, horizon.t_min, horizon.t_max, spec)?;
    let tail_indicator = match (horizon.mode, &family.evolution) {
        (HorizonMode::Window, _) => {
            let wide_end = horizon.t_max + WINDOW_WIDENING * horizon.length();
            let extra = accumulate_f(family, horizon.t_max, wide_end, spec)?;
            max_abs(extra.operator.as_dmatrix()) / s.operator.max_abs().max(f64::MIN_POSITIVE)
        }
        (HorizonMode::Absorptive, Evolution::Absorptive(g)) => {
            let support = pseudo_inverse_sqrt(&s.operator, SUPPORT_EPS)?.support;
            let kp = g.propagator(horizon.t_max)?.as_dmatrix() * support.as_dmatrix();
            let gram = HermitianOperator::hermitize(kp.adjoint() * kp);
            eigh(&gram)?.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
        }
        (HorizonMode::Absorptive, Evolution::Unitary(_)) => {
            return Err(Error::InvalidParameter("absorptive horizon requires an absorptive generator".into()))
        }
    };
    let diagnostics = MomentDiagnostics { tail_indicator, error_estimate: s.error_estimate, evals: s.evals };
    Ok((s.operator, diagnostics))
}

fn outcome_threshold(s: &HermitianOperator) -> Result<f64> {
    let lambda_max = eigh(s)?.values.last().copied().unwrap_or(0.0);
    Ok(SUPPORT_EPS * lambda_max.max(0.0))
}

/// `⟨ψ|Sψ⟩`, the normalization denominator (its reciprocal is the rate `μ`).
pub fn mean_occurrence(psi: &StateVector, s: &HermitianOperator) -> Result<f64> {
    let value = s.expectation(psi)?;
    if value <= outcome_threshold(s)? || value <= 0.0 {
        return Err(Error::NoOutcome { expectation: value });
    }
    Ok(value)
}

/// `⟨ψ|F_Δψ⟩ / ⟨ψ|Sψ⟩`.
pub fn occurrence_probability(psi: &StateVector, f: &HermitianOperator, s: &HermitianOperator) -> Result<f64> {
    let denominator = mean_occurrence(psi, s)?;
    Ok(f.expectation(psi)? / denominator)
}

/// `E_Δ = S^{-1/2} F_Δ S^{-1/2}` on the support of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPovm {
    pub effects: Vec<Effect>,
    pub inv_sqrt: HermitianOperator,
    pub support: Projector,
    pub rank: usize,
}

pub fn normalized_povm(f_ops: &[HermitianOperator], s: &HermitianOperator, eps: f64) -> Result<NormalizedPovm> {
    let pinv = pseudo_inverse_sqrt(s, eps)?;
    let w = pinv.inv_sqrt.as_dmatrix();
    let effects = f_ops
        .iter()
        .map(|f| {
            check_dim(s.dim(), f.dim())?;
            Effect::with_tolerance(HermitianOperator::hermitize(w * f.as_dmatrix() * w), POVM_EFFECT_TOL)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizedPovm { effects, inv_sqrt: pinv.inv_sqrt, support: pinv.support, rank: pinv.rank })
}

/// A horizon, a partition of it, and every operator built from them.
#[derive(Debug, Clone)]
pub struct OccurrenceDistribution {
    horizon: TimeHorizon,
    partition: Partition,
    f_ops: Vec<IntervalOperator>,
    s: HermitianOperator,
    s_sqrt: HermitianOperator,
    povm: NormalizedPovm,
}

impl OccurrenceDistribution {
    /// Accumulates `F_Δ` for every interval, takes `S` as their ordered sum
    /// (so `Σ E_Δ` reproduces the support projector up to round-off), and
    /// normalizes with support threshold `eps` relative to `λ_max(S)`.
    pub fn build(
        family: &EventFamily,
        horizon: TimeHorizon,
        partition: Partition,
        spec: &QuadratureSpec,
        eps: f64,
    ) -> Result<Self> {
        if horizon.mode == HorizonMode::Absorptive && !family.evolution.is_absorptive() {
            return Err(Error::InvalidParameter("absorptive horizon requires an absorptive generator".into()));
        }
        let first = partition.breakpoints[0];
        let last = *partition.breakpoints.last().expect("nonempty partition");
        if first != horizon.t_min || last != horizon.t_max {
            return Err(Error::InvalidParameter("partition does not cover the horizon".into()));
        }
        let intervals: Vec<(f64, f64)> = partition.intervals().collect();
        let f_ops = intervals
            .par_iter()
            .map(|&(a, b)| accumulate_f(family, a, b, spec))
            .collect::<Result<Vec<_>>>()?;
        let s = HermitianOperator::hermitize(ordered_sum(family.dim(), f_ops.iter().map(|f| f.operator.as_dmatrix())));
        let raw: Vec<HermitianOperator> = f_ops.iter().map(|f| f.operator.clone()).collect();
        let povm = normalized_povm(&raw, &s, eps)?;
        let s_sqrt = positive_sqrt(&s, CLAMP_TOL * s.max_abs().max(1.0))?;
        Ok(Self { horizon, partition, f_ops, s, s_sqrt, povm })
    }

    pub fn horizon(&self) -> &TimeHorizon {
        &self.horizon
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn interval_operators(&self) -> &[IntervalOperator] {
        &self.f_ops
    }

    pub fn f(&self, k: usize) -> &HermitianOperator {
        &self.f_ops[k].operator
    }

    pub fn s(&self) -> &HermitianOperator {
        &self.s
    }

    pub fn s_sqrt(&self) -> &HermitianOperator {
        &self.s_sqrt
    }

    pub fn s_inv_sqrt(&self) -> &HermitianOperator {
        &self.povm.inv_sqrt
    }

    pub fn support(&self) -> &Projector {
        &self.povm.support
    }

    pub fn effects(&self) -> &[Effect] {
        &self.povm.effects
    }

    pub fn len(&self) -> usize {
        self.f_ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_ops.is_empty()
    }

    /// Total quadrature evaluations spent on the interval operators.
    pub fn evals(&self) -> usize {
        self.f_ops.iter().map(|f| f.evals).sum()
    }

    /// `F_Δ` for a union of consecutive partition intervals.
    pub fn f_union(&self, range: Range<usize>) -> Result<DMatrix<C64>> {
        self.check_range(&range)?;
        Ok(ordered_sum(self.s.dim(), self.f_ops[range].iter().map(|f| f.operator.as_dmatrix())))
    }

    /// `E_Δ` for a union of consecutive partition intervals.
    pub fn effect_union(&self, range: Range<usize>) -> Result<DMatrix<C64>> {
        self.check_range(&range)?;
        Ok(ordered_sum(self.s.dim(), self.povm.effects[range].iter().map(|e| e.as_dmatrix())))
    }

    fn check_range(&self, range: &Range<usize>) -> Result<()> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::InvalidParameter(format!(
                "interval range {range:?} outside partition of {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// `Pr(t_o ∈ Δ_k)` for every interval of the partition.
    pub fn probabilities(&self, psi: &StateVector) -> Result<Vec<f64>> {
        let denominator = mean_occurrence(psi, &self.s)?;
        self.f_ops
            .iter()
            .map(|f| Ok(f.operator.expectation(psi)? / denominator))
            .collect()
    }

    /// Mixed-state form: `Tr[F_Δ ρ] / Tr[Sρ]` for every interval.
    pub fn probabilities_mixed(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        let denominator = self.s.trace_with(rho)?;
        if denominator <= outcome_threshold(&self.s)? || denominator <= 0.0 {
            return Err(Error::NoOutcome { expectation: denominator });
        }
        self.f_ops
            .iter()
            .map(|f| Ok(f.operator.trace_with(rho)? / denominator))
            .collect()
    }

    /// `Σ_Δ E_Δ − support`, entrywise max.
    pub fn normalization_defect(&self) -> f64 {
        let total = ordered_sum(self.s.dim(), self.povm.effects.iter().map(|e| e.as_dmatrix()));
        self.povm.support.max_abs_diff(&total)
    }
}

/// `|Tr[S^{1/2} E_Δ S^{1/2} ρ] − Tr[F_Δ ρ]| / Tr[Sρ]` for `Δ` the union of the
/// partition intervals in `range`.
pub fn consistency_residual(rho: &DensityOperator, dist: &OccurrenceDistribution, range: Range<usize>) -> Result<f64> {
    check_dim(dist.s.dim(), rho.dim())?;
    let denominator = dist.s.trace_with(rho)?;
    if denominator <= outcome_threshold(&dist.s)? || denominator <= 0.0 {
        return Err(Error::NoOutcome { expectation: denominator });
    }
    let outside = dist.support().complement();
    let leak = outside.as_dmatrix() * rho.as_dmatrix() * outside.as_dmatrix();
    let leakage = max_abs(&leak);
    if leakage > SUPPORT_LEAKAGE_TOL {
        return Err(Error::SupportLeakage { leakage });
    }
    let e = dist.effect_union(range.clone())?;
    let f = dist.f_union(range)?;
    let root = dist.s_sqrt.as_dmatrix();
    let lifted = root * e * root;
    let via_effects = trace_product(&lifted, rho.as_dmatrix()).re / denominator;
    let via_f = trace_product(&f, rho.as_dmatrix()).re / denominator;
    Ok((via_effects - via_f).abs())
}

/// One row of a tabulated occurrence distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfRow {
    pub t: f64,
    /// Normalized density `f(t) / ⟨ψ|Sψ⟩`.
    pub density: f64,
    /// `Pr(t_min ≤ t_o < t)`.
    pub cdf: f64,
}

/// Density and cumulative distribution on `n_points` equally spaced times
/// spanning the horizon.
pub fn cdf_table(
    family: &EventFamily,
    psi: &StateVector,
    horizon: &TimeHorizon,
    n_points: usize,
    spec: &QuadratureSpec,
) -> Result<Vec<CdfRow>> {
    check_dim(family.dim(), psi.dim())?;
    if n_points < 2 {
        return Err(Error::InvalidParameter("cdf table needs at least two points".into()));
    }
    let grid = Partition::uniform(horizon, n_points - 1)?;
    let times = grid.breakpoints().to_vec();
    let scalar = |t: f64| -> Result<DMatrix<C64>> {
        Ok(DMatrix::from_element(1, 1, C64::new(family.density(psi, t)?, 0.0)))
    };
    let pieces = grid
        .intervals()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(a, b)| Ok(integrate(&scalar, a, b, 1, spec)?.value[(0, 0)].re.max(0.0)))
        .collect::<Result<Vec<f64>>>()?;
    let mut cumulative = vec![0.0];
    cumulative.extend(compensated_prefix_sums(pieces.iter().copied()));
    let total = *cumulative.last().expect("at least two points");
    if total <= 0.0 {
        return Err(Error::NoOutcome { expectation: total });
    }
    let densities = density_samples(family, psi, &times)?;
    Ok(times
        .iter()
        .zip(densities)
        .zip(cumulative)
        .map(|((&t, d), c)| CdfRow { t, density: d.value / total, cdf: c / total })
        .collect())
}
