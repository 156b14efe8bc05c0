//! Conditioning on projective and unsharp events, and joint probabilities of
//! repeated projective measurements of a Heisenberg family `M_t`.

use nalgebra::DVector;

use crate::dynamics::HeisenbergFamily;
use crate::error::{Error, Result};
use crate::linalg::{
    check_dim, positive_sqrt, trace_product, DensityOperator, Effect, HermitianOperator, Projector, StateVector,
    C64, EFFECT_TOL,
};

/// Conditioning denominators at or below this value raise
/// [`Error::ZeroCondition`].
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Result of a projective measurement: outcome 1 is the range of `M`,
/// outcome 0 the range of `I − M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Zero,
    One,
}

impl Outcome {
    pub fn as_u8(self) -> u8 {
        match self {
            Outcome::Zero => 0,
            Outcome::One => 1,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Outcome::Zero),
            1 => Ok(Outcome::One),
            other => Err(Error::InvalidParameter(format!("outcome must be 0 or 1, got {other}"))),
        }
    }
}

/// Measurement times (strictly increasing) paired with outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeString {
    times: Vec<f64>,
    outcomes: Vec<Outcome>,
}

impl OutcomeString {
    pub fn new(times: Vec<f64>, outcomes: Vec<Outcome>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter("outcome string is empty".into()));
        }
        if times.len() != outcomes.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times but {} outcomes",
                times.len(),
                outcomes.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite);
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("measurement times must be strictly increasing".into()));
        }
        Ok(Self { times, outcomes })
    }

    /// Convenience constructor from `0`/`1` digits.
    pub fn from_bits(times: &[f64], bits: &[u8]) -> Result<Self> {
        let outcomes = bits.iter().map(|&b| Outcome::from_u8(b)).collect::<Result<Vec<_>>>()?;
        Self::new(times.to_vec(), outcomes)
    }

    /// Every one of the `2ⁿ` strings at the given times, in binary order.
    pub fn enumerate(times: &[f64]) -> Result<Vec<OutcomeString>> {
        let n = times.len();
        if n > 20 {
            return Err(Error::InvalidParameter(format!("refusing to enumerate 2^{n} strings")));
        }
        (0..1u32 << n)
            .map(|mask| {
                let outcomes = (0..n)
                    .map(|k| if mask >> (n - 1 - k) & 1 == 1 { Outcome::One } else { Outcome::Zero })
                    .collect();
                Self::new(times.to_vec(), outcomes)
            })
            .collect()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Outcome)> + '_ {
        self.times.iter().copied().zip(self.outcomes.iter().copied())
    }
}

/// One Lüders conditioning step.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    /// Probability of the conditioning outcome, clamped to `[0, 1]`.
    pub probability: f64,
    /// Updated state; `None` when the outcome had (numerically) zero probability.
    pub post_state: Option<DensityOperator>,
    /// Raw `Tr[Fρ]` before clamping.
    pub trace_of_condition: f64,
}

fn condition_weight(rho: &DensityOperator, f: &HermitianOperator) -> Result<f64> {
    let w = f.trace_with(rho)?;
    if w <= DEGENERACY_THRESHOLD {
        return Err(Error::ZeroCondition { probability: w });
    }
    Ok(w)
}

/// `Pr(E|F) = Tr[FEFρ] / Tr[Fρ]`.
pub fn luders_conditional(rho: &DensityOperator, e: &Projector, f: &Projector) -> Result<f64> {
    check_dim(rho.dim(), e.dim())?;
    let w = condition_weight(rho, f)?;
    let fef = f.as_dmatrix() * e.as_dmatrix() * f.as_dmatrix();
    Ok(trace_product(&fef, rho.as_dmatrix()).re / w)
}

/// `ρ ↦ FρF / Tr[Fρ]`.
pub fn luders_update(rho: &DensityOperator, f: &Projector) -> Result<DensityOperator> {
    let w = condition_weight(rho, f)?;
    let frf = f.as_dmatrix() * rho.as_dmatrix() * f.as_dmatrix() / C64::new(w, 0.0);
    Ok(DensityOperator::new_unchecked(HermitianOperator::hermitize(frf)))
}

/// Measure projector `f` and record the outcome probability and post-state.
pub fn luders_measure(rho: &DensityOperator, f: &Projector) -> Result<MeasurementRecord> {
    let raw = f.trace_with(rho)?;
    let post_state = if raw > DEGENERACY_THRESHOLD { Some(luders_update(rho, f)?) } else { None };
    Ok(MeasurementRecord { probability: raw.clamp(0.0, 1.0), post_state, trace_of_condition: raw })
}

// A projector is its own square root; skipping the decomposition keeps the
// reduction to the projective rule exact.
fn effect_root(a: &Effect) -> Result<HermitianOperator> {
    if a.is_projector() {
        Ok(a.operator().clone())
    } else {
        positive_sqrt(a, EFFECT_TOL)
    }
}

/// `ρ ↦ A^{1/2} ρ A^{1/2} / Tr[Aρ]` for an effect `A`.
pub fn luders_operation(rho: &DensityOperator, a: &Effect) -> Result<DensityOperator> {
    let w = condition_weight(rho, a)?;
    let root = effect_root(a)?;
    let out = root.as_dmatrix() * rho.as_dmatrix() * root.as_dmatrix() / C64::new(w, 0.0);
    Ok(DensityOperator::new_unchecked(HermitianOperator::hermitize(out)))
}

/// `W(B|A) = Tr[A^{1/2} B A^{1/2} ρ] / Tr[Aρ]`: the expectation of `B` after
/// the Lüders operation for `A`. For `B = A` this is `Tr[A²ρ]/Tr[Aρ]`, which
/// equals one only when `A` is a projector.
pub fn naive_conditional_w(rho: &DensityOperator, b: &Effect, a: &Effect) -> Result<f64> {
    check_dim(rho.dim(), b.dim())?;
    let w = condition_weight(rho, a)?;
    let root = effect_root(a)?;
    let sandwich = root.as_dmatrix() * b.as_dmatrix() * root.as_dmatrix();
    Ok(trace_product(&sandwich, rho.as_dmatrix()).re / w)
}

/// Joint probability of an outcome string and the state it leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    pub probability: f64,
    /// Normalized post-measurement state; `None` if the string has zero probability.
    pub final_state: Option<StateVector>,
    /// Joint probability of the first `k + 1` outcomes, for each `k`.
    pub cumulative: Vec<f64>,
}

/// Chained Lüders transitions with `M_t` for outcome 1 and `I − M_t` for
/// outcome 0. The vector is carried unnormalized; its squared norm after the
/// last step is the joint probability.
pub fn sequence_probability(
    family: &HeisenbergFamily,
    initial: &StateVector,
    string: &OutcomeString,
) -> Result<SequenceResult> {
    check_dim(family.dim(), initial.dim())?;
    if !family.seed_is_projector() {
        return Err(Error::NotProjector { deviation: family.seed().idempotency_defect() });
    }
    let spectrum = family.hamiltonian().spectrum();
    let m = family.seed().as_dmatrix();
    let mut v: DVector<C64> = initial.amplitudes().clone();
    let mut cumulative = Vec::with_capacity(string.len());
    for (t, outcome) in string.iter() {
        // M_t v = U_t† M U_t v
        let projected = spectrum.exp_skew_apply(-t, &(m * spectrum.exp_skew_apply(t, &v)));
        v = match outcome {
            Outcome::One => projected,
            Outcome::Zero => v - projected,
        };
        let weight = v.norm_squared();
        if weight <= DEGENERACY_THRESHOLD {
            cumulative.resize(string.len(), 0.0);
            return Ok(SequenceResult { probability: 0.0, final_state: None, cumulative });
        }
        cumulative.push(weight);
    }
    let probability = v.norm_squared();
    let final_state = StateVector::new(v)?;
    Ok(SequenceResult { probability, final_state: Some(final_state), cumulative })
}

/// Density-operator form of [`sequence_probability`], for mixed initial states.
pub fn sequence_probability_mixed(
    family: &HeisenbergFamily,
    initial: &DensityOperator,
    string: &OutcomeString,
) -> Result<(f64, Option<DensityOperator>)> {
    check_dim(family.dim(), initial.dim())?;
    let mut rho = initial.as_dmatrix().clone();
    for (t, outcome) in string.iter() {
        let mt = family.projector_at(t)?;
        let f = match outcome {
            Outcome::One => mt,
            Outcome::Zero => mt.complement(),
        };
        rho = f.as_dmatrix() * rho * f.as_dmatrix();
        if rho.trace().re <= DEGENERACY_THRESHOLD {
            return Ok((0.0, None));
        }
    }
    let p = rho.trace().re;
    let post = DensityOperator::new_unchecked(HermitianOperator::hermitize(rho / C64::new(p, 0.0)));
    Ok((p, Some(post)))
}

/// Probability that `M = 1` at `t` given `M = 1` at `t0`:
/// `⟨Ψ|M_{t0} M_t M_{t0} Ψ⟩ / ⟨Ψ|M_{t0} Ψ⟩`.
pub fn repeat_agreement(family: &HeisenbergFamily, psi: &StateVector, t0: f64, t: f64) -> Result<f64> {
    check_dim(family.dim(), psi.dim())?;
    if t <= t0 {
        return Err(Error::BadInterval { t1: t0, t2: t });
    }
    let m0 = family.projector_at(t0)?;
    let mt = family.projector_at(t)?;
    let v = m0.as_dmatrix() * psi.amplitudes();
    let w = v.norm_squared();
    if w <= DEGENERACY_THRESHOLD {
        return Err(Error::ZeroCondition { probability: w });
    }
    Ok(v.dotc(&(mt.as_dmatrix() * &v)).re / w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Hamiltonian;
    use crate::linalg::ComplexMatrix;

    fn plus() -> StateVector {
        StateVector::from_real(&[1.0, 1.0]).unwrap()
    }

    fn ket(k: usize) -> StateVector {
        StateVector::basis(2, k).unwrap()
    }

    #[test]
    fn conditional_examples() {
        let rho = plus().to_density();
        let f = Projector::onto_state(&ket(0));
        assert!((luders_conditional(&rho, &f, &f).unwrap() - 1.0).abs() < 1e-15);
        let e = Projector::onto_state(&ket(1));
        assert!(luders_conditional(&rho, &e, &f).unwrap().abs() < 1e-15);
        let e = Projector::onto_state(&plus());
        assert!((luders_conditional(&rho, &e, &f).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conditional_zero_condition() {
        let rho = ket(0).to_density();
        let f = Projector::onto_state(&ket(1));
        assert!(matches!(luders_conditional(&rho, &f, &f), Err(Error::ZeroCondition { .. })));
        assert!(matches!(luders_update(&rho, &f), Err(Error::ZeroCondition { .. })));
    }

    #[test]
    fn update_examples() {
        let p0 = Projector::onto_state(&ket(0));
        let rho = ket(0).to_density();
        assert!(luders_update(&rho, &p0).unwrap().max_abs_diff(rho.as_dmatrix()) < 1e-15);
        let mixed = DensityOperator::maximally_mixed(2);
        assert!(luders_update(&mixed, &p0).unwrap().max_abs_diff(p0.as_dmatrix()) < 1e-15);
        let rho = plus().to_density();
        assert!(luders_update(&rho, &p0).unwrap().max_abs_diff(p0.as_dmatrix()) < 1e-15);
    }

    #[test]
    fn measure_records_zero_probability_outcome() {
        let rho = ket(0).to_density();
        let rec = luders_measure(&rho, &Projector::onto_state(&ket(1))).unwrap();
        assert_eq!(rec.probability, 0.0);
        assert!(rec.post_state.is_none());
    }

    #[test]
    fn operation_examples() {
        let rho = plus().to_density();
        let p = Projector::onto_state(&ket(0));
        let a = luders_operation(&rho, &p.to_effect()).unwrap();
        let b = luders_update(&rho, &p).unwrap();
        assert!(a.max_abs_diff(b.as_dmatrix()) < 1e-12);

        let scalar = Effect::scaled_identity(2, 0.3).unwrap();
        assert!(luders_operation(&rho, &scalar).unwrap().max_abs_diff(rho.as_dmatrix()) < 1e-14);

        let a = Effect::new(HermitianOperator::from_real_diagonal(&[0.5, 0.25])).unwrap();
        let out = luders_operation(&DensityOperator::maximally_mixed(2), &a).unwrap();
        let expected = HermitianOperator::from_real_diagonal(&[2.0 / 3.0, 1.0 / 3.0]);
        assert!(out.max_abs_diff(expected.as_dmatrix()) < 1e-14);
    }

    #[test]
    fn naive_w_examples() {
        let rho = DensityOperator::maximally_mixed(2);
        let p = Projector::onto_state(&ket(0)).to_effect();
        assert!((naive_conditional_w(&rho, &p, &p).unwrap() - 1.0).abs() < 1e-14);
        let half = Effect::scaled_identity(2, 0.5).unwrap();
        assert!((naive_conditional_w(&rho, &half, &half).unwrap() - 0.5).abs() < 1e-12);
        let id = Effect::scaled_identity(2, 1.0).unwrap();
        let a = Effect::new(HermitianOperator::from_real_diagonal(&[0.9, 0.2])).unwrap();
        assert!((naive_conditional_w(&plus().to_density(), &id, &a).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn outcome_string_validation() {
        assert!(OutcomeString::from_bits(&[1.0, 1.0], &[0, 1]).is_err());
        assert!(OutcomeString::from_bits(&[1.0, 2.0], &[0]).is_err());
        assert!(OutcomeString::from_bits(&[], &[]).is_err());
        assert!(OutcomeString::from_bits(&[0.0], &[2]).is_err());
        let all = OutcomeString::enumerate(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(all.len(), 8);
        assert_eq!(all[3].outcomes(), &[Outcome::Zero, Outcome::One, Outcome::One]);
    }

    #[test]
    fn sequence_trivial_cases() {
        let sx = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let h = Hamiltonian::new(HermitianOperator::new(sx).unwrap()).unwrap();
        let m = Projector::onto_basis(2, &[1]).unwrap();
        let fam = HeisenbergFamily::new(h, m).unwrap();
        let t = 0.4;
        // an M_t eigenstate with eigenvalue 1
        let eigen = fam.propagators().propagate(&ket(1), -t).unwrap();
        let s = OutcomeString::from_bits(&[t], &[1]).unwrap();
        let r = sequence_probability(&fam, &eigen, &s).unwrap();
        assert!((r.probability - 1.0).abs() < 1e-12);

        let s = OutcomeString::from_bits(&[0.0], &[0]).unwrap();
        let r = sequence_probability(&fam, &ket(1), &s).unwrap();
        assert_eq!(r.probability, 0.0);
        assert!(r.final_state.is_none());
    }

    #[test]
    fn repeat_agreement_commuting_is_one() {
        let h = Hamiltonian::new(HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.5])).unwrap();
        let m = Projector::onto_basis(3, &[1, 2]).unwrap();
        let fam = HeisenbergFamily::new(h, m).unwrap();
        let psi = StateVector::from_real(&[1.0, 1.0, 1.0]).unwrap();
        for &t in &[0.5, 2.0, 17.0] {
            assert!((repeat_agreement(&fam, &psi, 0.1, t).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(repeat_agreement(&fam, &psi, 1.0, 1.0), Err(Error::BadInterval { .. })));
    }
}
