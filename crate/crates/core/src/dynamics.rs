//! Hamiltonians, propagators and Heisenberg-picture operator families.
//!
//! Units: ħ = 1, so a Hamiltonian is an angular frequency and `U_t = e^{-iHt}`.

use std::collections::HashMap;
use std::sync::RwLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    check_dim, eigh, max_abs, ComplexMatrix, Effect, Eigh, HermitianOperator, Projector, StateVector, C64,
};

/// Largest Hilbert-space dimension a [`Hamiltonian`] accepts.
pub const MAX_HILBERT_DIM: usize = 64;

const PROPAGATOR_CACHE_CAP: usize = 8192;

/// A time-independent Hamiltonian with its eigendecomposition cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    operator: HermitianOperator,
    spectrum: Eigh,
}

impl Hamiltonian {
    pub fn new(operator: HermitianOperator) -> Result<Self> {
        if operator.dim() > MAX_HILBERT_DIM {
            return Err(Error::DimensionOverflow { dim: operator.dim(), max: MAX_HILBERT_DIM });
        }
        let spectrum = eigh(&operator)?;
        Ok(Self { operator, spectrum })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(HermitianOperator::zeros(dim))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }

    pub fn spectrum(&self) -> &Eigh {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// `e^{-iHt}`, computed from the cached spectrum.
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        self.spectrum.exp_skew(t)
    }

    /// `‖[H, A]‖_max`.
    pub fn commutator_norm(&self, a: &DMatrix<C64>) -> f64 {
        let h = self.operator.as_dmatrix();
        max_abs(&(h * a - a * h))
    }
}

/// The one-parameter unitary group `t ↦ U_t` generated by a Hamiltonian.
///
/// Propagators are memoized by the bit pattern of `t`; quadrature and
/// partition boundaries query the same instants repeatedly. The cache never
/// changes a returned value.
#[derive(Debug)]
pub struct PropagatorFamily {
    hamiltonian: Hamiltonian,
    cache: RwLock<HashMap<u64, ComplexMatrix>>,
}

impl Clone for PropagatorFamily {
    fn clone(&self) -> Self {
        Self::new(self.hamiltonian.clone())
    }
}

impl PropagatorFamily {
    pub fn new(hamiltonian: Hamiltonian) -> Self {
        Self { hamiltonian, cache: RwLock::new(HashMap::new()) }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// `U_t`.
    pub fn at(&self, t: f64) -> ComplexMatrix {
        let key = t.to_bits();
        if let Some(u) = self.cache.read().expect("propagator cache poisoned").get(&key) {
            return u.clone();
        }
        let u = self.hamiltonian.propagator(t);
        let mut cache = self.cache.write().expect("propagator cache poisoned");
        if cache.len() < PROPAGATOR_CACHE_CAP {
            cache.insert(key, u.clone());
        }
        u
    }

    /// `U_t ψ`.
    pub fn propagate(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        check_dim(self.dim(), psi.dim())?;
        let v = self.hamiltonian.spectrum.exp_skew_apply(t, psi.amplitudes());
        Ok(StateVector::from_normalized_unchecked(v))
    }

    /// `U_t† A U_t` for a raw matrix.
    pub fn conjugate(&self, a: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
        if t == 0.0 {
            return a.clone();
        }
        let u = self.at(t);
        u.adjoint() * a * u.as_dmatrix()
    }
}

/// `t ↦ P_t = U_t† P U_t` for a fixed seed effect `P`.
#[derive(Debug, Clone)]
pub struct HeisenbergFamily {
    propagators: PropagatorFamily,
    seed: Effect,
    seed_is_projector: bool,
}

impl HeisenbergFamily {
    pub fn new(hamiltonian: Hamiltonian, seed: impl Into<Effect>) -> Result<Self> {
        let seed = seed.into();
        check_dim(hamiltonian.dim(), seed.dim())?;
        let seed_is_projector = seed.is_projector();
        Ok(Self { propagators: PropagatorFamily::new(hamiltonian), seed, seed_is_projector })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        self.propagators.hamiltonian()
    }

    pub fn propagators(&self) -> &PropagatorFamily {
        &self.propagators
    }

    pub fn seed(&self) -> &Effect {
        &self.seed
    }

    pub fn seed_is_projector(&self) -> bool {
        self.seed_is_projector
    }

    pub fn dim(&self) -> usize {
        self.seed.dim()
    }

    /// `P_t`. Unitary similarity keeps the seed's spectrum, so the result is
    /// an effect (a projector when the seed is one).
    pub fn at(&self, t: f64) -> Effect {
        Effect::new_unchecked(HermitianOperator::hermitize(self.raw_at(t)))
    }

    /// `P_t` as a projector; fails when the seed is not one.
    pub fn projector_at(&self, t: f64) -> Result<Projector> {
        if !self.seed_is_projector {
            return Err(Error::NotProjector { deviation: self.seed.idempotency_defect() });
        }
        Ok(Projector::new_unchecked(HermitianOperator::hermitize(self.raw_at(t))))
    }

    pub(crate) fn raw_at(&self, t: f64) -> DMatrix<C64> {
        self.propagators.conjugate(self.seed.as_dmatrix(), t)
    }
}

/// Weak-coupling detector surrogate: the contraction semigroup
/// `K_t = exp(-i(H - iΓ/2)t)` for `t ≥ 0`.
#[derive(Debug, Clone)]
pub struct AbsorptiveGenerator {
    hamiltonian: Hamiltonian,
    decay: HermitianOperator,
    // -iH - Γ/2
    generator: DMatrix<C64>,
    closed: bool,
}

impl AbsorptiveGenerator {
    pub fn new(hamiltonian: Hamiltonian, decay: HermitianOperator) -> Result<Self> {
        check_dim(hamiltonian.dim(), decay.dim())?;
        let spectrum = eigh(&decay)?;
        let min = spectrum.values[0];
        if min < -1e-12 * decay.max_abs().max(1.0) {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        let generator = hamiltonian.operator().as_dmatrix() * C64::new(0.0, -1.0)
            - decay.as_dmatrix() * C64::new(0.5, 0.0);
        let closed = decay.max_abs() == 0.0;
        Ok(Self { hamiltonian, decay, generator, closed })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn decay(&self) -> &HermitianOperator {
        &self.decay
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// `K_t`. With `Γ = 0` this is the unitary propagator from the cached
    /// spectrum; otherwise scaling-and-squaring Padé on the non-normal
    /// generator.
    pub fn propagator(&self, t: f64) -> Result<ComplexMatrix> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 {
            return Ok(ComplexMatrix::identity(self.dim()));
        }
        if self.closed {
            return Ok(self.hamiltonian.propagator(t));
        }
        let k = (&self.generator * C64::new(t, 0.0)).exp();
        ComplexMatrix::new(k)
    }

    /// `K_t ψ`, left unnormalized: its squared norm is the survival probability.
    pub fn propagate(&self, psi: &StateVector, t: f64) -> Result<DVector<C64>> {
        check_dim(self.dim(), psi.dim())?;
        let k = self.propagator(t)?;
        Ok(k.as_dmatrix() * psi.amplitudes())
    }

    /// `‖K_t ψ‖²`.
    pub fn survival(&self, psi: &StateVector, t: f64) -> Result<f64> {
        Ok(self.propagate(psi, t)?.norm_squared())
    }
}

/// The time evolution behind an occurrence density: either closed unitary
/// dynamics or the absorptive surrogate.
#[derive(Debug, Clone)]
pub enum Evolution {
    Unitary(PropagatorFamily),
    Absorptive(AbsorptiveGenerator),
}

impl Evolution {
    pub fn unitary(hamiltonian: Hamiltonian) -> Self {
        Evolution::Unitary(PropagatorFamily::new(hamiltonian))
    }

    pub fn dim(&self) -> usize {
        match self {
            Evolution::Unitary(f) => f.dim(),
            Evolution::Absorptive(g) => g.dim(),
        }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        match self {
            Evolution::Unitary(f) => f.hamiltonian(),
            Evolution::Absorptive(g) => g.hamiltonian(),
        }
    }

    pub fn is_absorptive(&self) -> bool {
        matches!(self, Evolution::Absorptive(_))
    }

    /// `U_t` or `K_t`.
    pub fn operator_at(&self, t: f64) -> Result<ComplexMatrix> {
        match self {
            Evolution::Unitary(f) => Ok(f.at(t)),
            Evolution::Absorptive(g) => g.propagator(t),
        }
    }

    /// `X_t† A X_t` with `X_t` the evolution operator.
    pub fn conjugate(&self, a: &DMatrix<C64>, t: f64) -> Result<DMatrix<C64>> {
        match self {
            Evolution::Unitary(f) => Ok(f.conjugate(a, t)),
            Evolution::Absorptive(g) => {
                let k = g.propagator(t)?;
                Ok(k.adjoint() * a * k.as_dmatrix())
            }
        }
    }
}
