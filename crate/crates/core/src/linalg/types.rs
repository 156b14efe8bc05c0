use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use super::{eigh, max_abs, C64};
use crate::error::{Error, Result};

/// Default absolute tolerance (scaled by `max(1, ‖A‖_max)`) for `A ≈ A†`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for `P² ≈ P` and for the spectrum of a projector.
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Slack allowed outside `[0, 1]` for the spectrum of an effect.
pub const EFFECT_TOL: f64 = 1e-12;
/// Tolerance on the trace and on negative eigenvalues of a density operator.
pub const DENSITY_TOL: f64 = 1e-12;
/// Allowed deviation of a state vector's norm from one after normalization.
pub const NORM_TOL: f64 = 1e-12;

/// A dense square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if matrix.nrows() == 0 {
            return Err(Error::Empty);
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(matrix))
    }

    /// Builds a matrix from row slices.
    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
            return Err(Error::NotSquare { rows: n, cols });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
            return Err(Error::NotSquare { rows: n, cols });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self(DMatrix::from_diagonal(&d))
    }

    pub(crate) fn from_dmatrix_unchecked(matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self(matrix)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    /// Largest entry modulus, `‖A‖_max`.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    /// Largest entry modulus of `A − B`.
    pub fn max_abs_diff(&self, other: &DMatrix<C64>) -> f64 {
        self.0
            .iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Deref for ComplexMatrix {
    type Target = DMatrix<C64>;

    fn deref(&self) -> &DMatrix<C64> {
        &self.0
    }
}

/// A self-adjoint operator. The stored matrix is exactly Hermitian: inputs
/// within tolerance are replaced by `(A + A†)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(ComplexMatrix);

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, HERMITIAN_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        let deviation = matrix.max_abs_diff(&matrix.adjoint());
        if deviation > tol * matrix.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::hermitize(matrix.into_dmatrix()))
    }

    pub fn from_dmatrix(matrix: DMatrix<C64>) -> Result<Self> {
        Self::new(ComplexMatrix::new(matrix)?)
    }

    /// Symmetrizes without checking; for matrices Hermitian by construction.
    pub(crate) fn hermitize(matrix: DMatrix<C64>) -> Self {
        let n = matrix.nrows();
        let sym = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(matrix[(i, i)].re, 0.0)
            } else {
                (matrix[(i, j)] + matrix[(j, i)].conj()) * 0.5
            }
        });
        Self(ComplexMatrix::from_dmatrix_unchecked(sym))
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(ComplexMatrix::zeros(dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diagonal(diag))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::hermitize(self.0.as_dmatrix() * C64::new(factor, 0.0))
    }

    /// `⟨ψ|Aψ⟩`, real for a Hermitian `A`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        check_dim(self.dim(), psi.dim())?;
        Ok(expectation_raw(self.0.as_dmatrix(), psi.amplitudes()))
    }

    /// `Tr[Aρ]`.
    pub fn trace_with(&self, rho: &DensityOperator) -> Result<f64> {
        check_dim(self.dim(), rho.dim())?;
        Ok(trace_product(self.0.as_dmatrix(), rho.as_dmatrix()).re)
    }
}

impl Deref for HermitianOperator {
    type Target = ComplexMatrix;

    fn deref(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// An orthogonal projector: Hermitian, idempotent, spectrum in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector(HermitianOperator);

impl Projector {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let m = op.as_dmatrix();
        let deviation = max_abs(&(m * m - m));
        if deviation > PROJECTOR_TOL {
            return Err(Error::NotProjector { deviation });
        }
        let eig = eigh(&op)?;
        if let Some(&bad) = eig
            .values
            .iter()
            .find(|&&l| l.abs() > PROJECTOR_TOL && (l - 1.0).abs() > PROJECTOR_TOL)
        {
            return Err(Error::NotProjector { deviation: bad.abs().min((bad - 1.0).abs()) });
        }
        Ok(Self(op))
    }

    pub(crate) fn new_unchecked(op: HermitianOperator) -> Self {
        Self(op)
    }

    /// Rank-one projector `|ψ⟩⟨ψ|`.
    pub fn onto_state(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        Self(HermitianOperator::hermitize(v * v.adjoint()))
    }

    /// Projector onto the span of the listed computational basis vectors.
    pub fn onto_basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut diag = vec![0.0; dim];
        for &k in indices {
            if k >= dim {
                return Err(Error::DimensionMismatch { expected: dim, found: k + 1 });
            }
            diag[k] = 1.0;
        }
        Ok(Self(HermitianOperator::from_real_diagonal(&diag)))
    }

    pub fn identity(dim: usize) -> Self {
        Self(HermitianOperator::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(HermitianOperator::zeros(dim))
    }

    /// `I − P`, the projector for outcome 0.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        Self(HermitianOperator::hermitize(DMatrix::identity(n, n) - self.as_dmatrix()))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.as_dmatrix().trace().re.round() as usize
    }

    pub fn to_effect(&self) -> Effect {
        Effect(self.0.clone())
    }
}

impl Deref for Projector {
    type Target = HermitianOperator;

    fn deref(&self) -> &HermitianOperator {
        &self.0
    }
}

/// A positive operator with spectrum in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect(HermitianOperator);

impl Effect {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        Self::with_tolerance(op, EFFECT_TOL)
    }

    /// Accepts spectra in `[-tol, 1 + tol]`.
    pub fn with_tolerance(op: HermitianOperator, tol: f64) -> Result<Self> {
        let eig = eigh(&op)?;
        let min = eig.values.first().copied().unwrap_or(0.0);
        let max = eig.values.last().copied().unwrap_or(0.0);
        if min < -tol || max > 1.0 + tol {
            return Err(Error::NotEffect { min, max });
        }
        Ok(Self(op))
    }

    pub(crate) fn new_unchecked(op: HermitianOperator) -> Self {
        Self(op)
    }

    /// `c·I` for `0 ≤ c ≤ 1`.
    pub fn scaled_identity(dim: usize, c: f64) -> Result<Self> {
        if !(-EFFECT_TOL..=1.0 + EFFECT_TOL).contains(&c) {
            return Err(Error::NotEffect { min: c, max: c });
        }
        Ok(Self(HermitianOperator::identity(dim).scaled(c)))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }

    /// `max |A² − A|`, zero for a projector.
    pub fn idempotency_defect(&self) -> f64 {
        let m = self.as_dmatrix();
        max_abs(&(m * m - m))
    }

    pub fn is_projector(&self) -> bool {
        self.idempotency_defect() <= PROJECTOR_TOL
    }
}

impl Deref for Effect {
    type Target = HermitianOperator;

    fn deref(&self) -> &HermitianOperator {
        &self.0
    }
}

impl From<Projector> for Effect {
    fn from(p: Projector) -> Self {
        Effect(p.0)
    }
}

impl From<&Projector> for Effect {
    fn from(p: &Projector) -> Self {
        Effect(p.0.clone())
    }
}

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    /// Normalizes `amplitudes`; fails on a zero or non-finite vector.
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Empty);
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self(amplitudes / C64::new(norm, 0.0)))
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amplitudes))
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    /// Computational basis vector `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::DimensionMismatch { expected: dim, found: k + 1 });
        }
        let mut v = DVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub(crate) fn from_normalized_unchecked(amplitudes: DVector<C64>) -> Self {
        Self(amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.0.dotc(&other.0))
    }

    /// `|ψ⟩ ⊗ |φ⟩`.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        Self(self.0.kronecker(&other.0))
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_pure(self)
    }
}

/// A mixed state: positive semidefinite with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator(HermitianOperator);

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.as_dmatrix().trace().re;
        if (trace - 1.0).abs() > DENSITY_TOL {
            return Err(Error::BadTrace { trace });
        }
        let eig = eigh(&op)?;
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < -DENSITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(Self(op))
    }

    pub(crate) fn new_unchecked(op: HermitianOperator) -> Self {
        Self(op)
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        Self(HermitianOperator::hermitize(v * v.adjoint()))
    }

    /// `I/n`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self(HermitianOperator::identity(dim).scaled(1.0 / dim as f64))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }
}

impl Deref for DensityOperator {
    type Target = HermitianOperator;

    fn deref(&self) -> &HermitianOperator {
        &self.0
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `Re ⟨v|A v⟩`.
pub(crate) fn expectation_raw(a: &DMatrix<C64>, v: &DVector<C64>) -> f64 {
    v.dotc(&(a * v)).re
}

/// `Tr[AB]` without forming the product.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
