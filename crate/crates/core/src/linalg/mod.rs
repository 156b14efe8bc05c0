//! Dense complex operator algebra.
//!
//! Every matrix function used by the crate (`e^{-iHt}`, `A^{1/2}`, the
//! pseudo-inverse square root) goes through one primitive, the Hermitian
//! eigendecomposition [`eigh`]. The matrices involved are small and
//! Hermitian, so spectral calculus is exact up to the eigensolver's
//! round-off and no Padé or series machinery is needed here.

mod types;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use num_complex::Complex64 as C64;
pub use types::{
    ComplexMatrix, DensityOperator, Effect, HermitianOperator, Projector, StateVector,
    DENSITY_TOL, EFFECT_TOL, HERMITIAN_TOL, NORM_TOL, PROJECTOR_TOL,
};

pub(crate) use types::{check_dim, expectation_raw, trace_product};

use crate::error::{Error, Result};

/// Default relative threshold below which eigenvalues count as zero in
/// [`pseudo_inverse_sqrt`].
pub const SUPPORT_EPS: f64 = 1e-10;
/// Default cap on the dimension produced by [`tensor_product`].
pub const MAX_TENSOR_DIM: usize = 4096;

const EIGEN_MAX_SWEEPS: usize = 10_000;

/// Hermitian eigendecomposition `A = V diag(λ) V†` with ascending `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigh {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(λ)) V†`.
    pub fn map<F>(&self, f: F) -> DMatrix<C64>
    where
        F: Fn(f64) -> C64,
    {
        let v = self.vectors.as_dmatrix();
        let mut scaled = v.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= w;
            }
        }
        scaled * v.adjoint()
    }

    /// Same as [`Eigh::map`] for a real-valued function; the result is
    /// Hermitian by construction.
    pub fn map_real<F>(&self, f: F) -> HermitianOperator
    where
        F: Fn(f64) -> f64,
    {
        HermitianOperator::hermitize(self.map(|x| C64::new(f(x), 0.0)))
    }

    /// `e^{-iHt}` for the decomposed `H`. Exactly the identity at `t = 0`.
    pub fn exp_skew(&self, t: f64) -> ComplexMatrix {
        if t == 0.0 {
            return ComplexMatrix::identity(self.dim());
        }
        ComplexMatrix::from_dmatrix_unchecked(self.map(|l| C64::from_polar(1.0, -l * t)))
    }

    /// `e^{-iHt} v` without forming the full propagator.
    pub fn exp_skew_apply(&self, t: f64, v: &DVector<C64>) -> DVector<C64> {
        if t == 0.0 {
            return v.clone();
        }
        let basis = self.vectors.as_dmatrix();
        let mut coeffs = basis.adjoint() * v;
        for (c, &l) in coeffs.iter_mut().zip(&self.values) {
            *c *= C64::from_polar(1.0, -l * t);
        }
        basis * coeffs
    }
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
pub fn eigh(a: &HermitianOperator) -> Result<Eigh> {
    let n = a.dim();
    let decomposition = SymmetricEigen::try_new(a.as_dmatrix().clone(), f64::EPSILON, EIGEN_MAX_SWEEPS)
        .ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| decomposition.eigenvalues[i].total_cmp(&decomposition.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| decomposition.eigenvalues[i]).collect();
    if values.iter().any(|l| !l.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    let vectors = DMatrix::from_fn(n, n, |r, c| decomposition.eigenvectors[(r, order[c])]);
    Ok(Eigh { values, vectors: ComplexMatrix::from_dmatrix_unchecked(vectors) })
}

/// `U_t = e^{-iHt}`.
pub fn matrix_exponential_skew(h: &HermitianOperator, t: f64) -> Result<ComplexMatrix> {
    Ok(eigh(h)?.exp_skew(t))
}

/// Unique positive square root. Eigenvalues in `[-tol, 0)` are clamped to
/// zero, as are positive eigenvalues below the round-off floor of the
/// decomposition (`dim·ε·λ_max`), whose square roots would otherwise be
/// pure noise of order `√ε`.
pub fn positive_sqrt(a: &HermitianOperator, tol: f64) -> Result<HermitianOperator> {
    let eig = eigh(a)?;
    let min = eig.values[0];
    if min < -tol {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let floor = eig.dim() as f64 * f64::EPSILON * lambda_max;
    Ok(eig.map_real(|l| if l <= floor { 0.0 } else { l.sqrt() }))
}

/// Inverse square root on the support of a positive operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverseSqrt {
    pub inv_sqrt: HermitianOperator,
    pub support: Projector,
    pub rank: usize,
}

/// Eigenvalues `λ ≤ eps·λ_max` are treated as zero; the rest map to `λ^{-1/2}`.
/// `support` projects onto the retained eigenspace.
pub fn pseudo_inverse_sqrt(a: &HermitianOperator, eps: f64) -> Result<PseudoInverseSqrt> {
    let eig = eigh(a)?;
    let lambda_max = *eig.values.last().expect("dim >= 1");
    if lambda_max <= 0.0 {
        if eig.values[0] < -f64::EPSILON {
            return Err(Error::NotPositive { min_eigenvalue: eig.values[0] });
        }
        return Err(Error::EmptySupport);
    }
    let cutoff = eps * lambda_max;
    if eig.values[0] < -cutoff {
        return Err(Error::NotPositive { min_eigenvalue: eig.values[0] });
    }
    let rank = eig.values.iter().filter(|&&l| l > cutoff).count();
    if rank == 0 {
        return Err(Error::EmptySupport);
    }
    let inv_sqrt = eig.map_real(|l| if l > cutoff { 1.0 / l.sqrt() } else { 0.0 });
    let support = Projector::new_unchecked(eig.map_real(|l| if l > cutoff { 1.0 } else { 0.0 }));
    Ok(PseudoInverseSqrt { inv_sqrt, support, rank })
}

/// Kronecker product `A ⊗ B`, capped at [`MAX_TENSOR_DIM`].
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    tensor_product_capped(a, b, MAX_TENSOR_DIM)
}

pub fn tensor_product_capped(a: &ComplexMatrix, b: &ComplexMatrix, max_dim: usize) -> Result<ComplexMatrix> {
    let dim = a
        .dim()
        .checked_mul(b.dim())
        .ok_or(Error::DimensionOverflow { dim: usize::MAX, max: max_dim })?;
    if dim > max_dim {
        return Err(Error::DimensionOverflow { dim, max: max_dim });
    }
    Ok(ComplexMatrix::from_dmatrix_unchecked(a.kronecker(b.as_dmatrix())))
}

/// `‖A‖_max` for any dense complex matrix.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
