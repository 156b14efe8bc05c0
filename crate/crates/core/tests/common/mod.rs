//! Random instances and brute-force reference computations shared by the
//! integration tests. Nothing here calls the library's own spectral routines.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use occtime::linalg::{ComplexMatrix, DensityOperator, Effect, HermitianOperator, Projector, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian_raw(rng: &mut impl Rng, dim: usize, scale: f64) -> DMatrix<C64> {
    let a = random_complex(rng, dim, dim);
    (&a + a.adjoint()) * C64::new(scale / 2.0, 0.0)
}

pub fn random_hermitian(rng: &mut impl Rng, dim: usize, scale: f64) -> HermitianOperator {
    HermitianOperator::new(ComplexMatrix::new(random_hermitian_raw(rng, dim, scale)).unwrap()).unwrap()
}

/// Orthonormal columns from modified Gram-Schmidt on a random matrix.
pub fn random_isometry(rng: &mut impl Rng, dim: usize, rank: usize) -> DMatrix<C64> {
    let mut q = random_complex(rng, dim, rank);
    for j in 0..rank {
        for k in 0..j {
            let qk = q.column(k).clone_owned();
            let c = qk.dotc(&q.column(j));
            let update = qk * c;
            let mut col = q.column_mut(j);
            col -= update;
        }
        let n = q.column(j).norm();
        q.column_mut(j).unscale_mut(n);
    }
    q
}

pub fn random_projector_raw(rng: &mut impl Rng, dim: usize, rank: usize) -> DMatrix<C64> {
    let v = random_isometry(rng, dim, rank);
    &v * v.adjoint()
}

pub fn random_projector(rng: &mut impl Rng, dim: usize, rank: usize) -> Projector {
    let raw = random_projector_raw(rng, dim, rank);
    let herm = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
    Projector::new(HermitianOperator::new(ComplexMatrix::new(herm).unwrap()).unwrap()).unwrap()
}

/// `V diag(values) V†` for a random unitary `V`.
pub fn random_with_spectrum(rng: &mut impl Rng, values: &[f64]) -> DMatrix<C64> {
    let dim = values.len();
    let v = random_isometry(rng, dim, dim);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(dim, values.iter().map(|&x| C64::new(x, 0.0))));
    let m = &v * d * v.adjoint();
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// An effect whose eigenvalues all lie in `[0.05, 0.95]`.
pub fn random_strict_effect(rng: &mut impl Rng, dim: usize) -> Effect {
    let values: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05..0.95)).collect();
    Effect::new(HermitianOperator::new(ComplexMatrix::new(random_with_spectrum(rng, &values)).unwrap()).unwrap())
        .unwrap()
}

/// Full-rank density operator `A A† / Tr` with a small identity admixture.
pub fn random_density(rng: &mut impl Rng, dim: usize) -> DensityOperator {
    let a = random_complex(rng, dim, dim);
    let mut m = &a * a.adjoint() + DMatrix::identity(dim, dim) * C64::new(0.05, 0.0);
    let tr = m.trace();
    m /= tr;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    DensityOperator::new(HermitianOperator::new(ComplexMatrix::new(m).unwrap()).unwrap()).unwrap()
}

pub fn random_state(rng: &mut impl Rng, dim: usize) -> StateVector {
    let v = DVector::from_fn(dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    StateVector::new(v).unwrap()
}

/// `e^{-iHt}` via nalgebra's Padé scaling-and-squaring.
pub fn pade_propagator(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    (h * C64::new(0.0, -t)).exp()
}

/// `U_t† P U_t` with the Padé propagator.
pub fn pade_heisenberg(h: &DMatrix<C64>, p: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let u = pade_propagator(h, t);
    u.adjoint() * p * u
}

/// Fixed-step midpoint rule for `∫ U_t† P U_t dt` over `[a, b]`.
pub fn midpoint_oracle(h: &DMatrix<C64>, p: &DMatrix<C64>, a: f64, b: f64, steps: usize) -> DMatrix<C64> {
    let step = (b - a) / steps as f64;
    let mut acc = DMatrix::zeros(p.nrows(), p.ncols());
    for k in 0..steps {
        acc += pade_heisenberg(h, p, a + (k as f64 + 0.5) * step);
    }
    acc * C64::new(step, 0.0)
}

/// Literal sequential collapse: at each time apply `ρ → FρF / Tr[Fρ]` and
/// multiply the conditional probabilities.
pub fn collapse_oracle(h: &DMatrix<C64>, m: &DMatrix<C64>, psi: &DVector<C64>, times: &[f64], bits: &[u8]) -> f64 {
    let dim = m.nrows();
    let mut rho = psi * psi.adjoint();
    let mut joint = 1.0;
    for (&t, &b) in times.iter().zip(bits) {
        let mt = pade_heisenberg(h, m, t);
        let f = if b == 1 { mt } else { DMatrix::identity(dim, dim) - mt };
        let next = &f * &rho * &f;
        let p = next.trace().re;
        if p <= 0.0 {
            return 0.0;
        }
        joint *= p;
        rho = next / C64::new(p, 0.0);
    }
    joint
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
