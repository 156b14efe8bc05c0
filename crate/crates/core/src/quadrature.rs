//! Quadrature of matrix-valued integrands.
//!
//! Samples may be evaluated concurrently, but every reduction runs left to
//! right with compensated summation, so the result does not depend on the
//! number of worker threads.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, C64};

/// Panels used by the first composite-Simpson pass (and the initial
/// subdivision of the adaptive rule).
pub const INITIAL_PANELS: usize = 16;

const MAX_ADAPTIVE_DEPTH: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Composite Simpson, panel count doubled until the tolerance is met.
    CompositeSimpson,
    /// Recursive adaptive Simpson with local error control.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rule: QuadratureRule::CompositeSimpson, abs_tol: 1e-12, rel_tol: 1e-12, max_evals: 100_000 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0;
        if !positive(self.abs_tol) || !positive(self.rel_tol) {
            return Err(Error::InvalidParameter("quadrature tolerances must be positive".into()));
        }
        if self.max_evals < 3 {
            return Err(Error::InvalidParameter("max_evals must be at least 3".into()));
        }
        Ok(())
    }

    fn target(&self, value: &DMatrix<C64>) -> f64 {
        self.abs_tol.max(self.rel_tol * max_abs(value))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureResult {
    pub value: DMatrix<C64>,
    pub error_estimate: f64,
    pub evals: usize,
    /// Number of Simpson panels in the final estimate.
    pub panels: usize,
}

/// Entrywise Kahan accumulator.
struct Compensated {
    sum: DMatrix<C64>,
    carry: DMatrix<C64>,
}

impl Compensated {
    fn new(dim: usize) -> Self {
        Self { sum: DMatrix::zeros(dim, dim), carry: DMatrix::zeros(dim, dim) }
    }

    fn add_scaled(&mut self, m: &DMatrix<C64>, w: f64) {
        for ((s, c), x) in self.sum.iter_mut().zip(self.carry.iter_mut()).zip(m.iter()) {
            let y = x * w - *c;
            let t = *s + y;
            *c = (t - *s) - y;
            *s = t;
        }
    }

    fn finish(self) -> DMatrix<C64> {
        self.sum
    }
}

/// Deterministic ordered sum of matrices.
pub fn ordered_sum<'a, I>(dim: usize, items: I) -> DMatrix<C64>
where
    I: IntoIterator<Item = &'a DMatrix<C64>>,
{
    let mut acc = Compensated::new(dim);
    for m in items {
        acc.add_scaled(m, 1.0);
    }
    acc.finish()
}

/// Running Kahan sums: element `k` is the sum of `values[..=k]`.
pub fn compensated_prefix_sums<I: IntoIterator<Item = f64>>(values: I) -> Vec<f64> {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    values
        .into_iter()
        .map(|x| {
            let y = x - carry;
            let t = sum + y;
            carry = (t - sum) - y;
            sum = t;
            sum
        })
        .collect()
}

/// Deterministic compensated sum of scalars in iteration order.
pub fn ordered_sum_scalar<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    compensated_prefix_sums(values).last().copied().unwrap_or(0.0)
}

fn sample<F>(f: &F, times: &[f64]) -> Result<Vec<DMatrix<C64>>>
where
    F: Fn(f64) -> Result<DMatrix<C64>> + Sync,
{
    times.par_iter().map(|&t| f(t)).collect()
}

/// `∫_a^b f(t) dt` for a `dim × dim` matrix-valued `f`.
pub fn integrate<F>(f: &F, a: f64, b: f64, dim: usize, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<DMatrix<C64>> + Sync,
{
    spec.validate()?;
    if !a.is_finite() || !b.is_finite() || b < a {
        return Err(Error::BadInterval { t1: a, t2: b });
    }
    if a == b {
        return Ok(QuadratureResult { value: DMatrix::zeros(dim, dim), error_estimate: 0.0, evals: 0, panels: 0 });
    }
    match spec.rule {
        QuadratureRule::CompositeSimpson => composite_simpson(f, a, b, dim, spec),
        QuadratureRule::Adaptive => adaptive_simpson(f, a, b, dim, spec),
    }
}

fn simpson_sum(samples: &[DMatrix<C64>], h: f64, dim: usize) -> DMatrix<C64> {
    let n = samples.len() - 1;
    let mut acc = Compensated::new(dim);
    for (k, s) in samples.iter().enumerate() {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.add_scaled(s, w * h / 3.0);
    }
    acc.finish()
}

fn composite_simpson<F>(f: &F, a: f64, b: f64, dim: usize, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<DMatrix<C64>> + Sync,
{
    let width = b - a;
    let mut panels = INITIAL_PANELS;
    let times: Vec<f64> = (0..=panels).map(|k| node(a, width, k, panels)).collect();
    let mut samples = sample(f, &times)?;
    let mut evals = samples.len();
    let mut estimate = simpson_sum(&samples, width / panels as f64, dim);
    loop {
        let refined = panels * 2;
        let new_points = refined / 2;
        if evals + new_points > spec.max_evals {
            // the error estimate needs one more refinement; report the last one seen
            let error_estimate = f64::INFINITY;
            return Err(Error::QuadratureBudgetExceeded { max_evals: spec.max_evals, error_estimate });
        }
        let mid_times: Vec<f64> = (0..new_points).map(|k| node(a, width, 2 * k + 1, refined)).collect();
        let mids = sample(f, &mid_times)?;
        evals += mids.len();
        let mut merged = Vec::with_capacity(refined + 1);
        let mut mids = mids.into_iter();
        for (k, s) in samples.into_iter().enumerate() {
            if k > 0 {
                merged.push(mids.next().expect("one midpoint per panel"));
            }
            merged.push(s);
        }
        samples = merged;
        panels = refined;
        let next = simpson_sum(&samples, width / panels as f64, dim);
        let error_estimate = max_abs(&(&next - &estimate)) / 15.0;
        estimate = next;
        if error_estimate <= spec.target(&estimate) {
            return Ok(QuadratureResult { value: estimate, error_estimate, evals, panels });
        }
        if evals + panels > spec.max_evals {
            return Err(Error::QuadratureBudgetExceeded { max_evals: spec.max_evals, error_estimate });
        }
    }
}

// Nodes are computed from the integer index so refinement reuses bitwise
// identical times.
fn node(a: f64, width: f64, k: usize, n: usize) -> f64 {
    if k == n {
        a + width
    } else {
        a + width * (k as f64 / n as f64)
    }
}

struct Segment {
    a: f64,
    b: f64,
    fa: DMatrix<C64>,
    fm: DMatrix<C64>,
    fb: DMatrix<C64>,
    whole: DMatrix<C64>,
}

fn simpson3(fa: &DMatrix<C64>, fm: &DMatrix<C64>, fb: &DMatrix<C64>, width: f64) -> DMatrix<C64> {
    (fa + fm * C64::new(4.0, 0.0) + fb) * C64::new(width / 6.0, 0.0)
}

fn adaptive_simpson<F>(f: &F, a: f64, b: f64, dim: usize, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<DMatrix<C64>> + Sync,
{
    let width = b - a;
    let n = INITIAL_PANELS;
    let times: Vec<f64> = (0..=2 * n).map(|k| node(a, width, k, 2 * n)).collect();
    let samples = sample(f, &times)?;
    let mut evals = samples.len();
    let segments: Vec<Segment> = (0..n)
        .map(|k| {
            let (sa, sb) = (times[2 * k], times[2 * k + 2]);
            let whole = simpson3(&samples[2 * k], &samples[2 * k + 1], &samples[2 * k + 2], sb - sa);
            Segment {
                a: sa,
                b: sb,
                fa: samples[2 * k].clone(),
                fm: samples[2 * k + 1].clone(),
                fb: samples[2 * k + 2].clone(),
                whole,
            }
        })
        .collect();
    let coarse = ordered_sum(dim, segments.iter().map(|s| &s.whole));
    let tol = spec.target(&coarse);
    let local_tol = tol / n as f64;

    let mut acc = Compensated::new(dim);
    let mut error_estimate = 0.0;
    let mut panels = 0;
    // explicit stack, left segment processed first
    let mut stack: Vec<(Segment, f64, usize)> = segments.into_iter().rev().map(|s| (s, local_tol, 0)).collect();
    while let Some((seg, tol, depth)) = stack.pop() {
        let mid = 0.5 * (seg.a + seg.b);
        let lm = 0.5 * (seg.a + mid);
        let rm = 0.5 * (mid + seg.b);
        if evals + 2 > spec.max_evals {
            return Err(Error::QuadratureBudgetExceeded { max_evals: spec.max_evals, error_estimate: f64::INFINITY });
        }
        let pair = sample(f, &[lm, rm])?;
        evals += 2;
        let mut pair = pair.into_iter();
        let flm = pair.next().expect("two samples");
        let frm = pair.next().expect("two samples");
        let left = simpson3(&seg.fa, &flm, &seg.fm, mid - seg.a);
        let right = simpson3(&seg.fm, &frm, &seg.fb, seg.b - mid);
        let refined = &left + &right;
        let err = max_abs(&(&refined - &seg.whole)) / 15.0;
        if err <= tol || depth >= MAX_ADAPTIVE_DEPTH {
            if err > tol {
                return Err(Error::QuadratureBudgetExceeded { max_evals: spec.max_evals, error_estimate: err });
            }
            acc.add_scaled(&refined, 1.0);
            error_estimate += err;
            panels += 2;
        } else {
            let right_seg = Segment { a: mid, b: seg.b, fa: seg.fm.clone(), fm: frm, fb: seg.fb, whole: right };
            let left_seg = Segment { a: seg.a, b: mid, fa: seg.fa, fm: flm, fb: seg.fm, whole: left };
            stack.push((right_seg, tol / 2.0, depth + 1));
            stack.push((left_seg, tol / 2.0, depth + 1));
        }
    }
    Ok(QuadratureResult { value: acc.finish(), error_estimate, evals, panels })
}
