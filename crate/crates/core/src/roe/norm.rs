//! Operator norms: dense eigenvalues on small spaces, power iteration above.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operator::{Complex, RoeOperator};
use super::RoeError;

pub const DENSE_LIMIT: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    /// Relative accuracy.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest size handled densely.
    pub dense_limit: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            dense_limit: DENSE_LIMIT,
        }
    }
}

/// `‖T‖` on `ℓ²(X)`.
pub fn spectral_norm(op: &RoeOperator, opts: &NormOptions) -> Result<f64, RoeError> {
    if !(opts.tol > 0.0) {
        return Err(RoeError::NonPositiveTolerance(opts.tol));
    }
    if op.nnz() == 0 {
        return Ok(0.0);
    }
    if op.len() <= opts.dense_limit {
        Ok(dense_norm(op))
    } else {
        power_norm(op, opts)
    }
}

/// Largest singular value from the eigenvalues of `T` (Hermitian case) or `T*T`.
pub fn dense_norm(op: &RoeOperator) -> f64 {
    if op.nnz() == 0 {
        return 0.0;
    }
    if is_hermitian(op) {
        return op
            .to_dense()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
    }
    // The sparse product keeps the band structure and is far cheaper than a
    // dense complex product.
    op.adjoint()
        .mul(op)
        .to_dense()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |m, &v| m.max(v))
        .max(0.0)
        .sqrt()
}

/// Largest singular value of a dense matrix.
pub fn matrix_norm(m: &DMatrix<Complex>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    (m.adjoint() * m)
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v))
        .max(0.0)
        .sqrt()
}

/// Smallest eigenvalue of a Hermitian matrix; `+∞` when empty.
pub fn min_eigenvalue(m: &DMatrix<Complex>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    m.symmetric_eigenvalues().iter().fold(f64::INFINITY, |acc, &v| acc.min(v))
}

fn is_hermitian(op: &RoeOperator) -> bool {
    op.entries().all(|(x, y, v)| op.get(y, x) == v.conj())
}

/// Power iteration on `T*T` from a fixed pseudo-random start.
///
/// Stops once the residual `‖T*T v − θ v‖` drops below `tol·θ`, which puts
/// an eigenvalue of `T*T` within relative `tol` of the Rayleigh quotient `θ`.
pub fn power_norm(op: &RoeOperator, opts: &NormOptions) -> Result<f64, RoeError> {
    let n = op.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<Complex> = (0..n)
        .map(|_| Complex::new(rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5)))
        .collect();
    normalize(&mut v);
    let mut theta = 0.0;
    for _ in 0..opts.max_iter {
        let w = op.apply_adjoint(&op.apply(&v));
        theta = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        if theta <= 0.0 {
            return Ok(0.0);
        }
        let residual = w
            .iter()
            .zip(&v)
            .map(|(b, a)| (b - a * theta).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual <= opts.tol * theta {
            return Ok(theta.sqrt());
        }
        v = w;
        normalize(&mut v);
    }
    Err(RoeError::NoConvergence {
        estimate: theta.max(0.0).sqrt(),
        iterations: opts.max_iter,
    })
}

fn normalize(v: &mut [Complex]) {
    let len = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if len > 0.0 {
        for z in v.iter_mut() {
            *z /= len;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{FiniteMetricSpace, Rational};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    #[test]
    fn small_examples() {
        let opts = NormOptions::default();
        assert!((spectral_norm(&RoeOperator::identity(5), &opts).unwrap() - 1.0).abs() < 1e-12);
        let ones = RoeOperator::from_entries(2, [(0, 0, c(1.0)), (0, 1, c(1.0)), (1, 0, c(1.0)), (1, 1, c(1.0))]).unwrap();
        assert!((spectral_norm(&ones, &opts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&RoeOperator::zero(4), &opts).unwrap(), 0.0);
        // A nilpotent shift has norm 1.
        assert!((spectral_norm(&RoeOperator::shift(10), &opts).unwrap() - 1.0).abs() < 1e-12);
        assert!((power_norm(&RoeOperator::shift(10), &opts).unwrap() - 1.0).abs() < 1e-8);
        assert!(spectral_norm(&ones, &NormOptions { tol: 0.0, ..opts }).is_err());
    }

    #[test]
    fn shift_plus_adjoint() {
        // Eigenvalues of the path adjacency are 2cos(πk/(n+1)).
        let s = RoeOperator::shift(201);
        let t = s.add(&s.adjoint());
        let expected = 2.0 * (std::f64::consts::PI / 202.0).cos();
        assert!((dense_norm(&t) - expected).abs() < 1e-12);
    }

    #[test]
    fn power_matches_dense_on_random_sparse() {
        let x = FiniteMetricSpace::interval(499);
        let opts = NormOptions::default();
        for seed in 0..4 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = RoeOperator::random_band(&x, Rational::from_integer(3), 0.4, &mut rng);
            let d = dense_norm(&a);
            let p = power_norm(&a, &opts).unwrap();
            assert!((p - d).abs() <= opts.tol * d, "seed {seed}: {p} vs {d}");
        }
    }

    #[test]
    fn cap_reports_estimate() {
        let x = FiniteMetricSpace::interval(99);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = RoeOperator::random_band(&x, Rational::from_integer(2), 0.5, &mut rng);
        let opts = NormOptions { max_iter: 2, ..NormOptions::default() };
        match power_norm(&a, &opts) {
            Err(RoeError::NoConvergence { estimate, iterations }) => {
                assert_eq!(iterations, 2);
                assert!(estimate > 0.0 && estimate <= dense_norm(&a) * (1.0 + 1e-12));
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn submultiplicative(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = FiniteMetricSpace::interval(40);
            let a = RoeOperator::random_band(&x, Rational::from_integer(2), 0.5, &mut rng);
            let b = RoeOperator::random_band(&x, Rational::from_integer(3), 0.5, &mut rng);
            let ab = dense_norm(&a.mul(&b));
            prop_assert!(ab <= dense_norm(&a) * dense_norm(&b) * (1.0 + 1e-12) + 1e-12);
        }
    }
}
