//! Finite models of uniform Roe algebras and approximation witnesses.
//!
//! Operators are sparse complex matrices over the points of a
//! [`FiniteMetricSpace`]. [`cpc`] builds and checks the block-compression
//! witnesses for the operator side, [`commutative`] the evaluation
//! witnesses for functions on nets.

pub mod commutative;
pub mod cpc;
pub mod norm;
pub mod operator;

use serde::Serialize;
use thiserror::Error;

use crate::covers::CoverError;
use crate::metric::{FiniteMetricSpace, MetricError, Rational};
use crate::partition::{holder, PartitionError, INEQUALITY_SLACK};

pub use commutative::{build_commutative_witness, verify_mfq, CommutativeWitness, MfqReport};
pub use cpc::{build_cpc_witness, verify_nfq, CpcOutcome, CpcWitness, NfqReport};
pub use norm::{spectral_norm, NormOptions};
pub use operator::{Complex, OperatorFile, RoeOperator, SpaceRef};

/// Absolute slack on measured norm inequalities.
pub const NORM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoeError {
    #[error("point {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("operator has size {got}, space has {expected} points")]
    SizeMismatch { expected: usize, got: usize },
    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),
    #[error("power iteration did not converge in {iterations} steps (estimate {estimate})")]
    NoConvergence { estimate: f64, iterations: usize },
    #[error("claimed Hölder constant {claimed} is below the measured {measured}")]
    InvalidHolder { claimed: f64, measured: f64 },
    #[error("no operators given")]
    EmptyFamily,
    #[error("q must be positive")]
    ZeroQ,
    #[error("scale list must be nonempty and strictly increasing")]
    BadScales,
    #[error("scale schedule overflows")]
    Overflow,
    #[error("cover leaves point {0} uncovered")]
    Uncovered(usize),
    #[error("function {function} oscillates by {oscillation} on set {set} of family {family}")]
    Oscillation {
        function: usize,
        family: usize,
        set: usize,
        oscillation: f64,
    },
    #[error("set {set} of family {family} has no private point")]
    NoPrivatePoint { family: usize, set: usize },
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub(crate) fn check_size(space: &FiniteMetricSpace, op: &RoeOperator) -> Result<(), RoeError> {
    if op.len() != space.len() {
        return Err(RoeError::SizeMismatch {
            expected: space.len(),
            got: op.len(),
        });
    }
    Ok(())
}

/// `N_r = max_x |B(x, r)|` at the propagation of `op`.
pub fn ball_count_at_propagation(space: &FiniteMetricSpace, op: &RoeOperator) -> usize {
    space.ball_stat(op.propagation(space))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorReport {
    pub measured: f64,
    pub bound: f64,
    pub norm: f64,
    pub propagation: String,
    pub ball_count: usize,
    /// Exact pairwise Hölder constant of `h`.
    pub holder_measured: f64,
    pub passed: bool,
}

/// Measures `‖[a, h]‖` against `C·‖a‖·prop(a)^α·N_{prop(a)}`.
///
/// `c_holder` must be an `α`-Hölder constant for `h`; it is checked
/// pairwise before use.
pub fn commutator_check(
    space: &FiniteMetricSpace,
    a: &RoeOperator,
    h: &[f64],
    alpha: f64,
    c_holder: f64,
    opts: &NormOptions,
) -> Result<CommutatorReport, RoeError> {
    check_size(space, a)?;
    if h.len() != space.len() {
        return Err(RoeError::SizeMismatch {
            expected: space.len(),
            got: h.len(),
        });
    }
    let holder_measured = holder(space, h, alpha);
    if holder_measured > c_holder * (1.0 + INEQUALITY_SLACK) + INEQUALITY_SLACK {
        return Err(RoeError::InvalidHolder {
            claimed: c_holder,
            measured: holder_measured,
        });
    }
    let prop: Rational = a.propagation(space);
    let ball_count = space.ball_stat(prop);
    let norm = spectral_norm(a, opts)?;
    let measured = spectral_norm(&a.commutator_with(h), opts)?;
    let prop_f = *prop.numer() as f64 / *prop.denom() as f64;
    let bound = c_holder * norm * prop_f.powf(alpha) * ball_count as f64;
    Ok(CommutatorReport {
        measured,
        bound,
        norm,
        propagation: prop.to_string(),
        ball_count,
        holder_measured,
        passed: measured <= bound + NORM_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_shift_commutator() {
        let x = FiniteMetricSpace::interval(9);
        let h: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let r = commutator_check(&x, &RoeOperator::shift(10), &h, 1.0, 1.0 / 9.0, &NormOptions::default()).unwrap();
        assert!((r.measured - 1.0 / 9.0).abs() < 1e-12);
        assert!((r.bound - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.ball_count, 3);
        assert!(r.passed);
    }

    #[test]
    fn diagonal_commutes() {
        let x = FiniteMetricSpace::interval(9);
        let h: Vec<f64> = (0..10).map(|i| (i as f64).sqrt()).collect();
        let d = RoeOperator::multiplication(&[2.0; 10]);
        let r = commutator_check(&x, &d, &h, 0.5, 1.0, &NormOptions::default()).unwrap();
        assert_eq!(r.measured, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn rejects_bad_certificate() {
        let x = FiniteMetricSpace::interval(9);
        let h: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let err = commutator_check(&x, &RoeOperator::shift(10), &h, 1.0, 0.5, &NormOptions::default());
        assert!(matches!(err, Err(RoeError::InvalidHolder { .. })));
    }
}
