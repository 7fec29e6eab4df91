//! Block-compression witnesses for families of finite-propagation operators.
//!
//! From the operators `b_j` the constants `K = 2·max‖b_j‖ + 1` and the least
//! integer `M > max ‖b_j‖·prop(b_j)^{1/2}·N_{prop(b_j)}` fix the scales
//! `s_i`, each of the form `3·(3qM)²·4^k` and above `12·t_i²·M²·K²`. A
//! decomposition with `s_i`-disjoint families then gives a partition `f_i`
//! and blocks `N_{s_i/2}(U)`, and
//!
//! * `ψ^{(i)}(a)` is `f_i a f_i` with everything outside the blocks cut away;
//! * `φ^{(i)}` places the blocks back into `ℓ²(X)`.
//!
//! The approximants `a_j` are the `b_j` themselves, and the direct sum over
//! indices needs no further consolidation on a finite space.

use rayon::prelude::*;
use serde::Serialize;

use crate::covers::{
    find_decomposition, CoverDecomposition, DecompositionConstraint, Gap, IndexConstraint, SearchOptions,
    SearchOutcome,
};
use crate::metric::{FiniteMetricSpace, Rational};
use crate::partition::{admissible_value, PartitionOfUnity, ScaleSchedule};

use super::norm::{matrix_norm, min_eigenvalue, spectral_norm, NormOptions};
use super::operator::RoeOperator;
use super::{check_size, RoeError, NORM_SLACK};

/// Threshold for positivity checks on smallest eigenvalues.
pub const POSITIVITY_TOL: f64 = 1e-9;

/// Constants of the construction, all derived from the operators and `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpcConstants {
    pub q: u64,
    /// `t_0 < ⋯ < t_n`.
    pub scales: Vec<u64>,
    pub norms: Vec<f64>,
    #[serde(serialize_with = "ser_rationals")]
    pub propagations: Vec<Rational>,
    pub ball_counts: Vec<usize>,
    /// `K`.
    pub k: f64,
    /// `M`.
    pub m: u64,
    /// `3qM`, the base of the admissible scales.
    pub base: u64,
    /// `12·t_i²·M²·K²`.
    pub thresholds: Vec<f64>,
    /// `s_i`.
    pub s: Vec<u64>,
}

fn ser_rationals<S: serde::Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| r.to_string()))
}

/// Computes `K`, `M` and the scales `s_i`.
///
/// `s_i` is the least admissible value above `12·t_i²·M²·K²` and above
/// `s_{i−1}`, so distinct `t_i` never share a scale.
pub fn cpc_constants(
    space: &FiniteMetricSpace,
    ops: &[RoeOperator],
    q: u64,
    scales: &[u64],
    opts: &NormOptions,
) -> Result<CpcConstants, RoeError> {
    if ops.is_empty() {
        return Err(RoeError::EmptyFamily);
    }
    if q == 0 {
        return Err(RoeError::ZeroQ);
    }
    if scales.is_empty() || scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RoeError::BadScales);
    }
    for op in ops {
        check_size(space, op)?;
    }
    let norms = ops
        .iter()
        .map(|op| spectral_norm(op, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let propagations: Vec<Rational> = ops.iter().map(|op| op.propagation(space)).collect();
    let ball_counts: Vec<usize> = propagations.iter().map(|&p| space.ball_stat(p)).collect();
    let k = 2.0 * norms.iter().cloned().fold(0.0, f64::max) + 1.0;
    let sup = norms
        .iter()
        .zip(&propagations)
        .zip(&ball_counts)
        .map(|((&n, p), &c)| n * (*p.numer() as f64 / *p.denom() as f64).sqrt() * c as f64)
        .fold(0.0, f64::max);
    let m = sup.floor() as u64 + 1;
    let base = 3u64
        .checked_mul(q)
        .and_then(|v| v.checked_mul(m))
        .ok_or(RoeError::Overflow)?;
    let thresholds: Vec<f64> = scales
        .iter()
        .map(|&t| 12.0 * (t as f64).powi(2) * (m as f64).powi(2) * k * k)
        .collect();
    let mut s = Vec::with_capacity(scales.len());
    let mut previous = 0u64;
    for &threshold in &thresholds {
        let mut exp = 1u32;
        let value = loop {
            let v = admissible_value(base, exp).ok_or(RoeError::Overflow)?;
            if v as f64 > threshold && v > previous {
                break v;
            }
            exp += 1;
        };
        if value > i64::MAX as u64 {
            return Err(RoeError::Overflow);
        }
        s.push(value);
        previous = value;
    }
    Ok(CpcConstants {
        q,
        scales: scales.to_vec(),
        norms,
        propagations,
        ball_counts,
        k,
        m,
        base,
        thresholds,
        s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpcWitness {
    pub constants: CpcConstants,
    pub decomposition: CoverDecomposition,
    pub partition: PartitionOfUnity,
    /// `blocks[i]` lists `N_{s_i/2}(U)` for `U ∈ U_i`.
    pub blocks: Vec<Vec<Vec<usize>>>,
    #[serde(skip)]
    block_of: Vec<Vec<Option<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CpcOutcome {
    Witness { witness: Box<CpcWitness> },
    Infeasible {
        constants: CpcConstants,
        #[serde(skip_serializing_if = "Option::is_none")]
        refuted_on: Option<Vec<usize>>,
    },
    Unknown { constants: CpcConstants, reason: String },
}

/// Runs the whole construction with diameter bound `bound` on every family.
pub fn build_cpc_witness(
    space: &FiniteMetricSpace,
    ops: &[RoeOperator],
    q: u64,
    scales: &[u64],
    bound: Rational,
    search: &SearchOptions,
    opts: &NormOptions,
) -> Result<CpcOutcome, RoeError> {
    let constants = cpc_constants(space, ops, q, scales, opts)?;
    let constraint = DecompositionConstraint {
        indices: constants
            .s
            .iter()
            .map(|&s| IndexConstraint {
                gap: Gap::AtLeast(Rational::from_integer(s as i64)),
                bound,
            })
            .collect(),
    };
    let result = find_decomposition(space, &constraint, search)?;
    match result.outcome {
        SearchOutcome::Feasible { decomposition } => Ok(CpcOutcome::Witness {
            witness: Box::new(CpcWitness::assemble(space, constants, decomposition)?),
        }),
        SearchOutcome::Infeasible => Ok(CpcOutcome::Infeasible {
            constants,
            refuted_on: result.refuted_on,
        }),
        SearchOutcome::Unknown { reason } => Ok(CpcOutcome::Unknown { constants, reason }),
    }
}

impl CpcWitness {
    /// Builds partition and blocks for a decomposition whose family `i`
    /// is `s_i`-disjoint.
    pub fn assemble(
        space: &FiniteMetricSpace,
        constants: CpcConstants,
        decomposition: CoverDecomposition,
    ) -> Result<Self, RoeError> {
        let schedule = ScaleSchedule::new(constants.q, constants.base, constants.s.clone())?;
        let partition = PartitionOfUnity::build(space, &decomposition, &schedule)?;
        let mut blocks = Vec::with_capacity(constants.s.len());
        let mut block_of = Vec::with_capacity(constants.s.len());
        for (family, &s) in decomposition.families.iter().zip(&constants.s) {
            let radius = Rational::new(s as i64, 2);
            let family_blocks: Vec<Vec<usize>> =
                family.sets().iter().map(|u| space.neighborhood(u, radius)).collect();
            let mut owner = vec![None; space.len()];
            for (b, block) in family_blocks.iter().enumerate() {
                for &x in block {
                    // Disjointness is re-checked by `blocks_disjoint`; keep the first owner.
                    owner[x].get_or_insert(b);
                }
            }
            blocks.push(family_blocks);
            block_of.push(owner);
        }
        Ok(CpcWitness {
            constants,
            decomposition,
            partition,
            blocks,
            block_of,
        })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Whether the blocks of each index are pairwise disjoint.
    pub fn blocks_disjoint(&self) -> Vec<bool> {
        self.blocks
            .iter()
            .map(|family| {
                let total: usize = family.iter().map(Vec::len).sum();
                let mut all: Vec<usize> = family.iter().flatten().copied().collect();
                all.sort_unstable();
                all.dedup();
                all.len() == total
            })
            .collect()
    }

    /// `f_i a f_i` before compression.
    pub fn sandwich(&self, a: &RoeOperator, i: usize) -> RoeOperator {
        let f = &self.partition.f[i];
        a.sandwich(f, f)
    }

    /// `ψ^{(i)}(a)`, placed back in `ℓ²(X)` by `φ^{(i)}`.
    pub fn psi(&self, a: &RoeOperator, i: usize) -> RoeOperator {
        self.sandwich(a, i).compress(&self.block_of[i])
    }

    /// `Φ∘Ψ(a) = Σ_i φ^{(i)}ψ^{(i)}(a)`.
    pub fn phi_psi(&self, a: &RoeOperator) -> RoeOperator {
        (0..self.len()).fold(RoeOperator::zero(a.len()), |acc, i| acc.add(&self.psi(a, i)))
    }

    /// Norm of the part of `f_i a f_i` that the compression discards.
    pub fn offblock_residual(&self, a: &RoeOperator, i: usize, opts: &NormOptions) -> Result<f64, RoeError> {
        let full = self.sandwich(a, i);
        spectral_norm(&full.sub(&full.compress(&self.block_of[i])), opts)
    }

    /// `‖a‖·N_{prop(a)}·prop(a)/s_i`, given `‖a‖`.
    pub fn residual_bound(&self, space: &FiniteMetricSpace, a: &RoeOperator, norm: f64, i: usize) -> f64 {
        let prop = a.propagation(space);
        let prop_f = *prop.numer() as f64 / *prop.denom() as f64;
        norm * space.ball_stat(prop) as f64 * prop_f / self.constants.s[i] as f64
    }

    /// `max_U ‖P_U x P_U‖`, the norm of `x` as an element of the block algebra.
    pub fn block_norm(&self, x: &RoeOperator, i: usize) -> f64 {
        self.blocks[i]
            .iter()
            .map(|block| matrix_norm(&x.restrict(block)))
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of a Hermitian block element, over all blocks.
    /// Points outside the blocks contribute the eigenvalue 0.
    pub fn block_min_eigenvalue(&self, x: &RoeOperator, i: usize) -> f64 {
        let inside: usize = self.blocks[i].iter().map(Vec::len).sum();
        let mut least = if inside < x.len() { 0.0 } else { f64::INFINITY };
        for block in &self.blocks[i] {
            least = least.min(min_eigenvalue(&x.restrict(block)));
        }
        least
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractivityEntry {
    pub index: usize,
    pub op: usize,
    /// `‖ψ^{(i)}(b)‖` in the block algebra.
    pub psi_norm: f64,
    /// `‖φ^{(i)}ψ^{(i)}(b)‖` on `ℓ²(X)`.
    pub phi_norm: f64,
    pub op_norm: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub index: usize,
    pub op: usize,
    pub measured: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEntry {
    pub index: usize,
    pub left: usize,
    pub right: usize,
    /// `‖ψ^{(i)}(a)ψ^{(i)}(b)‖`.
    pub product_norm: f64,
    /// `‖ab‖`.
    pub ab_norm: f64,
    /// `‖ab‖ + 2√(3/s_i)·M·K`.
    pub chain_bound: f64,
    /// The chain bound plus the compression terms `r_a‖b‖ + ‖a‖r_b`.
    pub chain_with_residuals: f64,
    pub chain_ok: bool,
    /// `‖ab‖ + 1/t_i`.
    pub target: f64,
    pub margin: f64,
    pub ok: bool,
    /// `‖φ(x)φ(y) − φ(xy)‖` entrywise, with `xy` taken blockwise.
    pub homomorphism_defect: f64,
    /// `‖φ(x)φ(y)‖ ≤ ‖xy‖` in the block algebra.
    pub order_zero_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproximationEntry {
    pub op: usize,
    /// `‖ΦΨ(b) − b‖`.
    pub error: f64,
    /// `Σ_i ‖[b, f_i]‖`.
    pub commutator_sum: f64,
    /// `Σ_i` off-block residuals.
    pub residual_sum: f64,
    /// `‖(Σ f_i² − 1) b‖`, zero on a cover.
    pub coverage_term: f64,
    pub chain: f64,
    pub chain_ok: bool,
    /// `M·Σ_i √(3/s_i)` plus the residual bounds.
    pub schedule_bound: f64,
    pub target: f64,
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityEntry {
    pub index: usize,
    pub op: usize,
    /// Smallest eigenvalue of `φ^{(i)}ψ^{(i)}(b*b)`.
    pub min_eigenvalue: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NfqReport {
    pub q: u64,
    pub scales: Vec<u64>,
    pub s: Vec<u64>,
    pub m: u64,
    pub k: f64,
    pub covered: bool,
    pub blocks_disjoint: Vec<bool>,
    /// `Σ_i √(3/s_i) < 1/(3qM)`.
    pub schedule_sum: f64,
    pub schedule_ok: bool,
    pub contractivity: Vec<ContractivityEntry>,
    pub residuals: Vec<ResidualEntry>,
    pub pairs: Vec<PairEntry>,
    pub approximation: Vec<ApproximationEntry>,
    pub positivity: Vec<PositivityEntry>,
    pub condition_products: bool,
    pub condition_approximation: bool,
    pub structure_ok: bool,
    pub passed: bool,
}

/// Checks the product and approximation conditions with measured norms.
///
/// Condition (1) is checked with `a′ = a` and `b′ = b`.
pub fn verify_nfq(
    space: &FiniteMetricSpace,
    witness: &CpcWitness,
    ops: &[RoeOperator],
    q: u64,
    scales: &[u64],
    opts: &NormOptions,
) -> Result<NfqReport, RoeError> {
    let c = &witness.constants;
    if ops.is_empty() {
        return Err(RoeError::EmptyFamily);
    }
    if q == 0 {
        return Err(RoeError::ZeroQ);
    }
    if scales.len() != witness.len() || scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RoeError::BadScales);
    }
    for op in ops {
        check_size(space, op)?;
    }
    let n_idx = witness.len();
    let norms = ops
        .iter()
        .map(|op| spectral_norm(op, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let psis: Vec<Vec<RoeOperator>> = (0..n_idx)
        .map(|i| ops.iter().map(|b| witness.psi(b, i)).collect())
        .collect();

    let pairs_ij: Vec<(usize, usize)> = (0..n_idx).flat_map(|i| (0..ops.len()).map(move |j| (i, j))).collect();

    let contractivity = pairs_ij
        .par_iter()
        .map(|&(i, j)| {
            let x = &psis[i][j];
            let psi_norm = witness.block_norm(x, i);
            let phi_norm = spectral_norm(x, opts)?;
            Ok(ContractivityEntry {
                index: i,
                op: j,
                psi_norm,
                phi_norm,
                op_norm: norms[j],
                ok: psi_norm <= norms[j] + NORM_SLACK && phi_norm <= psi_norm + NORM_SLACK,
            })
        })
        .collect::<Result<Vec<_>, RoeError>>()?;

    let residuals = pairs_ij
        .par_iter()
        .map(|&(i, j)| {
            let measured = witness.offblock_residual(&ops[j], i, opts)?;
            let bound = witness.residual_bound(space, &ops[j], norms[j], i);
            Ok(ResidualEntry {
                index: i,
                op: j,
                measured,
                bound,
                ok: measured <= bound + NORM_SLACK,
            })
        })
        .collect::<Result<Vec<_>, RoeError>>()?;
    let residual = |i: usize, j: usize| residuals[i * ops.len() + j].measured;

    let triples: Vec<(usize, usize, usize)> = (0..n_idx)
        .flat_map(|i| (0..ops.len()).flat_map(move |j| (0..ops.len()).map(move |k| (i, j, k))))
        .collect();
    let pairs = triples
        .par_iter()
        .map(|&(i, j, k)| {
            let (x, y) = (&psis[i][j], &psis[i][k]);
            let product = x.mul(y);
            let product_norm = spectral_norm(&product, opts)?;
            let ab_norm = spectral_norm(&ops[j].mul(&ops[k]), opts)?;
            let s = c.s[i] as f64;
            let chain_bound = ab_norm + 2.0 * (3.0 / s).sqrt() * c.m as f64 * c.k;
            let chain_with_residuals = chain_bound + residual(i, j) * norms[k] + norms[j] * residual(i, k);
            let target = ab_norm + 1.0 / scales[i] as f64;
            let homomorphism_defect = block_product_defect(witness, i, x, y, &product);
            let order_zero_ok = product_norm <= witness.block_norm(&product, i) + NORM_SLACK;
            Ok(PairEntry {
                index: i,
                left: j,
                right: k,
                product_norm,
                ab_norm,
                chain_bound,
                chain_with_residuals,
                chain_ok: product_norm <= chain_with_residuals + NORM_SLACK,
                target,
                margin: target - product_norm,
                ok: product_norm < target,
                homomorphism_defect,
                order_zero_ok,
            })
        })
        .collect::<Result<Vec<_>, RoeError>>()?;

    let sum_sq: Vec<f64> = (0..space.len()).map(|x| witness.partition.sum_sq(x)).collect();
    let approximation = (0..ops.len())
        .into_par_iter()
        .map(|j| {
            let b = &ops[j];
            let error = spectral_norm(&witness.phi_psi(b).sub(b), opts)?;
            let mut commutator_sum = 0.0;
            for f in &witness.partition.f {
                commutator_sum += spectral_norm(&b.commutator_with(f), opts)?;
            }
            let residual_sum: f64 = (0..n_idx).map(|i| residual(i, j)).sum();
            let defect: Vec<f64> = sum_sq.iter().map(|v| v - 1.0).collect();
            let ones = vec![1.0; space.len()];
            let coverage_term = spectral_norm(&b.sandwich(&defect, &ones), opts)?;
            let chain = commutator_sum + residual_sum + coverage_term;
            let schedule_bound = c.m as f64 * c.s.iter().map(|&s| (3.0 / s as f64).sqrt()).sum::<f64>()
                + (0..n_idx)
                    .map(|i| witness.residual_bound(space, b, norms[j], i))
                    .sum::<f64>();
            let target = 1.0 / q as f64;
            Ok(ApproximationEntry {
                op: j,
                error,
                commutator_sum,
                residual_sum,
                coverage_term,
                chain,
                chain_ok: error <= chain + NORM_SLACK,
                schedule_bound,
                target,
                margin: target - error,
                ok: error < target,
            })
        })
        .collect::<Result<Vec<_>, RoeError>>()?;

    let positivity: Vec<PositivityEntry> = pairs_ij
        .par_iter()
        .map(|&(i, j)| {
            let positive = ops[j].adjoint().mul(&ops[j]);
            let min = witness.block_min_eigenvalue(&witness.psi(&positive, i), i);
            PositivityEntry {
                index: i,
                op: j,
                min_eigenvalue: min,
                ok: min >= -POSITIVITY_TOL,
            }
        })
        .collect();

    let covered = witness.partition.covered.iter().all(|&v| v);
    let blocks_disjoint = witness.blocks_disjoint();
    let schedule_sum: f64 = c.s.iter().map(|&s| (3.0 / s as f64).sqrt()).sum();
    let schedule_ok = schedule_sum < 1.0 / (3 * c.q * c.m) as f64;
    let condition_products = pairs.iter().all(|p| p.ok);
    let condition_approximation = approximation.iter().all(|a| a.ok);
    let structure_ok = covered
        && blocks_disjoint.iter().all(|&b| b)
        && contractivity.iter().all(|e| e.ok)
        && residuals.iter().all(|e| e.ok)
        && pairs.iter().all(|p| p.chain_ok && p.order_zero_ok && p.homomorphism_defect <= NORM_SLACK)
        && approximation.iter().all(|a| a.chain_ok)
        && positivity.iter().all(|p| p.ok);
    Ok(NfqReport {
        q,
        scales: scales.to_vec(),
        s: c.s.clone(),
        m: c.m,
        k: c.k,
        covered,
        blocks_disjoint,
        schedule_sum,
        schedule_ok,
        contractivity,
        residuals,
        pairs,
        approximation,
        positivity,
        condition_products,
        condition_approximation,
        structure_ok,
        passed: condition_products && condition_approximation && structure_ok && schedule_ok,
    })
}

/// Largest entry of `xy − ⊕_U (P_U x P_U)(P_U y P_U)`.
fn block_product_defect(witness: &CpcWitness, i: usize, x: &RoeOperator, y: &RoeOperator, xy: &RoeOperator) -> f64 {
    let mut defect = xy.max_entry_diff(&xy.compress(&witness.block_of[i]));
    for block in &witness.blocks[i] {
        let blockwise = x.restrict(block) * y.restrict(block);
        let diff = (blockwise - xy.restrict(block)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        defect = defect.max(diff);
    }
    defect
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::SubsetFamily;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pipeline(ops: &[RoeOperator], bound: i64) -> (FiniteMetricSpace, CpcOutcome) {
        let x = FiniteMetricSpace::interval(200);
        let out = build_cpc_witness(
            &x,
            ops,
            1,
            &[1, 2],
            Rational::from_integer(bound),
            &SearchOptions::default(),
            &NormOptions::default(),
        )
        .unwrap();
        (x, out)
    }

    fn unwrap_witness(out: CpcOutcome) -> CpcWitness {
        match out {
            CpcOutcome::Witness { witness } => *witness,
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn constants_for_shift_family() {
        let x = FiniteMetricSpace::interval(200);
        let s = RoeOperator::shift(201);
        let t = s.add(&s.adjoint());
        let c = cpc_constants(&x, &[t], 1, &[1, 2], &NormOptions::default()).unwrap();
        // ‖t‖ = 2cos(π/202), N_1 = 3, so M = 6 and 3qM = 18.
        assert_eq!(c.m, 6);
        assert_eq!(c.base, 18);
        assert_eq!(c.s, vec![15552, 62208]);
        assert!(c.s.iter().zip(&c.thresholds).all(|(&s, &t)| s as f64 > t));
    }

    #[test]
    fn scales_stay_distinct() {
        let x = FiniteMetricSpace::interval(4);
        let c = cpc_constants(&x, &[RoeOperator::identity(5)], 1, &[1, 2, 3], &NormOptions::default()).unwrap();
        assert!(c.s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn identity_is_reproduced() {
        let (x, out) = pipeline(&[RoeOperator::identity(201)], 100);
        let w = unwrap_witness(out);
        let id = RoeOperator::identity(201);
        let err = spectral_norm(&w.phi_psi(&id).sub(&id), &NormOptions::default()).unwrap();
        assert!(err < 1e-12, "{err}");
        let r = verify_nfq(&x, &w, &[id], 1, &[1, 2], &NormOptions::default()).unwrap();
        assert!(r.passed, "{r:#?}");
    }

    #[test]
    fn diagonal_is_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = RoeOperator::random_diagonal(201, &mut rng);
        let (x, out) = pipeline(std::slice::from_ref(&d), 100);
        let w = unwrap_witness(out);
        assert!(spectral_norm(&w.phi_psi(&d).sub(&d), &NormOptions::default()).unwrap() < 1e-12);
        for i in 0..2 {
            assert_eq!(w.offblock_residual(&d, i, &NormOptions::default()).unwrap(), 0.0);
        }
        let r = verify_nfq(&x, &w, &[d], 1, &[1, 2], &NormOptions::default()).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn shift_family_passes() {
        let s = RoeOperator::shift(201);
        let ops = [s.add(&s.adjoint())];
        let (x, out) = pipeline(&ops, 100);
        let w = unwrap_witness(out);
        let r = verify_nfq(&x, &w, &ops, 1, &[1, 2], &NormOptions::default()).unwrap();
        assert!(r.passed, "{r:#?}");
        assert!(r.pairs.iter().all(|p| p.margin > 0.0));
    }

    #[test]
    fn small_bound_is_infeasible() {
        let s = RoeOperator::shift(201);
        let (_, out) = pipeline(&[s.add(&s.adjoint())], 40);
        assert!(matches!(out, CpcOutcome::Infeasible { .. }));
    }

    #[test]
    fn residual_against_bound_with_real_blocks() {
        // A hand-made witness with s_0 = 108 = 3·3²·4, so blocks do not fill the space.
        let x = FiniteMetricSpace::interval(200);
        let shift = RoeOperator::shift(201);
        let constants = CpcConstants {
            q: 1,
            scales: vec![1, 2],
            norms: vec![1.0],
            propagations: vec![Rational::from_integer(1)],
            ball_counts: vec![3],
            k: 3.0,
            m: 1,
            base: 3,
            thresholds: vec![0.0, 0.0],
            s: vec![108, 432],
        };
        let decomposition = CoverDecomposition {
            families: vec![
                SubsetFamily::new(vec![(0..=50).collect(), (159..=200).collect()]).unwrap(),
                SubsetFamily::new(vec![(51..=158).collect()]).unwrap(),
            ],
            coloring: None,
        };
        let w = CpcWitness::assemble(&x, constants, decomposition).unwrap();
        assert_eq!(w.blocks[0][0], (0..=103).collect::<Vec<_>>());
        assert_eq!(w.blocks[0][1], (106..=200).collect::<Vec<_>>());
        assert_eq!(w.blocks_disjoint(), vec![true, true]);
        let opts = NormOptions::default();
        let r = w.offblock_residual(&shift, 0, &opts).unwrap();
        let bound = w.residual_bound(&x, &shift, 1.0, 0);
        assert!((bound - 3.0 / 108.0).abs() < 1e-15);
        assert!(r <= bound, "{r} > {bound}");
        // Brute force: the discarded entries are f(x)f(y) for the cut pairs.
        let f = &w.partition.f[0];
        let brute = (1..201)
            .filter(|&p| w.block_of[0][p] != w.block_of[0][p - 1])
            .map(|p| f[p] * f[p - 1])
            .fold(0.0, f64::max);
        assert!((r - brute).abs() < 1e-12);
        // An operator supported deep inside one block loses nothing.
        let inner = RoeOperator::from_entries(201, [(10, 11, super::super::Complex::new(1.0, 0.0))]).unwrap();
        assert_eq!(w.offblock_residual(&inner, 0, &opts).unwrap(), 0.0);
    }
}
