//! Hölder-½ partitions of unity subordinate to decompositions with growing gaps.
//!
//! With `g_i(x) = max(1 − d(x, ⋃U_i)/(t_i/2), 0)`, the functions are
//! `f_n = √g_n` and `f_i = √(max_{j≥i} g_j − max_{j>i} g_j)`, so that
//! `Σ f_i² = max_i g_i`, which is 1 on the covered set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covers::CoverDecomposition;
use crate::metric::{FiniteMetricSpace, MetricError, Rational};

/// Tolerance for identities such as `Σ f_i² = 1`.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Slack allowed on inequalities such as `C_i ≤ √(3/t_i)`.
pub const INEQUALITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("q must be positive")]
    ZeroQ,
    #[error("{value} is not of the form 3·{base}²·4^k with k ≥ 1")]
    NotAdmissible { value: u64, base: u64 },
    #[error("schedule must increase strictly")]
    NotIncreasing,
    #[error("schedule overflows 64 bits")]
    Overflow,
    #[error("decomposition has {families} families for {scales} scales")]
    LengthMismatch { families: usize, scales: usize },
    #[error("family {index} is not {gap}-disjoint: sets {first} and {second} are too close")]
    NotDisjoint {
        index: usize,
        gap: u64,
        first: usize,
        second: usize,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Increasing scales `t_0 < ⋯ < t_n`, each `3·base²·4^k` with `k ≥ 1`.
///
/// `base` is `q` for the plain partition; larger multiples of `q` give the
/// sparser schedules used by the approximation witnesses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub q: u64,
    pub base: u64,
    pub values: Vec<u64>,
}

/// `3·base²·4^k`, or `None` on overflow.
pub fn admissible_value(base: u64, k: u32) -> Option<u64> {
    3u64.checked_mul(base.checked_mul(base)?)?
        .checked_mul(4u64.checked_pow(k)?)
}

/// Whether `value = 3·base²·4^k` for some `k ≥ 1`.
pub fn is_admissible(value: u64, base: u64) -> bool {
    let unit = match 3u64.checked_mul(base).and_then(|v| v.checked_mul(base)) {
        Some(u) if u > 0 => u,
        _ => return false,
    };
    if value % unit != 0 {
        return false;
    }
    let r = value / unit;
    r >= 4 && r.is_power_of_two() && r.trailing_zeros() % 2 == 0
}

impl ScaleSchedule {
    /// `t_i = 3·q²·4^{i+1}`, the smallest admissible choice.
    pub fn standard(q: u64, n: usize) -> Result<Self, PartitionError> {
        if q == 0 {
            return Err(PartitionError::ZeroQ);
        }
        let values = (0..=n)
            .map(|i| admissible_value(q, i as u32 + 1).ok_or(PartitionError::Overflow))
            .collect::<Result<_, _>>()?;
        Ok(ScaleSchedule { q, base: q, values })
    }

    /// Checks admissibility against `base` (which must be a multiple of `q`).
    pub fn new(q: u64, base: u64, values: Vec<u64>) -> Result<Self, PartitionError> {
        if q == 0 || base == 0 {
            return Err(PartitionError::ZeroQ);
        }
        for &v in &values {
            if !is_admissible(v, base) {
                return Err(PartitionError::NotAdmissible { value: v, base });
            }
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PartitionError::NotIncreasing);
        }
        Ok(ScaleSchedule { q, base, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The functions `f_i` and `g_i` on every point, with the distances they
/// were built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionOfUnity {
    pub schedule: ScaleSchedule,
    /// `f[i][x]`.
    pub f: Vec<Vec<f64>>,
    /// `g[i][x]`.
    pub g: Vec<Vec<f64>>,
    /// `d(x, ⋃U_i)` in space units; `None` when family `i` is empty.
    pub dist_units: Vec<Vec<Option<u64>>>,
    /// Points lying in some set of some family.
    pub covered: Vec<bool>,
    #[serde(skip)]
    scale: u64,
}

impl PartitionOfUnity {
    /// Builds the partition from a decomposition whose family `i` is
    /// `t_i`-disjoint.
    pub fn build(
        space: &FiniteMetricSpace,
        decomposition: &CoverDecomposition,
        schedule: &ScaleSchedule,
    ) -> Result<Self, PartitionError> {
        let families = &decomposition.families;
        if families.len() != schedule.len() {
            return Err(PartitionError::LengthMismatch {
                families: families.len(),
                scales: schedule.len(),
            });
        }
        for (i, (family, &t)) in families.iter().zip(&schedule.values).enumerate() {
            family.check_points(space)?;
            let gap = space.units_ceil(Rational::from_integer(t as i64));
            let sets = family.sets();
            for (a, s) in sets.iter().enumerate() {
                for (b, u) in sets.iter().enumerate().skip(a + 1) {
                    if space.set_distance_units(s, u).unwrap_or(u64::MAX) < gap {
                        return Err(PartitionError::NotDisjoint {
                            index: i,
                            gap: t,
                            first: a,
                            second: b,
                        });
                    }
                }
            }
        }
        let n = space.len();
        let unions: Vec<Vec<usize>> = families.iter().map(|f| f.union()).collect();
        let mut covered = vec![false; n];
        for u in &unions {
            for &p in u {
                covered[p] = true;
            }
        }
        let dist_units: Vec<Vec<Option<u64>>> = unions
            .iter()
            .map(|u| {
                (0..n)
                    .into_par_iter()
                    .map(|x| space.point_set_distance_units(x, u))
                    .collect()
            })
            .collect();
        let scale = space.scale();
        let g: Vec<Vec<f64>> = dist_units
            .iter()
            .zip(&schedule.values)
            .map(|(d, &t)| d.iter().map(|&u| g_value(u, t, scale)).collect())
            .collect();
        let f = f_from_g(&g);
        Ok(PartitionOfUnity {
            schedule: schedule.clone(),
            f,
            g,
            dist_units,
            covered,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// `Σ_i f_i(x)²`.
    pub fn sum_sq(&self, x: usize) -> f64 {
        self.f.iter().map(|fi| fi[x] * fi[x]).sum()
    }

    /// Checks support, sum of squares and Hölder constants.
    pub fn verify(&self, space: &FiniteMetricSpace) -> PartitionReport {
        let n = space.len();
        let support_ok = self
            .f
            .iter()
            .zip(&self.dist_units)
            .zip(&self.schedule.values)
            .all(|((fi, di), &t)| {
                // f_i(x) > 0 only where d(x, ⋃U_i) < t_i/2, i.e. 2u < t·scale.
                fi.iter().zip(di).all(|(&v, &u)| {
                    v == 0.0 || u.is_some_and(|u| 2 * (u as u128) < (t as u128) * (self.scale as u128))
                })
            });
        let mut sum_sq_max_err: f64 = 0.0;
        let mut sum_sq_max: f64 = 0.0;
        for x in 0..n {
            let s = self.sum_sq(x);
            sum_sq_max = sum_sq_max.max(s);
            if self.covered[x] {
                sum_sq_max_err = sum_sq_max_err.max((s - 1.0).abs());
            }
        }
        let holder_constants: Vec<f64> = self.f.iter().map(|fi| holder_half(space, fi)).collect();
        let holder_bounds: Vec<f64> = self
            .schedule
            .values
            .iter()
            .map(|&t| (3.0 / t as f64).sqrt())
            .collect();
        let g_lipschitz: Vec<f64> = self.g.iter().map(|gi| lipschitz(space, gi)).collect();
        let holder_ok = holder_constants
            .iter()
            .zip(&holder_bounds)
            .all(|(c, b)| *c <= b + INEQUALITY_SLACK);
        let g_lipschitz_ok = g_lipschitz
            .iter()
            .zip(&self.schedule.values)
            .all(|(l, &t)| *l <= 2.0 / t as f64 + INEQUALITY_SLACK);
        let sum_holder: f64 = holder_constants.iter().sum();
        let sum_holder_ok = sum_holder < 1.0 / self.schedule.base as f64;
        PartitionReport {
            support_ok,
            sum_sq_max_err,
            sum_sq_ok: sum_sq_max_err <= IDENTITY_TOL && sum_sq_max <= 1.0 + IDENTITY_TOL,
            holder_constants,
            holder_bounds,
            holder_ok,
            sum_holder,
            sum_holder_ok,
            g_lipschitz,
            g_lipschitz_ok,
        }
    }
}

fn g_value(units: Option<u64>, t: u64, scale: u64) -> f64 {
    // 1 − d/(t/2) = (t·scale − 2u)/(t·scale), clamped at 0.
    match units {
        Some(u) => {
            let full = t as u128 * scale as u128;
            let twice = 2 * u as u128;
            if twice >= full {
                0.0
            } else {
                (full - twice) as f64 / full as f64
            }
        }
        None => 0.0,
    }
}

/// `f_i = √(max_{j≥i} g_j − max_{j>i} g_j)`, with `f_n = √g_n`.
pub fn f_from_g(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = g.len();
    if k == 0 {
        return Vec::new();
    }
    let n = g[0].len();
    let mut f = vec![vec![0.0; n]; k];
    for x in 0..n {
        let mut above = 0.0f64;
        for i in (0..k).rev() {
            let here = above.max(g[i][x]);
            f[i][x] = (here - above).max(0.0).sqrt();
            above = here;
        }
    }
    f
}

/// Exact pairwise `max |h(x) − h(y)| / d(x, y)^{1/2}` over `x ≠ y`.
pub fn holder_half(space: &FiniteMetricSpace, h: &[f64]) -> f64 {
    holder(space, h, 0.5)
}

/// Exact pairwise `max |h(x) − h(y)| / d(x, y)^α` over `x ≠ y`.
pub fn holder(space: &FiniteMetricSpace, h: &[f64], alpha: f64) -> f64 {
    let n = space.len();
    (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = 0.0f64;
            for y in (x + 1)..n {
                let diff = (h[x] - h[y]).abs();
                if diff > 0.0 {
                    best = best.max(diff / space.dist_f64(x, y).powf(alpha));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Exact pairwise Lipschitz constant.
pub fn lipschitz(space: &FiniteMetricSpace, h: &[f64]) -> f64 {
    holder(space, h, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    pub support_ok: bool,
    pub sum_sq_max_err: f64,
    pub sum_sq_ok: bool,
    pub holder_constants: Vec<f64>,
    pub holder_bounds: Vec<f64>,
    pub holder_ok: bool,
    pub sum_holder: f64,
    pub sum_holder_ok: bool,
    pub g_lipschitz: Vec<f64>,
    pub g_lipschitz_ok: bool,
}

impl PartitionReport {
    pub fn passed(&self) -> bool {
        self.support_ok && self.sum_sq_ok && self.holder_ok && self.sum_holder_ok && self.g_lipschitz_ok
    }
}

/// Cuts `0..len` into consecutive blocks assigned cyclically to `families`
/// families, so that blocks of one family are `(families − 1)·block + 1`
/// apart. With a single family, blocks are separated by `gap − 1` uncovered
/// points instead.
pub fn striped_decomposition(len: usize, families: usize, block: usize, gap: usize) -> CoverDecomposition {
    assert!(families > 0 && block > 0);
    let mut sets: Vec<Vec<Vec<usize>>> = vec![Vec::new(); families];
    let mut start = 0;
    let mut k = 0;
    while start < len {
        let end = (start + block).min(len);
        sets[k % families].push((start..end).collect());
        start = if families == 1 { end + gap.max(1) - 1 } else { end };
        k += 1;
    }
    CoverDecomposition {
        families: sets
            .into_iter()
            .map(|s| crate::metric::SubsetFamily::new(s).expect("blocks are nonempty"))
            .collect(),
        coloring: None,
    }
}

/// Block length making a cyclic striped decomposition `t`-disjoint in every family.
pub fn block_for_gap(families: usize, t: u64) -> usize {
    if families <= 1 {
        1
    } else {
        (t as usize - 1).div_ceil(families - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::SubsetFamily;
    use proptest::prelude::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(ScaleSchedule::standard(1, 1).unwrap().values, vec![12, 48]);
        assert_eq!(ScaleSchedule::standard(2, 0).unwrap().values, vec![48]);
        assert_eq!(ScaleSchedule::standard(3, 2).unwrap().values, vec![108, 432, 1728]);
        assert!(ScaleSchedule::new(1, 1, vec![12, 24]).is_err());
        assert!(ScaleSchedule::new(1, 1, vec![48, 12]).is_err());
        assert!(ScaleSchedule::new(1, 1, vec![3]).is_err());
        assert!(is_admissible(3 * 36 * 16, 6));
    }

    #[test]
    fn quarter_distance_gives_root_half() {
        let x = FiniteMetricSpace::interval(40);
        let d = CoverDecomposition {
            families: vec![SubsetFamily::new(vec![vec![0]]).unwrap()],
            coloring: None,
        };
        let s = ScaleSchedule::standard(1, 0).unwrap();
        let p = PartitionOfUnity::build(&x, &d, &s).unwrap();
        // t_0 = 12, so the point at distance 3 sits at t_0/4.
        assert!((p.f[0][3] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.f[0][0], 1.0);
        assert_eq!(p.f[0][6], 0.0);
        assert_eq!(p.f[0][40], 0.0);
    }

    #[test]
    fn one_point_space() {
        let x = FiniteMetricSpace::interval(0);
        let d = CoverDecomposition {
            families: vec![SubsetFamily::new(vec![vec![0]]).unwrap()],
            coloring: None,
        };
        let p = PartitionOfUnity::build(&x, &d, &ScaleSchedule::standard(1, 0).unwrap()).unwrap();
        let r = p.verify(&x);
        assert_eq!(r.holder_constants, vec![0.0]);
        assert_eq!(p.sum_sq(0), 1.0);
        assert!(r.passed());
    }

    #[test]
    fn rejects_close_sets() {
        let x = FiniteMetricSpace::interval(40);
        let d = CoverDecomposition {
            families: vec![SubsetFamily::new(vec![vec![0], vec![5]]).unwrap()],
            coloring: None,
        };
        assert!(matches!(
            PartitionOfUnity::build(&x, &d, &ScaleSchedule::standard(1, 0).unwrap()),
            Err(PartitionError::NotDisjoint { .. })
        ));
    }

    #[test]
    fn striped_interval_passes() {
        let x = FiniteMetricSpace::interval(600);
        for n in 0..3usize {
            let s = ScaleSchedule::standard(1, n).unwrap();
            let t = *s.values.last().unwrap();
            let d = striped_decomposition(x.len(), n + 1, block_for_gap(n + 1, t).max(5), t as usize);
            let p = PartitionOfUnity::build(&x, &d, &s).unwrap();
            let r = p.verify(&x);
            assert!(r.passed(), "n = {n}: {r:?}");
        }
    }

    proptest! {
        #[test]
        fn sqrt_difference_bound(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            prop_assert!((a.sqrt() - b.sqrt()).abs() <= (a - b).abs().sqrt() + 1e-9);
        }

        #[test]
        fn squares_sum_to_max(g in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 5), 1..5)) {
            let f = f_from_g(&g);
            for x in 0..5 {
                let sum: f64 = f.iter().map(|fi| fi[x] * fi[x]).sum();
                let max = g.iter().map(|gi| gi[x]).fold(0.0, f64::max);
                prop_assert!((sum - max).abs() < 1e-12);
            }
        }
    }
}
