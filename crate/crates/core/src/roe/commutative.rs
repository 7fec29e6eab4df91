//! Evaluation witnesses for functions on a finite net.
//!
//! A cover `V = V_0 ∪ ⋯ ∪ V_n` is pruned until every set `V` has a private
//! point `x_V`. Then `ψ^{(i)}(a) = (a(x_V))_{V ∈ V_i}` and `φ^{(i)}` sends
//! the unit at `V` to `h_V = w_V / Σ_W w_W` with `w_V(x) = d(x, X ∖ V)`.

use serde::Serialize;

use crate::metric::{FiniteMetricSpace, Rational, SubsetFamily};

use super::RoeError;

/// Tolerance for `Σ h_V = 1` and `h_V(x_V) = 1`.
pub const PARTITION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutativeWitness {
    /// Surviving sets of each family.
    pub families: Vec<Vec<Vec<usize>>>,
    /// Sets removed for lack of a private point, as `(family, set)`.
    pub pruned: Vec<(usize, Vec<usize>)>,
    /// `x_V` for each surviving set.
    pub marked: Vec<Vec<usize>>,
    /// `h[i][v][x]`.
    pub h: Vec<Vec<Vec<f64>>>,
}

/// Builds the witness after checking that every function oscillates by
/// less than `1/q` on every set.
pub fn build_commutative_witness(
    space: &FiniteMetricSpace,
    cover: &[SubsetFamily],
    funcs: &[Vec<f64>],
    q: u64,
) -> Result<CommutativeWitness, RoeError> {
    if q == 0 {
        return Err(RoeError::ZeroQ);
    }
    let n = space.len();
    for f in funcs {
        if f.len() != n {
            return Err(RoeError::SizeMismatch { expected: n, got: f.len() });
        }
    }
    let mut count = vec![0usize; n];
    for family in cover {
        family.check_points(space)?;
        for set in family.sets() {
            for &x in set {
                count[x] += 1;
            }
        }
    }
    if let Some(x) = count.iter().position(|&c| c == 0) {
        return Err(RoeError::Uncovered(x));
    }
    let limit = 1.0 / q as f64;
    for (fi, f) in funcs.iter().enumerate() {
        for (i, family) in cover.iter().enumerate() {
            for (v, set) in family.sets().iter().enumerate() {
                let (lo, hi) = set
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(f[x]), hi.max(f[x])));
                if hi - lo >= limit {
                    return Err(RoeError::Oscillation {
                        function: fi,
                        family: i,
                        set: v,
                        oscillation: hi - lo,
                    });
                }
            }
        }
    }

    // Drop the first set without a private point until none is left.
    let mut alive: Vec<Vec<bool>> = cover.iter().map(|f| vec![true; f.sets().len()]).collect();
    let mut pruned = Vec::new();
    loop {
        let victim = cover.iter().enumerate().find_map(|(i, family)| {
            family
                .sets()
                .iter()
                .enumerate()
                .find(|&(v, set)| alive[i][v] && set.iter().all(|&x| count[x] > 1))
                .map(|(v, _)| (i, v))
        });
        let Some((i, v)) = victim else { break };
        alive[i][v] = false;
        for &x in &cover[i].sets()[v] {
            count[x] -= 1;
        }
        pruned.push((i, cover[i].sets()[v].clone()));
    }

    let families: Vec<Vec<Vec<usize>>> = cover
        .iter()
        .enumerate()
        .map(|(i, family)| {
            family
                .sets()
                .iter()
                .enumerate()
                .filter(|&(v, _)| alive[i][v])
                .map(|(_, s)| s.clone())
                .collect()
        })
        .collect();
    let marked: Vec<Vec<usize>> = families
        .iter()
        .map(|family| {
            family
                .iter()
                .map(|set| *set.iter().find(|&&x| count[x] == 1).expect("pruning leaves a private point"))
                .collect()
        })
        .collect();

    let weights: Vec<Vec<Vec<u64>>> = families
        .iter()
        .map(|family| family.iter().map(|set| complement_distance(space, set)).collect())
        .collect();
    let mut total = vec![0u64; n];
    for w in weights.iter().flatten() {
        for (t, &v) in total.iter_mut().zip(w) {
            *t += v;
        }
    }
    let h = weights
        .iter()
        .map(|family| {
            family
                .iter()
                .map(|w| w.iter().zip(&total).map(|(&v, &t)| v as f64 / t as f64).collect())
                .collect()
        })
        .collect();
    Ok(CommutativeWitness {
        families,
        pruned,
        marked,
        h,
    })
}

/// `d(x, X ∖ V)` in space units, 0 off `V`; constant 1 when `V = X`.
fn complement_distance(space: &FiniteMetricSpace, set: &[usize]) -> Vec<u64> {
    let mut inside = vec![false; space.len()];
    for &x in set {
        inside[x] = true;
    }
    let outside: Vec<usize> = (0..space.len()).filter(|&x| !inside[x]).collect();
    (0..space.len())
        .map(|x| {
            if !inside[x] {
                0
            } else {
                space.point_set_distance_units(x, &outside).unwrap_or(1)
            }
        })
        .collect()
}

impl CommutativeWitness {
    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }

    /// `ψ^{(i)}(a)`: values at the marked points of family `i`.
    pub fn psi(&self, a: &[f64], i: usize) -> Vec<f64> {
        self.marked[i].iter().map(|&x| a[x]).collect()
    }

    /// `φ^{(i)}(c) = Σ_V c_V h_V`.
    pub fn phi(&self, c: &[f64], i: usize) -> Vec<f64> {
        let n = self.h[i].first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for (cv, hv) in c.iter().zip(&self.h[i]) {
            for (o, &v) in out.iter_mut().zip(hv) {
                *o += cv * v;
            }
        }
        out
    }

    /// `Σ_i φ^{(i)}ψ^{(i)}(a)`.
    pub fn phi_psi(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len()];
        for i in 0..self.len() {
            for (o, v) in out.iter_mut().zip(self.phi(&self.psi(a, i), i)) {
                *o += v;
            }
        }
        out
    }

    /// Points where `h[i][v]` is positive.
    pub fn support(&self, i: usize, v: usize) -> Vec<usize> {
        self.h[i][v]
            .iter()
            .enumerate()
            .filter(|&(_, &h)| h > 0.0)
            .map(|(x, _)| x)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductEntry {
    pub index: usize,
    pub left: usize,
    pub right: usize,
    /// `max_V |a(x_V) b(x_V)|`.
    pub product_norm: f64,
    /// `max_x |a(x) b(x)|`.
    pub ab_norm: f64,
    /// `‖ab‖ − ‖ψ(a)ψ(b)‖`, never negative for evaluations.
    pub slack: f64,
    pub target: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupEntry {
    pub function: usize,
    /// `max_x |φψ(a)(x) − a(x)|`.
    pub error: f64,
    pub target: f64,
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiameterEntry {
    pub index: usize,
    pub set: usize,
    pub diameter: String,
    pub set_diameter: String,
    pub limit: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MfqReport {
    pub q: u64,
    pub scales: Vec<u64>,
    /// `h_V ≥ 0`, `Σ h_V = 1`, `supp h_V ⊆ V`, `h_V(x_V) = 1`, private marks.
    pub partition_ok: bool,
    /// Supports within each family are disjoint, so each `φ^{(i)}` is
    /// a contractive order-zero map.
    pub order_zero_ok: bool,
    pub products: Vec<ProductEntry>,
    pub approximation: Vec<SupEntry>,
    pub diameters: Vec<DiameterEntry>,
    pub condition_products: bool,
    pub condition_approximation: bool,
    pub condition_diameters: bool,
    pub passed: bool,
}

/// Checks the product, approximation and support-diameter conditions.
pub fn verify_mfq(
    space: &FiniteMetricSpace,
    w: &CommutativeWitness,
    funcs: &[Vec<f64>],
    q: u64,
    scales: &[u64],
) -> Result<MfqReport, RoeError> {
    if q == 0 {
        return Err(RoeError::ZeroQ);
    }
    if scales.len() != w.len() || scales.iter().any(|&t| t == 0) {
        return Err(RoeError::BadScales);
    }
    let n = space.len();
    for f in funcs {
        if f.len() != n {
            return Err(RoeError::SizeMismatch { expected: n, got: f.len() });
        }
    }

    let mut partition_ok = true;
    let mut order_zero_ok = true;
    for x in 0..n {
        let sum: f64 = w.h.iter().flatten().map(|h| h[x]).sum();
        partition_ok &= (sum - 1.0).abs() <= PARTITION_TOL;
    }
    for (i, family) in w.families.iter().enumerate() {
        let mut seen = vec![false; n];
        for (v, set) in family.iter().enumerate() {
            let support = w.support(i, v);
            partition_ok &= w.h[i][v].iter().all(|&h| h >= 0.0);
            partition_ok &= support.iter().all(|x| set.binary_search(x).is_ok());
            let mark = w.marked[i][v];
            partition_ok &= (w.h[i][v][mark] - 1.0).abs() <= PARTITION_TOL;
            partition_ok &= w
                .families
                .iter()
                .enumerate()
                .flat_map(|(j, f)| f.iter().enumerate().map(move |(u, s)| (j, u, s)))
                .all(|(j, u, s)| (j, u) == (i, v) || s.binary_search(&mark).is_err());
            for x in support {
                order_zero_ok &= !seen[x];
                seen[x] = true;
            }
        }
    }

    let mut products = Vec::new();
    for (i, &t) in scales.iter().enumerate() {
        for (j, a) in funcs.iter().enumerate() {
            for (k, b) in funcs.iter().enumerate() {
                let product_norm = w.marked[i].iter().map(|&x| (a[x] * b[x]).abs()).fold(0.0, f64::max);
                let ab_norm = a.iter().zip(b).map(|(u, v)| (u * v).abs()).fold(0.0, f64::max);
                let target = ab_norm + 1.0 / t as f64;
                products.push(ProductEntry {
                    index: i,
                    left: j,
                    right: k,
                    product_norm,
                    ab_norm,
                    slack: ab_norm - product_norm,
                    target,
                    ok: product_norm < target,
                });
            }
        }
    }

    let approximation: Vec<SupEntry> = funcs
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let error = w
                .phi_psi(a)
                .iter()
                .zip(a)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            let target = 1.0 / q as f64;
            SupEntry {
                function: j,
                error,
                target,
                margin: target - error,
                ok: error < target,
            }
        })
        .collect();

    let mut diameters = Vec::new();
    for (i, &t) in scales.iter().enumerate() {
        let limit = Rational::new(1, t as i64);
        for (v, set) in w.families[i].iter().enumerate() {
            let diameter = space.diameter_of(&w.support(i, v));
            diameters.push(DiameterEntry {
                index: i,
                set: v,
                diameter: diameter.to_string(),
                set_diameter: space.diameter_of(set).to_string(),
                limit: limit.to_string(),
                ok: diameter < limit,
            });
        }
    }

    let condition_products = products.iter().all(|p| p.ok);
    let condition_approximation = approximation.iter().all(|a| a.ok);
    let condition_diameters = diameters.iter().all(|d| d.ok);
    Ok(MfqReport {
        q,
        scales: scales.to_vec(),
        partition_ok,
        order_zero_ok,
        products,
        approximation,
        diameters,
        condition_products,
        condition_approximation,
        condition_diameters,
        passed: partition_ok && order_zero_ok && condition_products && condition_approximation && condition_diameters,
    })
}

/// Sets `[start, start + len]` of an `n`-step net of `[0, 1]` (ids `0..=n`),
/// taken every `stride` steps from `offset`.
pub fn net_intervals(n: usize, offset: usize, len: usize, stride: usize) -> Vec<Vec<usize>> {
    (offset..=n)
        .step_by(stride.max(1))
        .map(|s| (s..=(s + len).min(n)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> FiniteMetricSpace {
        FiniteMetricSpace::scaled_interval(64, 64)
    }

    fn mesh_cover() -> Vec<SubsetFamily> {
        vec![
            SubsetFamily::new(net_intervals(64, 0, 8, 16)).unwrap(),
            SubsetFamily::new(net_intervals(63, 7, 8, 16)).unwrap(),
        ]
    }

    fn funcs() -> Vec<Vec<f64>> {
        let xs: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        vec![xs.clone(), xs.iter().map(|x| x * x).collect(), vec![1.0; 65]]
    }

    #[test]
    fn cover_shape() {
        let c = mesh_cover();
        assert_eq!(c[0].sets().len(), 5);
        assert_eq!(c[0].sets()[4], vec![64]);
        assert_eq!(c[1].sets()[3], (55..=63).collect::<Vec<_>>());
    }

    #[test]
    fn mesh_eighth_passes() {
        let x = net();
        let w = build_commutative_witness(&x, &mesh_cover(), &funcs(), 4).unwrap();
        assert!(w.pruned.is_empty());
        let r = verify_mfq(&x, &w, &funcs(), 4, &[5, 6]).unwrap();
        assert!(r.passed, "{r:#?}");
        assert!(r.approximation.iter().all(|a| a.error < 0.25));
        assert!(r.products.iter().all(|p| p.slack >= 0.0));
        // Constants are reproduced exactly.
        assert_eq!(r.approximation[2].error, 0.0);
    }

    #[test]
    fn strict_diameter_threshold() {
        let x = net();
        let w = build_commutative_witness(&x, &mesh_cover(), &funcs(), 4).unwrap();
        let r = verify_mfq(&x, &w, &funcs(), 4, &[8, 8]).unwrap();
        assert!(!r.condition_diameters);
        // Exactly the sets of diameter 1/8 fail.
        for d in &r.diameters {
            assert_eq!(d.ok, d.diameter != "1/8", "{d:?}");
        }
        assert!(r.condition_approximation && r.condition_products);
    }

    #[test]
    fn single_set_cover() {
        let x = net();
        let cover = vec![SubsetFamily::new(vec![(0..=64).collect()]).unwrap()];
        let one = vec![vec![1.0; 65]];
        let w = build_commutative_witness(&x, &cover, &one, 4).unwrap();
        assert_eq!(w.marked, vec![vec![0]]);
        assert_eq!(w.phi_psi(&one[0]), one[0]);
    }

    #[test]
    fn pruning_removes_redundant_sets() {
        let x = FiniteMetricSpace::interval(4);
        let cover = vec![
            SubsetFamily::new(vec![vec![1, 2]]).unwrap(),
            SubsetFamily::new(vec![vec![0, 1, 2], vec![3, 4]]).unwrap(),
        ];
        let w = build_commutative_witness(&x, &cover, &[], 1).unwrap();
        assert_eq!(w.pruned, vec![(0, vec![1, 2])]);
        assert_eq!(w.marked, vec![vec![], vec![0, 3]]);
    }

    #[test]
    fn oscillation_is_checked() {
        let x = net();
        let cover = vec![SubsetFamily::new(vec![(0..=64).collect()]).unwrap()];
        let err = build_commutative_witness(&x, &cover, &funcs()[..1], 4);
        assert!(matches!(err, Err(RoeError::Oscillation { .. })));
        let err = build_commutative_witness(&x, &[SubsetFamily::new(vec![vec![0]]).unwrap()], &[], 4);
        assert!(matches!(err, Err(RoeError::Uncovered(1))));
    }
}
