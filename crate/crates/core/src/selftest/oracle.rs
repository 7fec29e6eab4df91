//! Slow reference computations, written without the library's search and
//! memoization, used as ground truth by the self-test.

use rand::Rng;

use crate::covers::{CoverDecomposition, Gap};
use crate::metric::{FiniteMetricSpace, Rational, SubsetFamily};
use crate::setfamily::Label;

/// `Ord M` by the defining recursion: 0 for the empty family, otherwise
/// `max_a (Ord M^{a} + 1)`. No memo and no pruning.
pub fn naive_ord(members: &[Vec<Label>]) -> u64 {
    let mut labels: Vec<Label> = members.iter().flatten().copied().collect();
    labels.sort_unstable();
    labels.dedup();
    labels
        .iter()
        .map(|&a| naive_ord(&restrict_one(members, a)) + 1)
        .max()
        .unwrap_or(0)
}

/// `M^{a} = {τ ≠ ∅ : a ∉ τ, τ ∪ {a} ∈ M}`.
fn restrict_one(members: &[Vec<Label>], a: Label) -> Vec<Vec<Label>> {
    let mut out: Vec<Vec<Label>> = members
        .iter()
        .filter(|m| m.len() > 1 && m.contains(&a))
        .map(|m| m.iter().copied().filter(|&l| l != a).collect())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Every nonempty subset of `{0, …, n − 1}` as a sorted label list, by
/// size and then lexicographically.
pub fn nonempty_subsets(n: usize) -> Vec<Vec<Label>> {
    let mut all: Vec<Vec<Label>> = (1u32..(1 << n))
        .map(|mask| (0..n as Label).filter(|&b| mask & (1 << b) != 0).collect())
        .collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    all
}

/// All inclusive families (downward closed, empty set excluded) over
/// `{0, …, n − 1}`, the empty family included.
pub fn all_inclusive_families(n: usize) -> Vec<Vec<Vec<Label>>> {
    let subsets = nonempty_subsets(n);
    let mut out = Vec::new();
    let mut chosen: Vec<bool> = vec![false; subsets.len()];
    extend_downsets(&subsets, 0, &mut chosen, &mut out);
    out
}

fn extend_downsets(subsets: &[Vec<Label>], k: usize, chosen: &mut Vec<bool>, out: &mut Vec<Vec<Vec<Label>>>) {
    if k == subsets.len() {
        out.push(
            subsets
                .iter()
                .zip(chosen.iter())
                .filter(|(_, &c)| c)
                .map(|(s, _)| s.clone())
                .collect(),
        );
        return;
    }
    extend_downsets(subsets, k + 1, chosen, out);
    // Subsets come before supersets, so every facet's status is known.
    let s = &subsets[k];
    let facets_present = s.len() == 1
        || (0..s.len()).all(|skip| {
            let facet: Vec<Label> = s.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &l)| l).collect();
            subsets.iter().position(|t| *t == facet).is_some_and(|p| chosen[p])
        });
    if facets_present {
        chosen[k] = true;
        extend_downsets(subsets, k + 1, chosen, out);
        chosen[k] = false;
    }
}

/// A random family over `{0, …, n − 1}`, each nonempty subset kept with
/// probability `p`.
pub fn random_family<R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<Vec<Label>> {
    nonempty_subsets(n).into_iter().filter(|_| rng.random_bool(p)).collect()
}

/// For every coloring of the points by `gaps.len()` colors, the largest
/// diameter of a color-`i` link-component (points not separated by
/// `gaps[i]`), one entry per color. Only the Pareto-minimal vectors are
/// kept. Plain enumeration over all colorings with rational distances.
pub fn brute_force_profile(space: &FiniteMetricSpace, gaps: &[Gap]) -> Vec<Vec<Rational>> {
    let n = space.len();
    let k = gaps.len();
    if k == 0 {
        return Vec::new();
    }
    let dist: Vec<Vec<Rational>> = (0..n).map(|x| (0..n).map(|y| space.dist(x, y)).collect()).collect();
    let linked = |i: usize, x: usize, y: usize| match gaps[i] {
        Gap::AtLeast(r) => dist[x][y] < r,
        Gap::Exceeds(r) => dist[x][y] <= r,
    };
    let zero = Rational::from_integer(0);
    let mut front: Vec<Vec<Rational>> = Vec::new();
    let total = (k as u64).pow(n as u32);
    for code in 0..total {
        let mut coloring = vec![0usize; n];
        let mut c = code;
        for slot in coloring.iter_mut() {
            *slot = (c % k as u64) as usize;
            c /= k as u64;
        }
        let mut diam = vec![zero; k];
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let color = coloring[start];
            let mut comp = vec![start];
            seen[start] = true;
            let mut head = 0;
            while head < comp.len() {
                let x = comp[head];
                head += 1;
                for y in 0..n {
                    if !seen[y] && coloring[y] == color && linked(color, x, y) {
                        seen[y] = true;
                        comp.push(y);
                    }
                }
            }
            for (a, &x) in comp.iter().enumerate() {
                for &y in &comp[a + 1..] {
                    diam[color] = diam[color].max(dist[x][y]);
                }
            }
        }
        if front.iter().any(|f| f.iter().zip(&diam).all(|(a, b)| a <= b)) {
            continue;
        }
        front.retain(|f| !f.iter().zip(&diam).all(|(a, b)| b <= a));
        front.push(diam);
    }
    front.sort();
    front
}

/// Whether some profile vector fits under `bounds`.
pub fn profile_admits(profile: &[Vec<Rational>], bounds: &[Rational]) -> bool {
    profile.iter().any(|p| p.iter().zip(bounds).all(|(d, b)| d <= b))
}

/// A three-family cover of the `(2m + 1) × (2m + 1)` ℓ∞ grid (`m ≥ 3`):
/// four corner squares of side `m`, the four arms of the middle cross
/// away from the centre, and the centre piece of radius 2.
///
/// Corner squares have diameter `m − 1`, arms `m − 3`, the centre 4.
/// Sets of one family are at least 2 apart.
pub fn cross_bricks(m: usize) -> CoverDecomposition {
    assert!(m >= 3, "cross bricks need m ≥ 3");
    let side = 2 * m + 1;
    let id = |x: usize, y: usize| x + side * y;
    let mut corners = Vec::new();
    for (x0, y0) in [(0, 0), (m + 1, 0), (0, m + 1), (m + 1, m + 1)] {
        let mut sq = Vec::new();
        for y in y0..y0 + m {
            for x in x0..x0 + m {
                sq.push(id(x, y));
            }
        }
        sq.sort_unstable();
        corners.push(sq);
    }
    let mut arms = vec![
        (0..m - 2).map(|x| id(x, m)).collect::<Vec<_>>(),
        (m + 3..side).map(|x| id(x, m)).collect(),
        (0..m - 2).map(|y| id(m, y)).collect(),
        (m + 3..side).map(|y| id(m, y)).collect(),
    ];
    for a in arms.iter_mut() {
        a.sort_unstable();
    }
    let mut centre: Vec<usize> = (m - 2..=m + 2)
        .map(|x| id(x, m))
        .chain((m - 2..=m + 2).filter(|&y| y != m).map(|y| id(m, y)))
        .collect();
    centre.sort_unstable();
    CoverDecomposition {
        families: vec![
            SubsetFamily::new(corners).expect("nonempty"),
            SubsetFamily::new(arms).expect("nonempty"),
            SubsetFamily::new(vec![centre]).expect("nonempty"),
        ],
        coloring: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covers::{verify, DecompositionConstraint, IndexConstraint};
    use crate::metric::Norm;

    #[test]
    fn naive_ord_small() {
        assert_eq!(naive_ord(&[]), 0);
        assert_eq!(naive_ord(&[vec![1]]), 1);
        assert_eq!(naive_ord(&[vec![1, 2]]), 2);
        assert_eq!(naive_ord(&[vec![1], vec![2, 3], vec![4]]), 2);
    }

    #[test]
    fn dedekind_counts() {
        // One less than the Dedekind numbers: the downset {∅} is the empty family.
        let counts: Vec<usize> = (0..=4).map(|n| all_inclusive_families(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 19, 167]);
    }

    #[test]
    fn brute_force_interval_nine() {
        let x = FiniteMetricSpace::interval(9);
        let r3 = Gap::AtLeast(Rational::from_integer(3));
        let r4 = Gap::AtLeast(Rational::from_integer(4));
        let two = Rational::from_integer(2);
        assert!(!profile_admits(&brute_force_profile(&x, &[r3]), &[two]));
        assert!(profile_admits(&brute_force_profile(&x, &[r3, r4]), &[two, two]));
    }

    #[test]
    fn cross_bricks_cover_the_grid() {
        let m = 8;
        let net = FiniteMetricSpace::scaled_grid(2, 2 * m + 1, Norm::Linf, 16);
        let d = cross_bricks(m);
        let sep = Rational::new(1, 16);
        let c = DecompositionConstraint {
            indices: [2, 3, 4]
                .iter()
                .map(|&t| IndexConstraint {
                    gap: Gap::Exceeds(sep),
                    bound: Rational::new(1, t),
                })
                .collect(),
        };
        let check = verify(&net, &d, &c).unwrap();
        assert!(check.is_ok(), "{check:?}");
    }
}
