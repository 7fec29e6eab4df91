//! Sparse finite-propagation operators on `ℓ²(X)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::metric::{FiniteMetricSpace, Rational, SpaceFile};

use super::RoeError;

pub type Complex = Complex64;

/// A matrix `T_{x,y} = ⟨T δ_y, δ_x⟩` stored row by row, without zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct RoeOperator {
    n: usize,
    /// `rows[x]` holds `(y, T_{x,y})` sorted by `y`.
    rows: Vec<Vec<(usize, Complex)>>,
}

impl RoeOperator {
    pub fn zero(n: usize) -> Self {
        RoeOperator {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![Complex::new(1.0, 0.0); n])
    }

    pub fn diagonal(values: &[Complex]) -> Self {
        RoeOperator {
            n: values.len(),
            rows: values
                .iter()
                .enumerate()
                .map(|(x, &v)| if v == Complex::ZERO { Vec::new() } else { vec![(x, v)] })
                .collect(),
        }
    }

    /// Multiplication by a real function.
    pub fn multiplication(h: &[f64]) -> Self {
        let values: Vec<Complex> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
        Self::diagonal(&values)
    }

    /// Sums duplicate entries and drops zeros.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, Complex)>,
    ) -> Result<Self, RoeError> {
        let mut rows: Vec<BTreeMap<usize, Complex>> = vec![BTreeMap::new(); n];
        for (x, y, v) in entries {
            if x >= n || y >= n {
                return Err(RoeError::IndexOutOfRange {
                    index: x.max(y),
                    len: n,
                });
            }
            *rows[x].entry(y).or_insert(Complex::ZERO) += v;
        }
        Ok(RoeOperator {
            n,
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().filter(|(_, v)| *v != Complex::ZERO).collect())
                .collect(),
        })
    }

    /// `δ_y ↦ δ_{y+1}` in point order; the unilateral shift on an interval.
    pub fn shift(n: usize) -> Self {
        RoeOperator {
            n,
            rows: (0..n)
                .map(|x| if x == 0 { Vec::new() } else { vec![(x - 1, Complex::new(1.0, 0.0))] })
                .collect(),
        }
    }

    /// `T_{x,y} = 1` when `0 < d(x, y) ≤ r`.
    pub fn adjacency(space: &FiniteMetricSpace, r: Rational) -> Self {
        let Some(limit) = space.units_floor(r) else {
            return Self::zero(space.len());
        };
        RoeOperator {
            n: space.len(),
            rows: (0..space.len())
                .map(|x| {
                    (0..space.len())
                        .filter(|&y| y != x && space.units(x, y) <= limit)
                        .map(|y| (y, Complex::new(1.0, 0.0)))
                        .collect()
                })
                .collect(),
        }
    }

    /// Each pair with `d(x, y) ≤ width` gets an entry with probability
    /// `density`, real and imaginary parts uniform in `[−1, 1]`.
    pub fn random_band<R: Rng>(space: &FiniteMetricSpace, width: Rational, density: f64, rng: &mut R) -> Self {
        let limit = space.units_floor(width).unwrap_or(0);
        let mut rows = vec![Vec::new(); space.len()];
        for (x, row) in rows.iter_mut().enumerate() {
            for y in 0..space.len() {
                if space.units(x, y) <= limit && rng.random_bool(density.clamp(0.0, 1.0)) {
                    let v = Complex::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
                    if v != Complex::ZERO {
                        row.push((y, v));
                    }
                }
            }
        }
        RoeOperator { n: space.len(), rows }
    }

    /// Real diagonal with entries uniform in `[−1, 1]`.
    pub fn random_diagonal<R: Rng>(n: usize, rng: &mut R) -> Self {
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self::multiplication(&values)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn rows(&self) -> &[Vec<(usize, Complex)>] {
        &self.rows
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(x, r)| r.iter().map(move |&(y, v)| (x, y, v)))
    }

    pub fn get(&self, x: usize, y: usize) -> Complex {
        match self.rows[x].binary_search_by_key(&y, |&(c, _)| c) {
            Ok(k) => self.rows[x][k].1,
            Err(_) => Complex::ZERO,
        }
    }

    /// Largest `|T_{x,y}|`.
    pub fn max_abs_entry(&self) -> f64 {
        self.entries().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    /// Most nonzero entries in any row or column.
    pub fn max_row_col_count(&self) -> usize {
        let mut cols = vec![0usize; self.n];
        for (_, y, _) in self.entries() {
            cols[y] += 1;
        }
        let rows = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        rows.max(cols.into_iter().max().unwrap_or(0))
    }

    /// `max d(x, y)` over nonzero entries, in space units; 0 for the zero operator.
    pub fn propagation_units(&self, space: &FiniteMetricSpace) -> u64 {
        self.entries().map(|(x, y, _)| space.units(x, y)).max().unwrap_or(0)
    }

    pub fn propagation(&self, space: &FiniteMetricSpace) -> Rational {
        space.to_rational(self.propagation_units(space))
    }

    pub fn adjoint(&self) -> Self {
        let mut rows: Vec<Vec<(usize, Complex)>> = vec![Vec::new(); self.n];
        for (x, y, v) in self.entries() {
            rows[y].push((x, v.conj()));
        }
        RoeOperator { n: self.n, rows }
    }

    pub fn scale(&self, c: Complex) -> Self {
        if c == Complex::ZERO {
            return Self::zero(self.n);
        }
        RoeOperator {
            n: self.n,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(y, v)| (y, v * c)).collect())
                .collect(),
        }
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        assert_eq!(self.n, other.n, "operator sizes differ");
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut out = Vec::with_capacity(a.len() + b.len());
                let (mut i, mut j) = (0, 0);
                while i < a.len() || j < b.len() {
                    let next = match (a.get(i), b.get(j)) {
                        (Some(&(ya, va)), Some(&(yb, vb))) if ya == yb => {
                            i += 1;
                            j += 1;
                            (ya, va + vb * sign)
                        }
                        (Some(&(ya, va)), Some(&(yb, _))) if ya < yb => {
                            i += 1;
                            (ya, va)
                        }
                        (Some(&(ya, va)), None) => {
                            i += 1;
                            (ya, va)
                        }
                        (_, Some(&(yb, vb))) => {
                            j += 1;
                            (yb, vb * sign)
                        }
                        (None, None) => unreachable!(),
                    };
                    if next.1 != Complex::ZERO {
                        out.push(next);
                    }
                }
                out
            })
            .collect();
        RoeOperator { n: self.n, rows }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "operator sizes differ");
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut acc: BTreeMap<usize, Complex> = BTreeMap::new();
                for &(k, a) in r {
                    for &(y, b) in &other.rows[k] {
                        *acc.entry(y).or_insert(Complex::ZERO) += a * b;
                    }
                }
                acc.into_iter().filter(|(_, v)| *v != Complex::ZERO).collect()
            })
            .collect();
        RoeOperator { n: self.n, rows }
    }

    /// `T v`.
    pub fn apply(&self, v: &[Complex]) -> Vec<Complex> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(y, a)| a * v[y]).sum())
            .collect()
    }

    /// `T* v`.
    pub fn apply_adjoint(&self, v: &[Complex]) -> Vec<Complex> {
        let mut out = vec![Complex::ZERO; self.n];
        for (x, r) in self.rows.iter().enumerate() {
            for &(y, a) in r {
                out[y] += a.conj() * v[x];
            }
        }
        out
    }

    /// `h · T · k` for real functions `h`, `k` acting by multiplication.
    pub fn sandwich(&self, h: &[f64], k: &[f64]) -> Self {
        RoeOperator {
            n: self.n,
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(x, r)| {
                    r.iter()
                        .map(|&(y, v)| (y, v * (h[x] * k[y])))
                        .filter(|(_, v)| *v != Complex::ZERO)
                        .collect()
                })
                .collect(),
        }
    }

    /// The commutator with multiplication by `h`, entrywise
    /// `[T, h]_{x,y} = T_{x,y} (h(x) − h(y))`, i.e. `h T − T h`.
    pub fn commutator_with(&self, h: &[f64]) -> Self {
        RoeOperator {
            n: self.n,
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(x, r)| {
                    r.iter()
                        .map(|&(y, v)| (y, v * (h[x] - h[y])))
                        .filter(|(_, v)| *v != Complex::ZERO)
                        .collect()
                })
                .collect(),
        }
    }

    /// Keeps the entries whose row and column lie in the same block.
    /// `block_of[x]` names the block of `x`, `None` outside every block.
    pub fn compress(&self, block_of: &[Option<usize>]) -> Self {
        RoeOperator {
            n: self.n,
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(x, r)| match block_of[x] {
                    Some(bx) => r.iter().copied().filter(|&(y, _)| block_of[y] == Some(bx)).collect(),
                    None => Vec::new(),
                })
                .collect(),
        }
    }

    /// The submatrix on `points` (rows and columns in the given order).
    pub fn restrict(&self, points: &[usize]) -> DMatrix<Complex> {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &p) in points.iter().enumerate() {
            pos[p] = k;
        }
        let mut m = DMatrix::zeros(points.len(), points.len());
        for (k, &x) in points.iter().enumerate() {
            for &(y, v) in &self.rows[x] {
                if pos[y] != usize::MAX {
                    m[(k, pos[y])] = v;
                }
            }
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<Complex> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (x, y, v) in self.entries() {
            m[(x, y)] = v;
        }
        m
    }

    /// Largest `|T_{x,y} − S_{x,y}|`.
    pub fn max_entry_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs_entry()
    }

    pub fn to_file(&self, space: Option<SpaceRef>) -> OperatorFile {
        OperatorFile {
            space,
            size: Some(self.n),
            entries: self.entries().map(|(x, y, v)| (x, y, v.re, v.im)).collect(),
        }
    }

    pub fn from_file(file: &OperatorFile, n: usize) -> Result<Self, RoeError> {
        if let Some(size) = file.size {
            if size != n {
                return Err(RoeError::SizeMismatch { expected: n, got: size });
            }
        }
        Self::from_entries(
            n,
            file.entries.iter().map(|&(x, y, re, im)| (x, y, Complex::new(re, im))),
        )
    }
}

/// Where an operator file finds its space: a path or an inline space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceRef {
    Path(String),
    Inline(Box<SpaceFile>),
}

/// The JSON operator format `{"space": <ref>, "entries": [[x, y, re, im], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    pub entries: Vec<(usize, usize, f64, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    #[test]
    fn propagation_examples() {
        let x = FiniteMetricSpace::interval(9);
        let d = RoeOperator::diagonal(&[c(1.0); 10]);
        assert_eq!(d.propagation(&x), Rational::from_integer(0));
        assert_eq!(RoeOperator::zero(10).propagation(&x), Rational::from_integer(0));
        let s = RoeOperator::shift(10);
        assert_eq!(s.get(1, 0), c(1.0));
        assert_eq!(s.propagation(&x), Rational::from_integer(1));
        let single = RoeOperator::from_entries(10, [(0, 7, c(2.0))]).unwrap();
        assert_eq!(single.propagation(&x), Rational::from_integer(7));
    }

    #[test]
    fn arithmetic() {
        let s = RoeOperator::shift(4);
        let t = s.add(&s.adjoint());
        assert_eq!(t.get(0, 1), c(1.0));
        assert_eq!(t.get(1, 0), c(1.0));
        assert_eq!(t.sub(&t).nnz(), 0);
        let s2 = s.mul(&s);
        assert_eq!(s2.get(2, 0), c(1.0));
        assert_eq!(s2.nnz(), 2);
        let v = vec![c(1.0), c(2.0), c(3.0), c(4.0)];
        assert_eq!(s.apply(&v), vec![c(0.0), c(1.0), c(2.0), c(3.0)]);
        assert_eq!(s.apply_adjoint(&v), vec![c(2.0), c(3.0), c(4.0), c(0.0)]);
    }

    #[test]
    fn commutator_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = FiniteMetricSpace::interval(20);
        let a = RoeOperator::random_band(&x, Rational::from_integer(3), 0.5, &mut rng);
        let h: Vec<f64> = (0..21).map(|i| (i as f64 * 0.37).sin()).collect();
        let hm = RoeOperator::multiplication(&h);
        let direct = hm.mul(&a).sub(&a.mul(&hm));
        assert!(direct.max_entry_diff(&a.commutator_with(&h)) < 1e-15);
        for (i, j, v) in a.entries() {
            let expected = v * (h[i] - h[j]);
            assert!((a.commutator_with(&h).get(i, j) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn compress_keeps_blocks() {
        let a = RoeOperator::from_entries(4, (0..4).flat_map(|x| (0..4).map(move |y| (x, y, c(1.0))))).unwrap();
        let p = a.compress(&[Some(0), Some(0), Some(1), None]);
        assert_eq!(p.nnz(), 5);
        assert_eq!(p.get(0, 2), Complex::ZERO);
        assert_eq!(p.get(3, 3), Complex::ZERO);
    }

    #[test]
    fn file_round_trip() {
        let a = RoeOperator::from_entries(3, [(0, 1, Complex::new(1.0, -2.0)), (2, 2, c(0.5))]).unwrap();
        let json = serde_json::to_string(&a.to_file(Some(SpaceRef::Path("x.json".into())))).unwrap();
        let back: OperatorFile = serde_json::from_str(&json).unwrap();
        assert_eq!(RoeOperator::from_file(&back, 3).unwrap(), a);
        assert!(RoeOperator::from_file(&back, 4).is_err());
    }

    proptest! {
        #[test]
        fn propagation_subadditive(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = FiniteMetricSpace::interval(30);
            let w1 = rng.random_range(0..5);
            let w2 = rng.random_range(0..5);
            let a = RoeOperator::random_band(&x, Rational::from_integer(w1), 0.3, &mut rng);
            let b = RoeOperator::random_band(&x, Rational::from_integer(w2), 0.3, &mut rng);
            let pa = a.propagation_units(&x);
            let pb = b.propagation_units(&x);
            prop_assert!(a.mul(&b).propagation_units(&x) <= pa + pb);
            prop_assert!(a.add(&b).propagation_units(&x) <= pa.max(pb));
        }
    }
}
