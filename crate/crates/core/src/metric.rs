//! Finite metric spaces with exact rational distances.
//!
//! Every distance is stored as an integer number of *units*, where one unit is
//! `1/scale`. A matrix-backed space keeps the full unit matrix; interval and
//! grid spaces compute distances in closed form so that a 5001-point interval
//! never materializes a 25M-entry matrix.
//!
//! Balls are closed (`d(x, y) ≤ R`), neighbourhoods are strict
//! (`d(x, A) < R`). The two conventions are kept apart on purpose.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational scalar used for every distance threshold.
pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("graph is disconnected: node {0} is unreachable from node 0")]
    Disconnected(usize),
    #[error("distance matrix is not square ({rows} rows, row {row} has {len} entries)")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("d({0}, {1}) differs from d({1}, {0})")]
    Asymmetric(usize, usize),
    #[error("nonzero diagonal entry at {0}")]
    NonzeroDiagonal(usize),
    #[error("distance between distinct points {0} and {1} is not positive")]
    NotPositive(usize, usize),
    #[error("triangle inequality fails: d({a},{c}) > d({a},{b}) + d({b},{c})")]
    Triangle { a: usize, b: usize, c: usize },
    #[error("point label list has {labels} entries for {points} points")]
    LabelCount { labels: usize, points: usize },
    #[error("point index {0} out of range")]
    PointOutOfRange(usize),
    #[error("empty set in a subset family")]
    EmptySet,
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("invalid rational {0:?}")]
    BadRational(String),
    #[error("distance overflow")]
    Overflow,
}

/// Norm used by grid generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    Linf,
}

fn one() -> u64 {
    1
}

/// How a space was produced. Closed-form generators can rebuild the space
/// without a stored matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Points `0..=n` of the integer line, distances divided by `scale`.
    Interval {
        n: usize,
        #[serde(default = "one")]
        scale: u64,
    },
    /// `side^dim` lattice points with coordinates in `0..side`.
    Grid {
        dim: usize,
        side: usize,
        norm: Norm,
        #[serde(default = "one")]
        scale: u64,
    },
    /// Lattice box `∏ 0..sides[k]`; coordinate 0 varies fastest.
    Box {
        sides: Vec<usize>,
        norm: Norm,
        #[serde(default = "one")]
        scale: u64,
    },
    /// Shortest-path metric of a connected weighted graph.
    Graph {
        nodes: usize,
        edges: Vec<(usize, usize, u64)>,
        #[serde(default = "one")]
        scale: u64,
    },
    /// A user-supplied matrix.
    Explicit,
}

impl Generator {
    fn is_closed_form(&self) -> bool {
        matches!(
            self,
            Generator::Interval { .. } | Generator::Grid { .. } | Generator::Box { .. }
        )
    }
}

#[derive(Debug, Clone)]
enum Geometry {
    Matrix { n: usize, units: Vec<u64> },
    Interval { n: usize },
    Grid { sides: Vec<usize>, norm: Norm },
}

/// A finite metric space with exact distances.
#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    scale: u64,
    geometry: Geometry,
    generator: Generator,
}

impl FiniteMetricSpace {
    /// `{0, …, n} ⊂ ℤ` with `|x − y|`.
    pub fn interval(n: usize) -> Self {
        Self::scaled_interval(n, 1)
    }

    /// `{0, 1/scale, …, n/scale}`; `scaled_interval(k, k)` is the `1/k`-net of `[0, 1]`.
    pub fn scaled_interval(n: usize, scale: u64) -> Self {
        assert!(scale > 0, "scale must be positive");
        FiniteMetricSpace {
            labels: (0..=n).map(|i| i.to_string()).collect(),
            scale,
            geometry: Geometry::Interval { n: n + 1 },
            generator: Generator::Interval { n, scale },
        }
    }

    /// The lattice `{0, …, side − 1}^dim` with the given norm.
    pub fn grid(dim: usize, side: usize, norm: Norm) -> Self {
        Self::scaled_grid(dim, side, norm, 1)
    }

    /// `scaled_grid(d, k + 1, Linf, k)` is the `1/k`-net of `[0, 1]^d`.
    pub fn scaled_grid(dim: usize, side: usize, norm: Norm, scale: u64) -> Self {
        assert!(dim > 0, "grid needs positive dimension");
        let mut space = Self::scaled_box(&vec![side; dim], norm, scale);
        space.generator = Generator::Grid {
            dim,
            side,
            norm,
            scale,
        };
        space
    }

    /// The lattice box `∏ {0, …, sides[k] − 1}`, coordinate 0 varying fastest.
    pub fn scaled_box(sides: &[usize], norm: Norm, scale: u64) -> Self {
        assert!(scale > 0, "scale must be positive");
        assert!(
            !sides.is_empty() && sides.iter().all(|&s| s > 0),
            "box needs positive sides"
        );
        let n: usize = sides.iter().product();
        let labels = (0..n)
            .map(|i| {
                let c = grid_coords(i, sides);
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                format!("({})", parts.join(","))
            })
            .collect();
        FiniteMetricSpace {
            labels,
            scale,
            geometry: Geometry::Grid {
                sides: sides.to_vec(),
                norm,
            },
            generator: Generator::Box {
                sides: sides.to_vec(),
                norm,
                scale,
            },
        }
    }

    /// Side lengths and norm when the space is a lattice box.
    pub fn box_shape(&self) -> Option<(&[usize], Norm)> {
        match &self.geometry {
            Geometry::Grid { sides, norm } => Some((sides, *norm)),
            _ => None,
        }
    }

    /// Shortest-path metric of a connected graph with positive integer weights.
    pub fn graph(nodes: usize, edges: &[(usize, usize, u64)], scale: u64) -> Result<Self, MetricError> {
        if nodes == 0 {
            return Err(MetricError::InvalidGenerator("graph without nodes".into()));
        }
        if scale == 0 {
            return Err(MetricError::InvalidGenerator("scale must be positive".into()));
        }
        let mut g = UnGraph::<(), u64>::with_capacity(nodes, edges.len());
        for _ in 0..nodes {
            g.add_node(());
        }
        for &(u, v, w) in edges {
            if u >= nodes || v >= nodes {
                return Err(MetricError::PointOutOfRange(u.max(v)));
            }
            if w == 0 {
                return Err(MetricError::InvalidGenerator(format!(
                    "edge ({u}, {v}) has zero weight"
                )));
            }
            g.add_edge(NodeIndex::new(u), NodeIndex::new(v), w);
        }
        let mut units = vec![0u64; nodes * nodes];
        for s in 0..nodes {
            let dist = dijkstra(&g, NodeIndex::new(s), None, |e| *e.weight());
            for t in 0..nodes {
                match dist.get(&NodeIndex::new(t)) {
                    Some(&d) => units[s * nodes + t] = d,
                    None => return Err(MetricError::Disconnected(t)),
                }
            }
        }
        Ok(FiniteMetricSpace {
            labels: (0..nodes).map(|i| i.to_string()).collect(),
            scale,
            geometry: Geometry::Matrix { n: nodes, units },
            generator: Generator::Graph {
                nodes,
                edges: edges.to_vec(),
                scale,
            },
        })
    }

    /// A space given by an explicit rational distance matrix.
    ///
    /// The matrix is brought to a common denominator. With `check_triangle`
    /// the O(n³) triangle check runs; symmetry, zero diagonal and positivity
    /// are always checked.
    pub fn from_matrix(
        labels: Option<Vec<String>>,
        dist: &[Vec<Rational>],
        check_triangle: bool,
    ) -> Result<Self, MetricError> {
        let n = dist.len();
        for (row, r) in dist.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NotSquare {
                    rows: n,
                    row,
                    len: r.len(),
                });
            }
        }
        let mut scale: i64 = 1;
        for v in dist.iter().flatten() {
            if *v.numer() < 0 {
                return Err(MetricError::BadRational(v.to_string()));
            }
            scale = scale.lcm(v.denom());
        }
        let mut units = vec![0u64; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = dist[i][j] * Rational::from_integer(scale);
                units[i * n + j] = *v.numer() as u64;
            }
        }
        let labels = match labels {
            Some(l) if l.len() != n => {
                return Err(MetricError::LabelCount {
                    labels: l.len(),
                    points: n,
                })
            }
            Some(l) => l,
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        let space = FiniteMetricSpace {
            labels,
            scale: scale as u64,
            geometry: Geometry::Matrix { n, units },
            generator: Generator::Explicit,
        };
        space.validate(check_triangle)?;
        Ok(space)
    }

    pub fn generate(generator: &Generator) -> Result<Self, MetricError> {
        match *generator {
            Generator::Interval { n, scale } => {
                if scale == 0 {
                    return Err(MetricError::InvalidGenerator("scale must be positive".into()));
                }
                Ok(Self::scaled_interval(n, scale))
            }
            Generator::Grid {
                dim,
                side,
                norm,
                scale,
            } => {
                if dim == 0 || side == 0 || scale == 0 {
                    return Err(MetricError::InvalidGenerator(
                        "grid needs positive dim, side and scale".into(),
                    ));
                }
                Ok(Self::scaled_grid(dim, side, norm, scale))
            }
            Generator::Box {
                ref sides,
                norm,
                scale,
            } => {
                if sides.is_empty() || sides.contains(&0) || scale == 0 {
                    return Err(MetricError::InvalidGenerator(
                        "box needs positive sides and scale".into(),
                    ));
                }
                Ok(Self::scaled_box(sides, norm, scale))
            }
            Generator::Graph {
                nodes,
                ref edges,
                scale,
            } => Self::graph(nodes, edges, scale),
            Generator::Explicit => Err(MetricError::InvalidGenerator(
                "explicit spaces need a distance matrix".into(),
            )),
        }
    }

    /// Checks the metric axioms on the stored distances.
    pub fn validate(&self, check_triangle: bool) -> Result<(), MetricError> {
        let n = self.len();
        for i in 0..n {
            if self.units(i, i) != 0 {
                return Err(MetricError::NonzeroDiagonal(i));
            }
            for j in (i + 1)..n {
                if self.units(i, j) != self.units(j, i) {
                    return Err(MetricError::Asymmetric(i, j));
                }
                if self.units(i, j) == 0 {
                    return Err(MetricError::NotPositive(i, j));
                }
            }
        }
        if check_triangle {
            for a in 0..n {
                for b in 0..n {
                    let ab = self.units(a, b);
                    for c in 0..n {
                        if self.units(a, c) > ab + self.units(b, c) {
                            return Err(MetricError::Triangle { a, b, c });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match &self.geometry {
            Geometry::Matrix { n, .. } | Geometry::Interval { n } => *n,
            Geometry::Grid { sides, .. } => sides.iter().product(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// Number of units per distance 1.
    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// `d(i, j)` in units of `1/scale`.
    #[inline]
    pub fn units(&self, i: usize, j: usize) -> u64 {
        match &self.geometry {
            Geometry::Matrix { n, units } => units[i * n + j],
            Geometry::Interval { .. } => i.abs_diff(j) as u64,
            Geometry::Grid { sides, norm } => {
                let (mut a, mut b) = (i, j);
                let mut acc = 0u64;
                for &side in sides {
                    let diff = (a % side).abs_diff(b % side) as u64;
                    a /= side;
                    b /= side;
                    acc = match norm {
                        Norm::L1 => acc + diff,
                        Norm::Linf => acc.max(diff),
                    };
                }
                acc
            }
        }
    }

    pub fn dist(&self, i: usize, j: usize) -> Rational {
        self.to_rational(self.units(i, j))
    }

    pub fn dist_f64(&self, i: usize, j: usize) -> f64 {
        self.units(i, j) as f64 / self.scale as f64
    }

    pub fn to_rational(&self, units: u64) -> Rational {
        Rational::new(units as i64, self.scale as i64)
    }

    /// Smallest unit count `u` with `u/scale ≥ r`; `d ≥ r ⇔ units ≥ this`.
    pub fn units_ceil(&self, r: Rational) -> u64 {
        let num = (*r.numer() as i128) * self.scale as i128;
        let den = *r.denom() as i128;
        if num <= 0 {
            return 0;
        }
        ((num + den - 1) / den).min(u64::MAX as i128) as u64
    }

    /// Largest unit count `u` with `u/scale ≤ b`; `d ≤ b ⇔ units ≤ this`.
    /// `None` when `b < 0`.
    pub fn units_floor(&self, b: Rational) -> Option<u64> {
        let num = (*b.numer() as i128) * self.scale as i128;
        let den = *b.denom() as i128;
        if num < 0 {
            return None;
        }
        Some((num / den).min(u64::MAX as i128) as u64)
    }

    /// Coordinates of a point for interval and grid spaces, in space units
    /// divided by the scale.
    pub fn coordinates(&self, i: usize) -> Option<Vec<Rational>> {
        let s = self.scale as i64;
        match &self.geometry {
            Geometry::Interval { .. } => Some(vec![Rational::new(i as i64, s)]),
            Geometry::Grid { sides, .. } => Some(
                grid_coords(i, sides)
                    .into_iter()
                    .map(|c| Rational::new(c as i64, s))
                    .collect(),
            ),
            Geometry::Matrix { .. } => None,
        }
    }

    /// Diameter of a point set in units; 0 for singletons and the empty set.
    pub fn diameter_units(&self, set: &[usize]) -> u64 {
        let mut best = 0;
        for (k, &a) in set.iter().enumerate() {
            for &b in &set[k + 1..] {
                best = best.max(self.units(a, b));
            }
        }
        best
    }

    pub fn diameter_of(&self, set: &[usize]) -> Rational {
        self.to_rational(self.diameter_units(set))
    }

    pub fn diameter(&self) -> Rational {
        match &self.geometry {
            Geometry::Interval { n } => self.to_rational(n.saturating_sub(1) as u64),
            Geometry::Grid { sides, norm } => {
                let axes = sides.iter().map(|&s| s as u64 - 1);
                self.to_rational(match norm {
                    Norm::L1 => axes.sum(),
                    Norm::Linf => axes.max().unwrap_or(0),
                })
            }
            Geometry::Matrix { units, .. } => {
                self.to_rational(units.iter().copied().max().unwrap_or(0))
            }
        }
    }

    /// `d(A, B) = min d(a, b)` in units; `None` if either set is empty.
    pub fn set_distance_units(&self, a: &[usize], b: &[usize]) -> Option<u64> {
        let mut best: Option<u64> = None;
        for &x in a {
            for &y in b {
                let d = self.units(x, y);
                best = Some(best.map_or(d, |v| v.min(d)));
            }
        }
        best
    }

    /// `d(x, A)` in units; `None` for empty `A`.
    pub fn point_set_distance_units(&self, x: usize, set: &[usize]) -> Option<u64> {
        set.iter().map(|&a| self.units(x, a)).min()
    }

    /// `N_R = max_x |B(x, R)|` with closed balls.
    pub fn ball_stat(&self, radius: Rational) -> usize {
        let Some(r) = self.units_floor(radius) else {
            return 0;
        };
        let n = self.len();
        (0..n)
            .map(|x| (0..n).filter(|&y| self.units(x, y) <= r).count())
            .max()
            .unwrap_or(0)
    }

    /// The strict neighbourhood `{x : d(x, A) < R}`, sorted.
    pub fn neighborhood(&self, set: &[usize], radius: Rational) -> Vec<usize> {
        let r = self.units_ceil(radius);
        (0..self.len())
            .filter(|&x| set.iter().any(|&a| self.units(x, a) < r))
            .collect()
    }

    /// Checks pairwise `d(U, V) ≥ r` and `diam U ≤ bound` over a family.
    pub fn family_check(&self, family: &SubsetFamily, gap: Rational, bound: Rational) -> FamilyCheck {
        let gap_units = self.units_ceil(gap);
        let bound_units = self.units_floor(bound);
        let sets = family.sets();
        let mut check = FamilyCheck::default();
        for (i, s) in sets.iter().enumerate() {
            let diam = self.diameter_units(s);
            if bound_units.is_none_or(|b| diam > b) {
                check.diameter_violations.push(DiameterViolation {
                    set: i,
                    diameter: self.to_rational(diam),
                });
            }
            for (j, t) in sets.iter().enumerate().skip(i + 1) {
                let d = self.set_distance_units(s, t).unwrap_or(u64::MAX);
                if d < gap_units {
                    check.gap_violations.push(GapViolation {
                        first: i,
                        second: j,
                        distance: self.to_rational(d),
                    });
                }
            }
        }
        check
    }

    /// Serializable form. Matrix-backed spaces carry their matrix; closed-form
    /// generators are stored without it.
    pub fn to_file(&self) -> SpaceFile {
        let dist = (!self.generator.is_closed_form()).then(|| {
            (0..self.len())
                .map(|i| {
                    (0..self.len())
                        .map(|j| RationalRepr::from(self.dist(i, j)))
                        .collect()
                })
                .collect()
        });
        SpaceFile {
            points: self.labels.iter().cloned().map(PointId::Label).collect(),
            dist,
            generator: Some(self.generator.clone()),
            validate_triangle: None,
        }
    }

    pub fn from_file(file: &SpaceFile) -> Result<Self, MetricError> {
        let labels: Vec<String> = file.points.iter().map(PointId::to_label).collect();
        let mut space = match (&file.dist, &file.generator) {
            (Some(dist), generator) => {
                let parsed: Vec<Vec<Rational>> = dist
                    .iter()
                    .map(|row| row.iter().map(RationalRepr::to_rational).collect())
                    .collect::<Result<_, _>>()?;
                let mut space = Self::from_matrix(None, &parsed, file.validate_triangle.unwrap_or(true))?;
                if let Some(g) = generator {
                    space.generator = g.clone();
                }
                space
            }
            (None, Some(generator)) => Self::generate(generator)?,
            (None, None) => {
                return Err(MetricError::InvalidGenerator(
                    "space file needs a distance matrix or a generator".into(),
                ))
            }
        };
        if !labels.is_empty() {
            if labels.len() != space.len() {
                return Err(MetricError::LabelCount {
                    labels: labels.len(),
                    points: space.len(),
                });
            }
            space.labels = labels;
        }
        Ok(space)
    }
}

fn grid_coords(mut i: usize, sides: &[usize]) -> Vec<usize> {
    let mut c = Vec::with_capacity(sides.len());
    for &side in sides {
        c.push(i % side);
        i /= side;
    }
    c
}

/// A family of nonempty point sets over one space.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct SubsetFamily {
    sets: Vec<Vec<usize>>,
}

impl SubsetFamily {
    /// Sorts and deduplicates each set; rejects empty sets.
    pub fn new(sets: Vec<Vec<usize>>) -> Result<Self, MetricError> {
        let mut out = Vec::with_capacity(sets.len());
        for s in sets {
            let s: Vec<usize> = s.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
            if s.is_empty() {
                return Err(MetricError::EmptySet);
            }
            out.push(s);
        }
        Ok(SubsetFamily { sets: out })
    }

    pub fn empty() -> Self {
        SubsetFamily { sets: Vec::new() }
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Union of all sets, sorted.
    pub fn union(&self) -> Vec<usize> {
        self.sets
            .iter()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn check_points(&self, space: &FiniteMetricSpace) -> Result<(), MetricError> {
        match self.sets.iter().flatten().find(|&&p| p >= space.len()) {
            Some(&p) => Err(MetricError::PointOutOfRange(p)),
            None => Ok(()),
        }
    }
}

impl TryFrom<Vec<Vec<usize>>> for SubsetFamily {
    type Error = MetricError;
    fn try_from(sets: Vec<Vec<usize>>) -> Result<Self, Self::Error> {
        SubsetFamily::new(sets)
    }
}

impl From<SubsetFamily> for Vec<Vec<usize>> {
    fn from(f: SubsetFamily) -> Self {
        f.sets
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapViolation {
    pub first: usize,
    pub second: usize,
    #[serde(with = "rational_str")]
    pub distance: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiameterViolation {
    pub set: usize,
    #[serde(with = "rational_str")]
    pub diameter: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct FamilyCheck {
    pub gap_violations: Vec<GapViolation>,
    pub diameter_violations: Vec<DiameterViolation>,
}

impl FamilyCheck {
    pub fn is_ok(&self) -> bool {
        self.gap_violations.is_empty() && self.diameter_violations.is_empty()
    }
}

/// Point id as it appears in a space file: a string or an integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointId {
    Index(u64),
    Label(String),
}

impl PointId {
    fn to_label(&self) -> String {
        match self {
            PointId::Index(i) => i.to_string(),
            PointId::Label(s) => s.clone(),
        }
    }
}

/// A rational in JSON: an integer or a `"p/q"` string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalRepr {
    Int(i64),
    Text(String),
}

impl RationalRepr {
    pub fn to_rational(&self) -> Result<Rational, MetricError> {
        match self {
            RationalRepr::Int(v) => Ok(Rational::from_integer(*v)),
            RationalRepr::Text(s) => parse_rational(s),
        }
    }
}

impl From<Rational> for RationalRepr {
    fn from(r: Rational) -> Self {
        if r.is_integer() {
            RationalRepr::Int(*r.numer())
        } else {
            RationalRepr::Text(r.to_string())
        }
    }
}

/// Parses `"7"`, `"-3"` or `"1/64"`.
pub fn parse_rational(s: &str) -> Result<Rational, MetricError> {
    let bad = || MetricError::BadRational(s.to_string());
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => s.parse::<i64>().map(Rational::from_integer).map_err(|_| bad()),
    }
}

/// Serde helpers writing rationals as `"p/q"` strings (integers as `"n"`).
pub mod rational_str {
    use super::{parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// The JSON space format `{"points": [...], "dist": [[...]], "generator": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default)]
    pub points: Vec<PointId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Vec<RationalRepr>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    /// Set to `false` to skip the O(n³) triangle check on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate_triangle: Option<bool>,
}

impl fmt::Display for FiniteMetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.generator {
            Generator::Interval { n, scale } if *scale == 1 => write!(f, "interval({n})"),
            Generator::Interval { n, scale } => write!(f, "interval({n})/{scale}"),
            Generator::Grid {
                dim,
                side,
                norm,
                scale,
            } => write!(f, "grid({dim}, {side}, {norm:?})/{scale}"),
            Generator::Box { sides, norm, scale } => write!(f, "box({sides:?}, {norm:?})/{scale}"),
            Generator::Graph { nodes, edges, .. } => {
                write!(f, "graph({nodes} nodes, {} edges)", edges.len())
            }
            Generator::Explicit => write!(f, "explicit({} points)", self.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Rational {
        Rational::new(p, q)
    }

    #[test]
    fn generators() {
        let x = FiniteMetricSpace::interval(9);
        assert_eq!(x.len(), 10);
        assert_eq!(x.dist(2, 9), r(7, 1));
        let g = FiniteMetricSpace::grid(2, 3, Norm::Linf);
        assert_eq!(g.len(), 9);
        // (0,0) to (2,1)
        assert_eq!(g.units(0, 2 + 3), 2);
        let g1 = FiniteMetricSpace::grid(2, 3, Norm::L1);
        assert_eq!(g1.units(0, 2 + 3), 3);
        assert!(g.validate(true).is_ok());
        assert!(g1.validate(true).is_ok());
    }

    #[test]
    fn explicit_matrix_validation() {
        let ok = vec![
            vec![r(0, 1), r(1, 1), r(2, 1), r(1, 2)],
            vec![r(1, 1), r(0, 1), r(1, 1), r(1, 1)],
            vec![r(2, 1), r(1, 1), r(0, 1), r(2, 1)],
            vec![r(1, 2), r(1, 1), r(2, 1), r(0, 1)],
        ];
        let space = FiniteMetricSpace::from_matrix(None, &ok, true).unwrap();
        assert_eq!(space.scale(), 2);
        assert_eq!(space.dist(0, 3), r(1, 2));
        let mut bad = ok.clone();
        bad[0][2] = r(3, 1);
        bad[2][0] = r(3, 1);
        assert!(matches!(
            FiniteMetricSpace::from_matrix(None, &bad, true),
            Err(MetricError::Triangle { .. })
        ));
        assert!(FiniteMetricSpace::from_matrix(None, &bad, false).is_ok());
        let mut asym = ok;
        asym[0][1] = r(2, 1);
        assert!(matches!(
            FiniteMetricSpace::from_matrix(None, &asym, true),
            Err(MetricError::Asymmetric(0, 1))
        ));
    }

    #[test]
    fn graph_metric() {
        // path 0-1-2 plus a long edge 0-2
        let g = FiniteMetricSpace::graph(3, &[(0, 1, 1), (1, 2, 2), (0, 2, 5)], 1).unwrap();
        assert_eq!(g.units(0, 2), 3);
        assert!(g.validate(true).is_ok());
        assert_eq!(
            FiniteMetricSpace::graph(3, &[(0, 1, 1)], 1).unwrap_err(),
            MetricError::Disconnected(2)
        );
    }

    #[test]
    fn ball_stat_examples() {
        let x = FiniteMetricSpace::interval(9);
        assert_eq!(x.ball_stat(r(1, 1)), 3);
        assert_eq!(x.ball_stat(r(0, 1)), 1);
        assert_eq!(x.ball_stat(x.diameter()), 10);
        let g = FiniteMetricSpace::grid(2, 10, Norm::Linf);
        assert_eq!(g.ball_stat(r(1, 1)), 9);
    }

    #[test]
    fn neighborhood_is_strict() {
        let x = FiniteMetricSpace::interval(9);
        assert_eq!(x.neighborhood(&[5], r(2, 1)), vec![4, 5, 6]);
        assert_eq!(x.neighborhood(&[0], r(1, 1)), vec![0]);
        let all: Vec<usize> = (0..10).collect();
        assert_eq!(x.neighborhood(&all, r(1, 2)), all);
    }

    #[test]
    fn family_check_examples() {
        let x = FiniteMetricSpace::interval(9);
        let f = SubsetFamily::new(vec![vec![0, 1], vec![5, 6]]).unwrap();
        assert!(x.family_check(&f, r(3, 1), r(1, 1)).is_ok());
        let check = x.family_check(&f, r(5, 1), r(1, 1));
        assert_eq!(
            check.gap_violations,
            vec![GapViolation {
                first: 0,
                second: 1,
                distance: r(4, 1)
            }]
        );
        let whole = SubsetFamily::new(vec![(0..10).collect()]).unwrap();
        assert!(x.family_check(&whole, r(100, 1), x.diameter()).is_ok());
        assert!(SubsetFamily::new(vec![vec![]]).is_err());
    }

    #[test]
    fn unit_thresholds() {
        let net = FiniteMetricSpace::scaled_interval(64, 64);
        assert_eq!(net.units_ceil(r(1, 64)), 1);
        assert_eq!(net.units_floor(r(1, 3)), Some(21));
        assert_eq!(net.units_ceil(r(1, 3)), 22);
        assert_eq!(net.units_floor(r(-1, 3)), None);
    }

    #[test]
    fn space_file_round_trip() {
        let g = FiniteMetricSpace::graph(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)], 2).unwrap();
        let json = serde_json::to_string(&g.to_file()).unwrap();
        let back = FiniteMetricSpace::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.dist(0, 3), r(3, 2));
        let grid = FiniteMetricSpace::scaled_grid(2, 5, Norm::Linf, 4);
        let json = serde_json::to_string(&grid.to_file()).unwrap();
        assert!(!json.contains("dist"));
        let back = FiniteMetricSpace::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.len(), 25);
        assert_eq!(back.dist(0, 24), r(1, 1));
        let raw = r#"{"points":[1,2,3],"dist":[[0,"1/2",1],["1/2",0,"1/2"],[1,"1/2",0]]}"#;
        let s = FiniteMetricSpace::from_file(&serde_json::from_str(raw).unwrap()).unwrap();
        assert_eq!(s.scale(), 2);
        assert_eq!(s.labels()[2], "3");
    }
}
