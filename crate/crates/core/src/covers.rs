//! Cover decompositions `U_0, …, U_n` with per-index gaps and diameter bounds.
//!
//! Search works on colorings: every point gets an index `i`, and family `i`
//! is the set of components of color class `i` under the link relation
//! "closer than the gap". A coloring is feasible iff every component of
//! color `i` has diameter at most `b_i`. Any gap-respecting family must group
//! whole components, and splitting into components only shrinks diameters,
//! so this loses no solutions.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{rational_str, FiniteMetricSpace, MetricError, Rational, SubsetFamily};
use crate::setfamily::{GroundSet, Label, SetFamily};

/// Default node cap of the exact search.
pub const DEFAULT_BUDGET: u64 = 10_000_000;
/// Largest space on which a failed greedy pass falls back to exact search.
pub const DEFAULT_EXACT_THRESHOLD: usize = 64;
/// Default cap on stored refuted subproblems.
pub const DEFAULT_MEMO_LIMIT: usize = 1 << 20;
/// Spaces above this size are searched without the subproblem memo.
const MEMO_MAX_POINTS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("constraint has {constraint} indices but decomposition has {decomposition}")]
    IndexMismatch { constraint: usize, decomposition: usize },
    #[error("at most {max} indices are supported, got {got}")]
    TooManyIndices { max: usize, got: usize },
    #[error("empty space")]
    EmptySpace,
    #[error("empty scale set")]
    EmptyScales,
    #[error("gap and bound must be positive")]
    NonPositive,
    #[error("search inconclusive for scales {0:?}")]
    Unknown(Vec<u64>),
}

/// Separation required between two sets of one family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "GapRepr", from = "GapRepr")]
pub enum Gap {
    /// `d(U, V) ≥ r`.
    AtLeast(Rational),
    /// `d(U, V) > r`.
    Exceeds(Rational),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GapRepr {
    AtLeast {
        #[serde(with = "rational_str")]
        r: Rational,
    },
    Exceeds {
        #[serde(with = "rational_str")]
        r: Rational,
    },
}

impl From<Gap> for GapRepr {
    fn from(g: Gap) -> Self {
        match g {
            Gap::AtLeast(r) => GapRepr::AtLeast { r },
            Gap::Exceeds(r) => GapRepr::Exceeds { r },
        }
    }
}

impl From<GapRepr> for Gap {
    fn from(g: GapRepr) -> Self {
        match g {
            GapRepr::AtLeast { r } => Gap::AtLeast(r),
            GapRepr::Exceeds { r } => Gap::Exceeds(r),
        }
    }
}

impl Gap {
    /// Two points closer than this many units must share a set.
    pub fn link_units(&self, space: &FiniteMetricSpace) -> u64 {
        match *self {
            Gap::AtLeast(r) => space.units_ceil(r),
            Gap::Exceeds(r) => space.units_floor(r).map_or(0, |u| u + 1),
        }
    }
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gap::AtLeast(r) => write!(f, ">= {r}"),
            Gap::Exceeds(r) => write!(f, "> {r}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexConstraint {
    pub gap: Gap,
    #[serde(with = "rational_str")]
    pub bound: Rational,
}

/// One `(gap, bound)` pair per index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecompositionConstraint {
    pub indices: Vec<IndexConstraint>,
}

impl DecompositionConstraint {
    /// `d ≥ r_i` gaps with the given bounds.
    pub fn at_least(pairs: &[(Rational, Rational)]) -> Self {
        DecompositionConstraint {
            indices: pairs
                .iter()
                .map(|&(r, b)| IndexConstraint {
                    gap: Gap::AtLeast(r),
                    bound: b,
                })
                .collect(),
        }
    }

    /// Integer shorthand for [`DecompositionConstraint::at_least`].
    pub fn at_least_int(pairs: &[(i64, i64)]) -> Self {
        let pairs: Vec<_> = pairs
            .iter()
            .map(|&(r, b)| (Rational::from_integer(r), Rational::from_integer(b)))
            .collect();
        Self::at_least(&pairs)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Families `U_0, …, U_n`, optionally with the coloring they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverDecomposition {
    pub families: Vec<SubsetFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coloring: Option<Vec<usize>>,
}

impl CoverDecomposition {
    /// Families of link-components of each color class, in canonical order.
    pub fn from_coloring(
        space: &FiniteMetricSpace,
        constraint: &DecompositionConstraint,
        coloring: &[usize],
    ) -> Self {
        let k = constraint.len();
        let mut families = vec![Vec::new(); k];
        let mut seen = vec![false; space.len()];
        for start in 0..space.len() {
            if seen[start] {
                continue;
            }
            let c = coloring[start];
            let link = constraint.indices[c].gap.link_units(space);
            let mut comp = vec![start];
            seen[start] = true;
            let mut head = 0;
            while head < comp.len() {
                let x = comp[head];
                head += 1;
                for y in 0..space.len() {
                    if !seen[y] && coloring[y] == c && space.units(x, y) < link {
                        seen[y] = true;
                        comp.push(y);
                    }
                }
            }
            comp.sort_unstable();
            families[c].push(comp);
        }
        CoverDecomposition {
            families: families
                .into_iter()
                .map(|f| SubsetFamily::new(f).expect("components are nonempty"))
                .collect(),
            coloring: Some(coloring.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverViolation {
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    Gap {
        first: usize,
        second: usize,
        #[serde(with = "rational_str")]
        distance: Rational,
    },
    Diameter {
        set: usize,
        #[serde(with = "rational_str")]
        diameter: Rational,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CoverCheck {
    pub uncovered: Vec<usize>,
    pub violations: Vec<CoverViolation>,
}

impl CoverCheck {
    pub fn is_ok(&self) -> bool {
        self.uncovered.is_empty() && self.violations.is_empty()
    }
}

/// Checks coverage, per-family gaps and per-family diameter bounds.
pub fn verify(
    space: &FiniteMetricSpace,
    decomposition: &CoverDecomposition,
    constraint: &DecompositionConstraint,
) -> Result<CoverCheck, CoverError> {
    if decomposition.families.len() != constraint.len() {
        return Err(CoverError::IndexMismatch {
            constraint: constraint.len(),
            decomposition: decomposition.families.len(),
        });
    }
    let mut covered = vec![false; space.len()];
    let mut check = CoverCheck::default();
    for (i, (family, c)) in decomposition.families.iter().zip(&constraint.indices).enumerate() {
        family.check_points(space)?;
        let link = c.gap.link_units(space);
        let bound = space.units_floor(c.bound);
        let sets = family.sets();
        for (a, s) in sets.iter().enumerate() {
            for &p in s {
                covered[p] = true;
            }
            let diam = space.diameter_units(s);
            if bound.is_none_or(|b| diam > b) {
                check.violations.push(CoverViolation {
                    index: i,
                    kind: ViolationKind::Diameter {
                        set: a,
                        diameter: space.to_rational(diam),
                    },
                });
            }
            for (b, t) in sets.iter().enumerate().skip(a + 1) {
                let d = space.set_distance_units(s, t).unwrap_or(u64::MAX);
                if d < link {
                    check.violations.push(CoverViolation {
                        index: i,
                        kind: ViolationKind::Gap {
                            first: a,
                            second: b,
                            distance: space.to_rational(d),
                        },
                    });
                }
            }
        }
    }
    check.uncovered = (0..space.len()).filter(|&p| !covered[p]).collect();
    Ok(check)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Exact,
    Greedy,
}

/// Order in which the search assigns points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchOrder {
    /// Descending degree in the link graph of the largest gap, ties by id.
    Degree,
    /// Point id order; a scanline for generated intervals and grids.
    Index,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub strategy: Strategy,
    pub order: SearchOrder,
    pub budget: u64,
    pub exact_threshold: usize,
    /// Refuted subproblems kept for reuse; 0 disables the memo.
    pub memo_limit: usize,
    /// On lattice boxes, first try to refute on smaller sub-boxes.
    pub localize: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            strategy: Strategy::Exact,
            order: SearchOrder::Degree,
            budget: DEFAULT_BUDGET,
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
            memo_limit: DEFAULT_MEMO_LIMIT,
            localize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchOutcome {
    Feasible { decomposition: CoverDecomposition },
    Infeasible,
    Unknown { reason: String },
}

impl SearchOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SearchOutcome::Feasible { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    pub nodes: u64,
    /// Sides of the sub-box on which infeasibility was shown, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refuted_on: Option<Vec<usize>>,
}

const MAX_INDICES: usize = 32;
const NONE: u8 = u8::MAX;

/// Decides whether a decomposition exists and returns the lexicographically
/// least coloring under the fixed point order when it does.
pub fn find_decomposition(
    space: &FiniteMetricSpace,
    constraint: &DecompositionConstraint,
    options: &SearchOptions,
) -> Result<SearchResult, CoverError> {
    if space.is_empty() {
        return Err(CoverError::EmptySpace);
    }
    if constraint.len() > MAX_INDICES {
        return Err(CoverError::TooManyIndices {
            max: MAX_INDICES,
            got: constraint.len(),
        });
    }
    if constraint.is_empty() {
        return Ok(SearchResult {
            outcome: SearchOutcome::Infeasible,
            nodes: 0,
            refuted_on: None,
        });
    }
    let mut spent = 0;
    if options.localize && options.strategy == Strategy::Exact {
        if let Some((sides, norm)) = space.box_shape() {
            for sub in sub_boxes(sides) {
                let window = FiniteMetricSpace::scaled_box(&sub, norm, space.scale());
                let local = SearchOptions {
                    order: SearchOrder::Index,
                    localize: false,
                    ..*options
                };
                let result = find_decomposition(&window, constraint, &local)?;
                spent += result.nodes;
                if result.outcome == SearchOutcome::Infeasible {
                    return Ok(SearchResult {
                        outcome: SearchOutcome::Infeasible,
                        nodes: spent,
                        refuted_on: Some(sub),
                    });
                }
            }
        }
    }
    let mut solver = Solver::new(space, constraint, options);
    let found = match options.strategy {
        Strategy::Exact => solver.solve(),
        Strategy::Greedy => match solver.greedy() {
            Some(true) => Ok(true),
            _ if space.len() <= options.exact_threshold => {
                let spent = solver.nodes;
                solver = Solver::new(space, constraint, options);
                solver.nodes = spent;
                solver.solve()
            }
            _ => {
                return Ok(SearchResult {
                    outcome: SearchOutcome::Unknown {
                        reason: format!(
                            "greedy pass failed and {} points exceed the exact threshold {}",
                            space.len(),
                            options.exact_threshold
                        ),
                    },
                    nodes: spent + solver.nodes,
                    refuted_on: None,
                })
            }
        },
    };
    let outcome = match found {
        Ok(true) => {
            let coloring: Vec<usize> = solver.color.iter().map(|&c| c as usize).collect();
            let decomposition = CoverDecomposition::from_coloring(space, constraint, &coloring);
            debug_assert!(verify(space, &decomposition, constraint).unwrap().is_ok());
            SearchOutcome::Feasible { decomposition }
        }
        Ok(false) => SearchOutcome::Infeasible,
        Err(BudgetExhausted) => SearchOutcome::Unknown {
            reason: format!("node budget {} exhausted", options.budget),
        },
    };
    Ok(SearchResult {
        outcome,
        nodes: spent + solver.nodes,
        refuted_on: None,
    })
}

/// Largest number of sub-boxes tried before searching the whole box.
const MAX_SUB_BOXES: usize = 512;

/// Proper sub-boxes of a lattice box, up to half its volume, smallest first.
///
/// Both norms are invariant under permuting axes, so sides are listed in
/// ascending order and a candidate fits when it is dominated by the sorted
/// sides of the box. A cover of the box restricts to a cover of every
/// sub-box, so infeasibility of any sub-box settles the box.
fn sub_boxes(sides: &[usize]) -> Vec<Vec<usize>> {
    let mut limit = sides.to_vec();
    limit.sort_unstable();
    let total: usize = limit.iter().product();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(limit.len());
    fn go(limit: &[usize], cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let k = cur.len();
        if k == limit.len() {
            out.push(cur.clone());
            return;
        }
        let low = cur.last().copied().unwrap_or(1);
        let vol: usize = cur.iter().product();
        for side in low..=limit[k] {
            if vol * side > cap {
                break;
            }
            cur.push(side);
            go(limit, cap, cur, out);
            cur.pop();
        }
    }
    go(&limit, total / 2, &mut cur, &mut out);
    out.sort_by_key(|b| (b.iter().product::<usize>(), b.clone()));
    out.truncate(MAX_SUB_BOXES);
    out
}

struct BudgetExhausted;

enum Undo {
    Domain(usize, u32),
    Color(usize),
    Comp(usize, u32),
}

struct Component {
    members: Vec<u32>,
}

struct Solver<'a> {
    space: &'a FiniteMetricSpace,
    link: Vec<u64>,
    bound: Vec<u64>,
    /// For each point, the points within the largest link distance.
    near: Vec<Vec<u32>>,
    order: Vec<usize>,
    color: Vec<u8>,
    domain: Vec<u32>,
    comp: Vec<u32>,
    comps: Vec<Component>,
    trail: Vec<Undo>,
    queue: Vec<usize>,
    nodes: u64,
    budget: u64,
    /// Per color, the points within the bound of each point.
    reach: Vec<Vec<Vec<u32>>>,
    memo: HashSet<Vec<u64>>,
    memo_limit: usize,
}

impl<'a> Solver<'a> {
    fn new(space: &'a FiniteMetricSpace, constraint: &DecompositionConstraint, options: &SearchOptions) -> Self {
        let n = space.len();
        let link: Vec<u64> = constraint.indices.iter().map(|c| c.gap.link_units(space)).collect();
        let bound: Vec<Option<u64>> = constraint.indices.iter().map(|c| space.units_floor(c.bound)).collect();
        let max_link = link.iter().copied().max().unwrap_or(0);
        let near: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|x| {
                (0..n)
                    .filter(|&y| y != x && space.units(x, y) < max_link)
                    .map(|y| y as u32)
                    .collect()
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        if options.order == SearchOrder::Degree {
            order.sort_by(|&a, &b| near[b].len().cmp(&near[a].len()).then(a.cmp(&b)));
        }
        let memo_limit = if n <= MEMO_MAX_POINTS && options.strategy == Strategy::Exact {
            options.memo_limit
        } else {
            0
        };
        let reach: Vec<Vec<Vec<u32>>> = if memo_limit > 0 {
            bound
                .iter()
                .map(|b| {
                    (0..n)
                        .into_par_iter()
                        .map(|x| match b {
                            Some(b) => (0..n)
                                .filter(|&y| y != x && space.units(x, y) <= *b)
                                .map(|y| y as u32)
                                .collect(),
                            None => Vec::new(),
                        })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        let full: u32 = bound
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_some())
            .fold(0, |m, (i, _)| m | (1 << i));
        Solver {
            space,
            link,
            bound: bound.into_iter().map(|b| b.unwrap_or(0)).collect(),
            near,
            order,
            color: vec![NONE; n],
            domain: vec![full; n],
            comp: vec![u32::MAX; n],
            comps: Vec::new(),
            trail: Vec::new(),
            queue: Vec::new(),
            nodes: 0,
            budget: options.budget,
            reach,
            memo: HashSet::new(),
            memo_limit,
        }
    }

    fn solve(&mut self) -> Result<bool, BudgetExhausted> {
        if self.domain.iter().any(|&d| d == 0) {
            return Ok(false);
        }
        self.dfs(0)
    }

    fn dfs(&mut self, mut pos: usize) -> Result<bool, BudgetExhausted> {
        while pos < self.order.len() && self.color[self.order[pos]] != NONE {
            pos += 1;
        }
        if pos == self.order.len() {
            return Ok(true);
        }
        let key = (self.memo_limit > 0).then(|| self.state_key());
        if key.as_ref().is_some_and(|k| self.memo.contains(k)) {
            return Ok(false);
        }
        let x = self.order[pos];
        let mut dom = self.domain[x];
        while dom != 0 {
            let c = dom.trailing_zeros() as usize;
            dom &= dom - 1;
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(BudgetExhausted);
            }
            let mark = (self.trail.len(), self.comps.len());
            if self.assign(x, c) && self.propagate() && self.dfs(pos + 1)? {
                return Ok(true);
            }
            self.undo(mark);
        }
        if let Some(k) = key {
            if self.memo.len() < self.memo_limit {
                self.memo.insert(k);
            }
        }
        Ok(false)
    }

    /// A description of the remaining subproblem that determines whether it
    /// can be completed: the unassigned points and, for every component some
    /// unassigned point would join, its color, the points that would join
    /// it, the points that could join without breaking the bound, and which
    /// pairs of such components could merge.
    fn state_key(&self) -> Vec<u64> {
        let space = self.space;
        let n = self.color.len();
        let mut key = vec![0u64; n.div_ceil(64)];
        let mut active: Vec<u32> = Vec::new();
        for y in 0..n {
            if self.color[y] != NONE {
                continue;
            }
            key[y / 64] |= 1 << (y % 64);
            for &z in &self.near[y] {
                let c = self.color[z as usize];
                if c != NONE && space.units(y, z as usize) < self.link[c as usize] {
                    let id = self.comp[z as usize];
                    if !active.contains(&id) {
                        active.push(id);
                    }
                }
            }
        }
        let mut summaries: Vec<(u8, Vec<u32>, Vec<u32>, u32)> = active
            .iter()
            .map(|&id| {
                let members = &self.comps[id as usize].members;
                let c = self.color[members[0] as usize];
                let (link, bound) = (self.link[c as usize], self.bound[c as usize]);
                let mut attach: Vec<u32> = members
                    .iter()
                    .flat_map(|&z| {
                        self.near[z as usize]
                            .iter()
                            .copied()
                            .filter(move |&y| space.units(z as usize, y as usize) < link)
                    })
                    .filter(|&y| self.color[y as usize] == NONE)
                    .collect();
                attach.sort_unstable();
                attach.dedup();
                let fits: Vec<u32> = self.reach[c as usize][members[0] as usize]
                    .iter()
                    .copied()
                    .filter(|&y| {
                        self.color[y as usize] == NONE
                            && members.iter().all(|&w| space.units(y as usize, w as usize) <= bound)
                    })
                    .collect();
                (c, attach, fits, id)
            })
            .collect();
        summaries.sort_unstable();
        for (c, attach, fits, _) in &summaries {
            key.push(*c as u64);
            key.push(attach.len() as u64);
            key.extend(attach.iter().map(|&y| y as u64));
            key.push(fits.len() as u64);
            key.extend(fits.iter().map(|&y| y as u64));
        }
        let mut bits = 0u64;
        let mut used = 0;
        for (i, a) in summaries.iter().enumerate() {
            for b in &summaries[i + 1..] {
                if a.0 != b.0 {
                    continue;
                }
                let bound = self.bound[a.0 as usize];
                let ma = &self.comps[a.3 as usize].members;
                let mb = &self.comps[b.3 as usize].members;
                let ok = ma
                    .iter()
                    .all(|&z| mb.iter().all(|&w| space.units(z as usize, w as usize) <= bound));
                bits |= (ok as u64) << used;
                used += 1;
                if used == 64 {
                    key.push(bits);
                    bits = 0;
                    used = 0;
                }
            }
        }
        key.push(bits);
        key
    }

    /// One pass in search order taking the lowest color that survives
    /// propagation; `None` when the budget ran out.
    fn greedy(&mut self) -> Option<bool> {
        if self.domain.iter().any(|&d| d == 0) {
            return Some(false);
        }
        for pos in 0..self.order.len() {
            let x = self.order[pos];
            if self.color[x] != NONE {
                continue;
            }
            let mut dom = self.domain[x];
            let mut placed = false;
            while dom != 0 {
                let c = dom.trailing_zeros() as usize;
                dom &= dom - 1;
                self.nodes += 1;
                if self.nodes > self.budget {
                    return None;
                }
                let mark = (self.trail.len(), self.comps.len());
                if self.assign(x, c) && self.propagate() {
                    placed = true;
                    break;
                }
                self.undo(mark);
            }
            if !placed {
                return Some(false);
            }
        }
        Some(true)
    }

    fn undo(&mut self, (trail_len, comps_len): (usize, usize)) {
        while self.trail.len() > trail_len {
            match self.trail.pop().expect("trail nonempty") {
                Undo::Domain(y, old) => self.domain[y] = old,
                Undo::Color(y) => self.color[y] = NONE,
                Undo::Comp(y, old) => self.comp[y] = old,
            }
        }
        self.comps.truncate(comps_len);
        self.queue.clear();
    }

    fn set_domain(&mut self, y: usize, new: u32) {
        self.trail.push(Undo::Domain(y, self.domain[y]));
        self.domain[y] = new;
    }

    /// Colors `x` with `c`, merges the components it links, checks the bound
    /// and removes `c` from unassigned points that could no longer join.
    fn assign(&mut self, x: usize, c: usize) -> bool {
        let space = self.space;
        let link = self.link[c];
        let bound = self.bound[c];
        self.trail.push(Undo::Color(x));
        self.color[x] = c as u8;
        if self.domain[x] != 1 << c {
            self.set_domain(x, 1 << c);
        }
        let mut parts: Vec<u32> = Vec::new();
        for &y in &self.near[x] {
            let y = y as usize;
            if self.color[y] == c as u8 && space.units(x, y) < link {
                let id = self.comp[y];
                if !parts.contains(&id) {
                    parts.push(id);
                }
            }
        }
        let mut members: Vec<u32> = vec![x as u32];
        for &id in &parts {
            let part = &self.comps[id as usize].members;
            // Distances inside a part already passed the bound.
            for &z in part {
                for &w in &members {
                    if space.units(z as usize, w as usize) > bound {
                        return false;
                    }
                }
            }
            members.extend_from_slice(part);
        }
        let id = self.comps.len() as u32;
        for &z in &members {
            self.trail.push(Undo::Comp(z as usize, self.comp[z as usize]));
            self.comp[z as usize] = id;
        }
        // Forward check: an unassigned neighbour that would join this
        // component and break the bound loses color c.
        let bit = 1u32 << c;
        let mut candidates: Vec<u32> = Vec::new();
        for &z in &members {
            for &y in &self.near[z as usize] {
                let yu = y as usize;
                if self.color[yu] == NONE
                    && self.domain[yu] & bit != 0
                    && space.units(z as usize, yu) < link
                    && !candidates.contains(&y)
                {
                    candidates.push(y);
                }
            }
        }
        for &y in &candidates {
            let y = y as usize;
            if members.iter().any(|&z| space.units(z as usize, y) > bound) {
                let new = self.domain[y] & !bit;
                self.set_domain(y, new);
                if new == 0 {
                    self.comps.push(Component { members });
                    return false;
                }
                if new.is_power_of_two() {
                    self.queue.push(y);
                }
            }
        }
        self.comps.push(Component { members });
        true
    }

    /// Assigns points whose domain shrank to one color.
    fn propagate(&mut self) -> bool {
        while let Some(y) = self.queue.pop() {
            if self.color[y] != NONE {
                continue;
            }
            let d = self.domain[y];
            if d == 0 {
                return false;
            }
            if !self.assign(y, d.trailing_zeros() as usize) {
                return false;
            }
        }
        true
    }
}

/// Members of the finite-scale dimension family: every nonempty `σ ⊆ scales`
/// (as sorted scale lists) for which the constraint built by `make` has no
/// decomposition.
fn infeasible_subsets<F>(
    space: &FiniteMetricSpace,
    scales: &[u64],
    options: &SearchOptions,
    make: F,
) -> Result<SetFamily, CoverError>
where
    F: Fn(&[u64]) -> DecompositionConstraint + Sync,
{
    let mut scales = scales.to_vec();
    scales.sort_unstable();
    scales.dedup();
    if scales.is_empty() {
        return Err(CoverError::EmptyScales);
    }
    if scales.len() > 20 {
        return Err(CoverError::TooManyIndices {
            max: 20,
            got: scales.len(),
        });
    }
    let subsets: Vec<Vec<u64>> = (1u32..(1 << scales.len()))
        .map(|mask| {
            scales
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &s)| s)
                .collect()
        })
        .collect();
    let decided: Vec<Result<Option<Vec<u64>>, CoverError>> = subsets
        .into_par_iter()
        .map(|sigma| {
            let result = find_decomposition(space, &make(&sigma), options)?;
            match result.outcome {
                SearchOutcome::Feasible { .. } => Ok(None),
                SearchOutcome::Infeasible => Ok(Some(sigma)),
                SearchOutcome::Unknown { .. } => Err(CoverError::Unknown(sigma)),
            }
        })
        .collect();
    let mut members = Vec::new();
    for d in decided {
        if let Some(sigma) = d? {
            members.push(sigma);
        }
    }
    Ok(SetFamily::explicit(
        GroundSet::finite(scales.iter().map(|&s| s as Label)).expect("deduplicated"),
        members,
    )
    .expect("members drawn from the ground set"))
}

/// The scale sets `σ ⊆ S` admitting no decomposition with gaps `d ≥ t_i` and
/// uniform bound `B`.
pub fn truncated_dim_family(
    space: &FiniteMetricSpace,
    scales: &[u64],
    bound: Rational,
    options: &SearchOptions,
) -> Result<SetFamily, CoverError> {
    if scales.contains(&0) {
        return Err(CoverError::NonPositive);
    }
    infeasible_subsets(space, scales, options, |sigma| DecompositionConstraint {
        indices: sigma
            .iter()
            .map(|&t| IndexConstraint {
                gap: Gap::AtLeast(Rational::from_integer(t as i64)),
                bound,
            })
            .collect(),
    })
}

/// How "disjoint" is read on a finite net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Separation {
    /// Sets of one family stay farther apart than the net resolution.
    Resolution,
    /// Sets of one family stay farther apart than the smallest positive distance.
    MinDistance,
}

/// Smallest positive distance in units.
pub fn min_positive_units(space: &FiniteMetricSpace) -> Option<u64> {
    let n = space.len();
    (0..n)
        .into_par_iter()
        .filter_map(|x| ((x + 1)..n).map(|y| space.units(x, y)).min())
        .min()
}

/// The scale sets `σ ⊆ S` for which the net admits no cover by families of
/// separated sets with `diam U ≤ 1/t_i` in family `i`.
pub fn topological_dim_family(
    net: &FiniteMetricSpace,
    resolution: Rational,
    separation: Separation,
    scales: &[u64],
    options: &SearchOptions,
) -> Result<SetFamily, CoverError> {
    if scales.contains(&0) || resolution <= Rational::from_integer(0) {
        return Err(CoverError::NonPositive);
    }
    let gap = match separation {
        Separation::Resolution => resolution,
        Separation::MinDistance => match min_positive_units(net) {
            Some(u) => net.to_rational(u),
            None => resolution,
        },
    };
    infeasible_subsets(net, scales, options, |sigma| DecompositionConstraint {
        indices: sigma
            .iter()
            .map(|&t| IndexConstraint {
                gap: Gap::Exceeds(gap),
                bound: Rational::new(1, t as i64),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Norm;
    use crate::ordinal::Ordinal;

    fn exact(space: &FiniteMetricSpace, c: &DecompositionConstraint) -> SearchOutcome {
        find_decomposition(space, c, &SearchOptions::default()).unwrap().outcome
    }

    #[test]
    fn verify_examples() {
        let x = FiniteMetricSpace::interval(9);
        let c = DecompositionConstraint::at_least_int(&[(3, 2), (4, 2)]);
        let d = CoverDecomposition {
            families: vec![
                SubsetFamily::new(vec![vec![0, 1, 2], vec![6, 7, 8]]).unwrap(),
                SubsetFamily::new(vec![vec![3, 4, 5], vec![9]]).unwrap(),
            ],
            coloring: None,
        };
        assert!(verify(&x, &d, &c).unwrap().is_ok());
        let mut dropped = d.clone();
        dropped.families[1] = SubsetFamily::new(vec![vec![3, 4, 5]]).unwrap();
        assert_eq!(verify(&x, &dropped, &c).unwrap().uncovered, vec![9]);
        let whole = CoverDecomposition {
            families: vec![SubsetFamily::new(vec![(0..10).collect()]).unwrap()],
            coloring: None,
        };
        let c1 = DecompositionConstraint::at_least_int(&[(50, 9)]);
        assert!(verify(&x, &whole, &c1).unwrap().is_ok());
    }

    #[test]
    fn search_examples() {
        let x = FiniteMetricSpace::interval(9);
        assert_eq!(
            exact(&x, &DecompositionConstraint::at_least_int(&[(3, 2)])),
            SearchOutcome::Infeasible
        );
        let c = DecompositionConstraint::at_least_int(&[(3, 2), (4, 2)]);
        match exact(&x, &c) {
            SearchOutcome::Feasible { decomposition } => {
                assert!(verify(&x, &decomposition, &c).unwrap().is_ok())
            }
            other => panic!("expected a decomposition, got {other:?}"),
        }
        let c = DecompositionConstraint::at_least_int(&[(1000, 9)]);
        assert!(exact(&x, &c).is_feasible());
    }

    #[test]
    fn greedy_falls_back_on_small_spaces() {
        let x = FiniteMetricSpace::interval(9);
        let opts = SearchOptions {
            strategy: Strategy::Greedy,
            ..SearchOptions::default()
        };
        let c = DecompositionConstraint::at_least_int(&[(3, 2)]);
        assert_eq!(
            find_decomposition(&x, &c, &opts).unwrap().outcome,
            SearchOutcome::Infeasible
        );
        let big = FiniteMetricSpace::interval(99);
        let opts = SearchOptions {
            strategy: Strategy::Greedy,
            exact_threshold: 10,
            ..SearchOptions::default()
        };
        assert!(matches!(
            find_decomposition(&big, &c, &opts).unwrap().outcome,
            SearchOutcome::Unknown { .. }
        ));
    }

    #[test]
    fn budget_gives_unknown() {
        let g = FiniteMetricSpace::grid(2, 8, Norm::Linf);
        let c = DecompositionConstraint::at_least_int(&[(2, 2), (2, 2)]);
        let opts = SearchOptions {
            budget: 5,
            ..SearchOptions::default()
        };
        assert!(matches!(
            find_decomposition(&g, &c, &opts).unwrap().outcome,
            SearchOutcome::Unknown { .. }
        ));
    }

    #[test]
    fn truncated_family_examples() {
        let x = FiniteMetricSpace::interval(9);
        let opts = SearchOptions::default();
        let f = truncated_dim_family(&x, &[3, 4], Rational::from_integer(2), &opts).unwrap();
        assert_eq!(f.members().unwrap(), &[vec![3], vec![4]]);
        assert_eq!(f.ord().unwrap(), Ordinal::finite(1));
        let f = truncated_dim_family(&x, &[5], Rational::from_integer(9), &opts).unwrap();
        assert!(f.members().unwrap().is_empty());
        let f = truncated_dim_family(&x, &[3, 4], Rational::from_integer(0), &opts).unwrap();
        assert_eq!(f.ord().unwrap(), Ordinal::finite(2));
    }

    #[test]
    fn unit_interval_net() {
        let net = FiniteMetricSpace::scaled_interval(64, 64);
        let f = topological_dim_family(
            &net,
            Rational::new(1, 64),
            Separation::Resolution,
            &[4, 8],
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(f.members().unwrap(), &[vec![4], vec![8]]);
        assert_eq!(f.ord().unwrap(), Ordinal::finite(1));
        let point = FiniteMetricSpace::interval(0);
        let f = topological_dim_family(
            &point,
            Rational::new(1, 64),
            Separation::MinDistance,
            &[4, 8],
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(f.ord().unwrap(), Ordinal::zero());
    }
}
