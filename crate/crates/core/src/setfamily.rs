//! Families of finite label sets and their recursive ordinal `Ord`.
//!
//! `Ord ∅ = 0`; for a nonempty family, `Ord M` is `ξ + 1` when
//! `ξ = sup_a Ord M^a` is attained and `ξ` otherwise, where
//! `M^σ = {τ ≠ ∅ : τ ∪ σ ∈ M, τ ∩ σ = ∅}`.
//!
//! Explicit families are evaluated by the recursion itself. Only labels that
//! occur in some member are visited: any other label restricts the family to
//! `∅`, contributing `0`, and a nonempty family always has a visited label
//! with value `≥ 0`, so the skipped labels never change the supremum or its
//! attainment. Restrictions are memoized by the restricting set `σ`, since
//! `(M^σ)^a = M^{σ ∪ {a}}` makes `σ` a complete key inside one evaluation.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ordinal::{sup_of_parametrized, Ordinal, SequenceForm, Unresolved};

pub type Label = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("unresolved: {0}")]
    Unresolved(String),
    #[error("{0} requires an explicit family")]
    NotExplicit(&'static str),
    #[error("member {member:?} uses label {label} outside the ground set")]
    LabelOutsideGround { member: Vec<Label>, label: Label },
    #[error("families contain only nonempty sets")]
    EmptyMember,
    #[error("ground labels must be distinct (label {0} repeats)")]
    DuplicateLabel(Label),
    #[error("no witness found: {0}")]
    NotFound(String),
    #[error("unknown builtin family {0:?}")]
    UnknownBuiltin(String),
    #[error("{0}")]
    Invalid(String),
}

impl From<Unresolved> for FamilyError {
    fn from(u: Unresolved) -> Self {
        FamilyError::Unresolved(u.0)
    }
}

/// The ground set `L` a family lives in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroundSet {
    /// Distinct labels, kept sorted.
    Finite(Vec<Label>),
    /// `{min, min + 1, …}`.
    Naturals { min: Label },
}

impl GroundSet {
    pub fn finite(labels: impl IntoIterator<Item = Label>) -> Result<Self, FamilyError> {
        let mut seen = BTreeSet::new();
        for l in labels {
            if !seen.insert(l) {
                return Err(FamilyError::DuplicateLabel(l));
            }
        }
        Ok(GroundSet::Finite(seen.into_iter().collect()))
    }

    pub fn naturals(min: Label) -> Self {
        GroundSet::Naturals { min }
    }

    pub fn contains(&self, label: Label) -> bool {
        match self {
            GroundSet::Finite(labels) => labels.binary_search(&label).is_ok(),
            GroundSet::Naturals { min } => label >= *min,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, GroundSet::Finite(_))
    }

    /// Number of labels, `None` when infinite.
    pub fn size(&self) -> Option<usize> {
        match self {
            GroundSet::Finite(labels) => Some(labels.len()),
            GroundSet::Naturals { .. } => None,
        }
    }

    /// The `k`-th label (1-based), used to parametrize restrictions by one label.
    pub fn nth(&self, k: u64) -> Option<Label> {
        match self {
            GroundSet::Finite(labels) => labels.get(k.checked_sub(1)? as usize).copied(),
            GroundSet::Naturals { min } => min.checked_add(k.checked_sub(1)?),
        }
    }
}

/// Largest cardinality of a member containing a given set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardBound {
    /// No member contains the set.
    Empty,
    Bounded(u64),
    Unbounded,
}

/// A symbolic inclusive family described by a membership test and a
/// maximum-cardinality function.
pub trait InclusiveFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    fn contains(&self, ground: &GroundSet, set: &[Label]) -> bool;

    /// Largest `|τ|` over members `τ ⊇ σ`; `σ` may be empty.
    fn max_card_with(&self, ground: &GroundSet, sigma: &[Label]) -> CardBound;

    /// `k ↦ Ord M^{a_k}` where `a_k` is the `k`-th ground label. Consulted only
    /// when `max_card_with(∅)` is unbounded.
    fn singleton_profile(&self, ground: &GroundSet) -> SequenceForm;
}

/// `{σ : |σ| ≤ min σ}` over the naturals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CardMin;

impl InclusiveFamily for CardMin {
    fn name(&self) -> String {
        "card_min".into()
    }

    fn contains(&self, ground: &GroundSet, set: &[Label]) -> bool {
        match set.first() {
            Some(&min) => {
                set.iter().all(|&l| ground.contains(l)) && set.len() as u64 <= min
            }
            None => false,
        }
    }

    fn max_card_with(&self, ground: &GroundSet, sigma: &[Label]) -> CardBound {
        if !sigma.iter().all(|&l| ground.contains(l)) {
            return CardBound::Empty;
        }
        match sigma.first() {
            None => CardBound::Unbounded,
            // Members through σ have minimum ≤ min σ; adding labels above
            // max σ reaches exactly min σ.
            Some(&min) if sigma.len() as u64 <= min => CardBound::Bounded(min),
            Some(_) => CardBound::Empty,
        }
    }

    fn singleton_profile(&self, ground: &GroundSet) -> SequenceForm {
        let GroundSet::Naturals { min } = *ground else {
            return SequenceForm::Other("card_min over a finite ground set".into());
        };
        // Ord M^{a} = a − 1 for a ≥ 1 and 0 for a = 0.
        let mut prefix = Vec::new();
        if min == 0 {
            prefix.push(Ordinal::zero());
        }
        let first = min.max(1) as i64;
        // k-th label past the prefix is first + (k − prefix.len() − 1).
        let offset = first - 2 - prefix.len() as i64;
        SequenceForm::Affine {
            prefix,
            slope: 1,
            offset,
        }
    }
}

/// All nonempty sets of at most `n` ground labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CardAtMost(pub u64);

impl InclusiveFamily for CardAtMost {
    fn name(&self) -> String {
        format!("card_at_most({})", self.0)
    }

    fn contains(&self, ground: &GroundSet, set: &[Label]) -> bool {
        !set.is_empty() && set.len() as u64 <= self.0 && set.iter().all(|&l| ground.contains(l))
    }

    fn max_card_with(&self, ground: &GroundSet, sigma: &[Label]) -> CardBound {
        let cap = match ground.size() {
            Some(s) => self.0.min(s as u64),
            None => self.0,
        };
        if sigma.len() as u64 > cap || !sigma.iter().all(|&l| ground.contains(l)) || cap == 0 {
            CardBound::Empty
        } else {
            CardBound::Bounded(cap)
        }
    }

    fn singleton_profile(&self, _ground: &GroundSet) -> SequenceForm {
        SequenceForm::EventuallyConstant {
            prefix: Vec::new(),
            value: Ordinal::finite(self.0.saturating_sub(1)),
        }
    }
}

#[derive(Debug, Clone)]
enum Body {
    /// Sorted, deduplicated, nonempty sorted members.
    Explicit(Vec<Vec<Label>>),
    /// `base^σ` for a symbolic `base`.
    Symbolic {
        family: Arc<dyn InclusiveFamily>,
        sigma: Vec<Label>,
    },
}

/// A family `M` of nonempty finite subsets of a ground set.
#[derive(Debug, Clone)]
pub struct SetFamily {
    ground: GroundSet,
    body: Body,
}

fn normalize(set: &[Label]) -> Vec<Label> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

fn is_subset(small: &[Label], big: &[Label]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

fn difference(a: &[Label], b: &[Label]) -> Vec<Label> {
    a.iter().copied().filter(|x| b.binary_search(x).is_err()).collect()
}

fn union(a: &[Label], b: &[Label]) -> Vec<Label> {
    let mut u: Vec<Label> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

impl SetFamily {
    /// An explicit family. Members are sorted and deduplicated.
    pub fn explicit(ground: GroundSet, members: Vec<Vec<Label>>) -> Result<Self, FamilyError> {
        let mut out: Vec<Vec<Label>> = Vec::with_capacity(members.len());
        for m in members {
            let m = normalize(&m);
            if m.is_empty() {
                return Err(FamilyError::EmptyMember);
            }
            if let Some(&label) = m.iter().find(|&&l| !ground.contains(l)) {
                return Err(FamilyError::LabelOutsideGround { member: m, label });
            }
            out.push(m);
        }
        out.sort();
        out.dedup();
        Ok(SetFamily {
            ground,
            body: Body::Explicit(out),
        })
    }

    /// An explicit family whose ground set is the union of its members.
    pub fn from_members(members: Vec<Vec<Label>>) -> Result<Self, FamilyError> {
        let labels: BTreeSet<Label> = members.iter().flatten().copied().collect();
        Self::explicit(GroundSet::Finite(labels.into_iter().collect()), members)
    }

    pub fn symbolic(ground: GroundSet, family: Arc<dyn InclusiveFamily>) -> Self {
        SetFamily {
            ground,
            body: Body::Symbolic {
                family,
                sigma: Vec::new(),
            },
        }
    }

    /// `{σ : |σ| ≤ min σ}` over the naturals `≥ min`.
    pub fn card_min(min: Label) -> Self {
        Self::symbolic(GroundSet::naturals(min), Arc::new(CardMin))
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    /// Members of an explicit family.
    pub fn members(&self) -> Option<&[Vec<Label>]> {
        match &self.body {
            Body::Explicit(m) => Some(m),
            Body::Symbolic { .. } => None,
        }
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.body, Body::Explicit(_))
    }

    pub fn contains(&self, set: &[Label]) -> bool {
        let set = normalize(set);
        match &self.body {
            Body::Explicit(m) => m.binary_search(&set).is_ok(),
            Body::Symbolic { family, sigma } => {
                !set.is_empty()
                    && set.iter().all(|l| sigma.binary_search(l).is_err())
                    && family.contains(&self.ground, &union(&set, sigma))
            }
        }
    }

    /// `M^σ`. Explicit families are materialized; symbolic ones accumulate `σ`.
    pub fn restrict(&self, sigma: &[Label]) -> SetFamily {
        let sigma = normalize(sigma);
        let body = match &self.body {
            Body::Explicit(members) => {
                let mut out: Vec<Vec<Label>> = members
                    .iter()
                    .filter(|m| m.len() > sigma.len() && is_subset(&sigma, m))
                    .map(|m| difference(m, &sigma))
                    .collect();
                out.sort();
                out.dedup();
                Body::Explicit(out)
            }
            Body::Symbolic {
                family,
                sigma: inner,
            } => {
                if sigma.iter().any(|l| inner.binary_search(l).is_ok()) {
                    // Members of M^inner avoid inner, so nothing survives.
                    Body::Explicit(Vec::new())
                } else {
                    Body::Symbolic {
                        family: Arc::clone(family),
                        sigma: union(inner, &sigma),
                    }
                }
            }
        };
        SetFamily {
            ground: self.ground.clone(),
            body,
        }
    }

    /// `Ord M`.
    pub fn ord(&self) -> Result<Ordinal, FamilyError> {
        match &self.body {
            Body::Explicit(members) => Ok(ord_explicit(members)),
            Body::Symbolic { family, sigma } => ord_symbolic(family.as_ref(), &self.ground, sigma),
        }
    }

    /// Every nonempty subset of every member is a member. Symbolic families
    /// are inclusive by construction.
    pub fn is_inclusive(&self) -> bool {
        match &self.body {
            Body::Explicit(members) => {
                let set: HashSet<&[Label]> = members.iter().map(Vec::as_slice).collect();
                members.iter().filter(|m| m.len() > 1).all(|m| {
                    (0..m.len()).all(|skip| {
                        let sub: Vec<Label> = m
                            .iter()
                            .enumerate()
                            .filter(|&(k, _)| k != skip)
                            .map(|(_, &l)| l)
                            .collect();
                        set.contains(sub.as_slice())
                    })
                })
            }
            Body::Symbolic { .. } => true,
        }
    }

    /// Whether every member has at most `n` elements. Equivalent to `Ord M ≤ n`.
    pub fn finite_lemma_check(&self, n: u64) -> Result<bool, FamilyError> {
        match &self.body {
            Body::Explicit(members) => Ok(members.iter().all(|m| m.len() as u64 <= n)),
            Body::Symbolic { .. } => Err(FamilyError::NotExplicit("finite_lemma_check")),
        }
    }

    /// Smallest `σ` (by size, then lexicographically) disjoint from `τ` with
    /// `Ord M^{τ ∪ σ} = ξ`.
    pub fn hereditary_witness(&self, tau: &[Label], xi: &Ordinal) -> Result<Vec<Label>, FamilyError> {
        if !self.is_explicit() {
            return Err(FamilyError::NotExplicit("hereditary_witness"));
        }
        let tau = normalize(tau);
        let base = self.restrict(&tau);
        let base_ord = base.ord()?;
        if *xi > base_ord {
            return Err(FamilyError::NotFound(format!(
                "target {xi} exceeds Ord M^τ = {base_ord}"
            )));
        }
        let labels: Vec<Label> = base
            .members()
            .unwrap_or_default()
            .iter()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for size in 0..=labels.len() {
            for combo in combinations(labels.len(), size) {
                let sigma: Vec<Label> = combo.iter().map(|&k| labels[k]).collect();
                if base.restrict(&sigma).ord()? == *xi {
                    return Ok(sigma);
                }
            }
        }
        Err(FamilyError::NotFound(format!("no σ reaches {xi}")))
    }

    /// Longest sequence `a_1, …, a_k` (`k ≤ depth`) of distinct labels whose
    /// prefixes `{a_1, …, a_j}` are all members.
    pub fn chain_search(&self, depth: usize) -> Result<Vec<Label>, FamilyError> {
        match &self.body {
            Body::Explicit(members) => Ok(explicit_chain(members, depth)),
            Body::Symbolic { family, sigma } if sigma.is_empty() && family.name() == "card_min" => {
                let GroundSet::Naturals { min } = self.ground else {
                    return Err(FamilyError::Unresolved("card_min needs the naturals".into()));
                };
                // {d, …, d + j − 1} has j ≤ d elements, all ≥ d.
                let start = (depth as u64).max(min).max(1);
                Ok((0..depth as u64).map(|j| start + j).collect())
            }
            Body::Symbolic { family, .. } => Err(FamilyError::Unresolved(format!(
                "chain search over {}",
                family.name()
            ))),
        }
    }

    /// Applies an injective relabeling to an explicit family.
    pub fn relabel(&self, map: impl Fn(Label) -> Label) -> Result<SetFamily, FamilyError> {
        let Body::Explicit(members) = &self.body else {
            return Err(FamilyError::NotExplicit("relabel"));
        };
        let ground = match &self.ground {
            GroundSet::Finite(labels) => GroundSet::finite(labels.iter().map(|&l| map(l)))?,
            GroundSet::Naturals { .. } => {
                return Err(FamilyError::Invalid("relabeling needs a finite ground set".into()))
            }
        };
        SetFamily::explicit(
            ground,
            members.iter().map(|m| m.iter().map(|&l| map(l)).collect()).collect(),
        )
    }
}

fn ord_explicit(members: &[Vec<Label>]) -> Ordinal {
    if members.is_empty() {
        return Ordinal::zero();
    }
    let mut memo: HashMap<Vec<Label>, u64> = HashMap::new();
    Ordinal::finite(ord_rec(members, &[], &mut memo))
}

/// `Ord M^σ`, finite for explicit families.
fn ord_rec(members: &[Vec<Label>], sigma: &[Label], memo: &mut HashMap<Vec<Label>, u64>) -> u64 {
    if let Some(&v) = memo.get(sigma) {
        return v;
    }
    let relevant: BTreeSet<Label> = members
        .iter()
        .filter(|m| m.len() > sigma.len() && is_subset(sigma, m))
        .flat_map(|m| m.iter().copied())
        .filter(|l| sigma.binary_search(l).is_err())
        .collect();
    // Empty M^σ has Ord 0. Otherwise the supremum over a finite set of
    // labels is a maximum, hence attained, and the value is max + 1.
    let value = relevant
        .iter()
        .map(|&a| ord_rec(members, &union(sigma, &[a]), memo))
        .max()
        .map_or(0, |xi| xi + 1);
    memo.insert(sigma.to_vec(), value);
    value
}

fn ord_symbolic(
    family: &dyn InclusiveFamily,
    ground: &GroundSet,
    sigma: &[Label],
) -> Result<Ordinal, FamilyError> {
    match family.max_card_with(ground, sigma) {
        CardBound::Empty => Ok(Ordinal::zero()),
        CardBound::Bounded(c) => Ok(Ordinal::finite(c.saturating_sub(sigma.len() as u64))),
        CardBound::Unbounded if sigma.is_empty() => {
            let sup = sup_of_parametrized(&family.singleton_profile(ground))?;
            Ok(if sup.attained {
                sup.value.succ()
            } else {
                sup.value
            })
        }
        CardBound::Unbounded => Err(FamilyError::Unresolved(format!(
            "{} restricted by {sigma:?} has no cardinality bound",
            family.name()
        ))),
    }
}

fn explicit_chain(members: &[Vec<Label>], depth: usize) -> Vec<Label> {
    let set: HashSet<&[Label]> = members.iter().map(Vec::as_slice).collect();
    let labels: Vec<Label> = members
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut best = Vec::new();
    let mut chain = Vec::new();
    extend_chain(&set, &labels, depth, &mut chain, &mut best);
    best
}

fn extend_chain(
    set: &HashSet<&[Label]>,
    labels: &[Label],
    depth: usize,
    chain: &mut Vec<Label>,
    best: &mut Vec<Label>,
) {
    if chain.len() > best.len() {
        *best = chain.clone();
    }
    if chain.len() == depth || best.len() == depth {
        return;
    }
    for &a in labels {
        if chain.contains(&a) {
            continue;
        }
        let prefix = union(chain, &[a]);
        if set.contains(prefix.as_slice()) {
            chain.push(a);
            extend_chain(set, labels, depth, chain, best);
            chain.pop();
        }
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Ground set as it appears in family files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundRepr {
    Finite { labels: Vec<Label> },
    Naturals {
        #[serde(default)]
        min: Label,
    },
}

/// The JSON family format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyFile {
    Builtin {
        builtin: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ground: Option<GroundRepr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        restrict: Option<Vec<Label>>,
    },
    Explicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ground: Option<GroundRepr>,
        members: Vec<Vec<Label>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        restrict: Option<Vec<Label>>,
    },
}

impl GroundRepr {
    fn to_ground(&self) -> Result<GroundSet, FamilyError> {
        match self {
            GroundRepr::Finite { labels } => GroundSet::finite(labels.iter().copied()),
            GroundRepr::Naturals { min } => Ok(GroundSet::naturals(*min)),
        }
    }
}

impl From<&GroundSet> for GroundRepr {
    fn from(g: &GroundSet) -> Self {
        match g {
            GroundSet::Finite(labels) => GroundRepr::Finite {
                labels: labels.clone(),
            },
            GroundSet::Naturals { min } => GroundRepr::Naturals { min: *min },
        }
    }
}

impl FamilyFile {
    pub fn to_family(&self) -> Result<SetFamily, FamilyError> {
        let (family, restrict) = match self {
            FamilyFile::Builtin {
                builtin,
                n,
                ground,
                restrict,
            } => {
                let ground = ground
                    .as_ref()
                    .map(GroundRepr::to_ground)
                    .transpose()?
                    .unwrap_or(GroundSet::naturals(0));
                let family: Arc<dyn InclusiveFamily> = match builtin.as_str() {
                    "card_min" => {
                        if ground.is_finite() {
                            return Err(FamilyError::Invalid(
                                "card_min is defined over the naturals".into(),
                            ));
                        }
                        Arc::new(CardMin)
                    }
                    "card_at_most" => Arc::new(CardAtMost(n.ok_or_else(|| {
                        FamilyError::Invalid("card_at_most needs \"n\"".into())
                    })?)),
                    other => return Err(FamilyError::UnknownBuiltin(other.to_string())),
                };
                (SetFamily::symbolic(ground, family), restrict)
            }
            FamilyFile::Explicit {
                ground,
                members,
                restrict,
            } => {
                let family = match ground {
                    Some(g) => SetFamily::explicit(g.to_ground()?, members.clone())?,
                    None => SetFamily::from_members(members.clone())?,
                };
                (family, restrict)
            }
        };
        Ok(match restrict {
            Some(sigma) => family.restrict(sigma),
            None => family,
        })
    }

    /// File form of an explicit family.
    pub fn from_explicit(family: &SetFamily) -> Option<FamilyFile> {
        Some(FamilyFile::Explicit {
            ground: Some(GroundRepr::from(family.ground())),
            members: family.members()?.to_vec(),
            restrict: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fam(members: &[&[Label]]) -> SetFamily {
        SetFamily::from_members(members.iter().map(|m| m.to_vec()).collect()).unwrap()
    }

    #[test]
    fn restrict_examples() {
        let m = fam(&[&[1], &[1, 2]]);
        assert_eq!(m.restrict(&[1]).members().unwrap(), &[vec![2]]);
        assert_eq!(m.restrict(&[]).members(), m.members());
        let m = fam(&[&[1, 2, 3]]);
        assert_eq!(m.restrict(&[2, 3]).members().unwrap(), &[vec![1]]);
    }

    #[test]
    fn ord_examples() {
        assert_eq!(fam(&[]).ord().unwrap(), Ordinal::zero());
        assert_eq!(fam(&[&[1], &[2], &[1, 2]]).ord().unwrap(), Ordinal::finite(2));
        assert_eq!(SetFamily::card_min(0).ord().unwrap(), Ordinal::omega());
        assert_eq!(SetFamily::card_min(5).ord().unwrap(), Ordinal::omega());
    }

    #[test]
    fn card_min_restrictions() {
        let m = SetFamily::card_min(0);
        for a in 0..40u64 {
            let expected = a.saturating_sub(1);
            assert_eq!(m.restrict(&[a]).ord().unwrap(), Ordinal::finite(expected), "a = {a}");
        }
        assert!(m.contains(&[3, 7, 9]));
        assert!(!m.contains(&[2, 7, 9]));
        assert!(!m.contains(&[0]));
        assert_eq!(m.restrict(&[3, 7]).ord().unwrap(), Ordinal::finite(1));
        assert_eq!(m.restrict(&[3]).restrict(&[3]).ord().unwrap(), Ordinal::zero());
    }

    #[test]
    fn card_at_most() {
        let m = SetFamily::symbolic(GroundSet::naturals(0), Arc::new(CardAtMost(3)));
        assert_eq!(m.ord().unwrap(), Ordinal::finite(3));
        assert_eq!(m.restrict(&[4, 9]).ord().unwrap(), Ordinal::finite(1));
        let small = SetFamily::symbolic(GroundSet::finite([1, 2]).unwrap(), Arc::new(CardAtMost(3)));
        assert_eq!(small.ord().unwrap(), Ordinal::finite(2));
    }

    #[test]
    fn inclusive_examples() {
        assert!(fam(&[&[1], &[2], &[1, 2]]).is_inclusive());
        assert!(!fam(&[&[1, 2]]).is_inclusive());
        assert!(fam(&[]).is_inclusive());
    }

    #[test]
    fn finite_lemma_examples() {
        assert!(fam(&[&[1], &[2]]).finite_lemma_check(1).unwrap());
        assert!(!fam(&[&[1, 2]]).finite_lemma_check(1).unwrap());
    }

    #[test]
    fn hereditary_examples() {
        let m = fam(&[&[1], &[2], &[1, 2]]);
        assert_eq!(m.hereditary_witness(&[], &Ordinal::finite(1)).unwrap(), vec![1]);
        assert_eq!(m.hereditary_witness(&[], &Ordinal::finite(2)).unwrap(), Vec::<Label>::new());
        let m = fam(&[&[1], &[2], &[3], &[1, 2], &[2, 3]]);
        let sigma = m.hereditary_witness(&[], &Ordinal::zero()).unwrap();
        assert_eq!(m.restrict(&sigma).ord().unwrap(), Ordinal::zero());
        assert!(m.hereditary_witness(&[], &Ordinal::finite(3)).is_err());
    }

    #[test]
    fn chain_examples() {
        assert_eq!(fam(&[&[1], &[1, 2]]).chain_search(5).unwrap(), vec![1, 2]);
        assert!(fam(&[]).chain_search(5).unwrap().is_empty());
        let m = SetFamily::card_min(0);
        let chain = m.chain_search(4).unwrap();
        assert_eq!(chain.len(), 4);
        for j in 1..=4 {
            assert!(m.contains(&chain[..j]));
        }
    }

    #[test]
    fn json_forms() {
        let f: FamilyFile = serde_json::from_str(r#"{"builtin":"card_min"}"#).unwrap();
        assert_eq!(f.to_family().unwrap().ord().unwrap(), Ordinal::omega());
        let f: FamilyFile = serde_json::from_str(
            r#"{"ground":{"kind":"finite","labels":[1,2,3]},"members":[[1],[2,1]]}"#,
        )
        .unwrap();
        let fam = f.to_family().unwrap();
        assert_eq!(fam.ord().unwrap(), Ordinal::finite(2));
        assert_eq!(fam.ground().size(), Some(3));
        let bad: FamilyFile =
            serde_json::from_str(r#"{"ground":{"kind":"finite","labels":[1]},"members":[[2]]}"#).unwrap();
        assert!(bad.to_family().is_err());
    }

    fn family_strategy(ground: u64) -> impl Strategy<Value = Vec<Vec<Label>>> {
        prop::collection::vec(prop::collection::btree_set(0..ground, 1..=ground as usize), 0..12)
            .prop_map(|v| v.into_iter().map(|s| s.into_iter().collect()).collect())
    }

    proptest! {
        #[test]
        fn ord_is_max_cardinality(members in family_strategy(6)) {
            let m = SetFamily::from_members(members.clone()).unwrap();
            let max = members.iter().map(|s| s.len() as u64).max().unwrap_or(0);
            prop_assert_eq!(m.ord().unwrap(), Ordinal::finite(max));
        }

        #[test]
        fn restriction_law(members in family_strategy(5)) {
            let m = SetFamily::from_members(members).unwrap();
            let ord = m.ord().unwrap().as_finite().unwrap();
            let ground: Vec<Label> = (0..5).collect();
            for alpha in 0..=6u64 {
                let by_def = ground
                    .iter()
                    .all(|&a| m.restrict(&[a]).ord().unwrap() < Ordinal::finite(alpha));
                // Ord M ≤ α ⇔ every restriction is < α, except that the empty
                // family is ≤ 0 with vacuous restrictions at α = 0.
                let lhs = ord <= alpha;
                if m.members().unwrap().is_empty() {
                    prop_assert!(lhs);
                } else {
                    prop_assert_eq!(lhs, by_def);
                }
            }
        }

        #[test]
        fn inclusion_monotone(a in family_strategy(6), b in family_strategy(6)) {
            let small = SetFamily::from_members(a.clone()).unwrap();
            let big = SetFamily::from_members(a.into_iter().chain(b).collect()).unwrap();
            prop_assert!(small.ord().unwrap() <= big.ord().unwrap());
        }

        #[test]
        fn hereditary_always_found(members in family_strategy(5), tau in prop::collection::btree_set(0u64..5, 0..3)) {
            let m = SetFamily::from_members(members).unwrap();
            let tau: Vec<Label> = tau.into_iter().collect();
            let top = m.restrict(&tau).ord().unwrap().as_finite().unwrap();
            for xi in 0..=top {
                let sigma = m.hereditary_witness(&tau, &Ordinal::finite(xi)).unwrap();
                prop_assert_eq!(m.restrict(&union(&tau, &sigma)).ord().unwrap(), Ordinal::finite(xi));
            }
        }
    }
}
