//! The acceptance suite as a library: each criterion compares the library
//! against an independent oracle or a proved bound and returns a
//! deterministic summary. Timings are left to the caller.

pub mod oracle;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::covers::{
    find_decomposition, topological_dim_family, truncated_dim_family, verify, DecompositionConstraint, Gap,
    IndexConstraint, SearchOptions, SearchOrder, SearchOutcome, Separation,
};
use crate::metric::{FiniteMetricSpace, Norm, Rational, SubsetFamily};
use crate::ordinal::Ordinal;
use crate::partition::{block_for_gap, striped_decomposition, PartitionOfUnity, ScaleSchedule};
use crate::roe::commutative::net_intervals;
use crate::roe::cpc::CpcOutcome;
use crate::roe::{
    build_commutative_witness, build_cpc_witness, commutator_check, verify_mfq, verify_nfq, NormOptions,
    RoeOperator,
};
use crate::setfamily::{GroundSet, Label, SetFamily};

use oracle::{all_inclusive_families, brute_force_profile, cross_bricks, naive_ord, profile_admits, random_family};

pub const DEFAULT_SEED: u64 = 20240611;

/// Criterion ids with their names.
pub const CRITERIA: [(u32, &str); 11] = [
    (1, "ord matches naive recursion"),
    (2, "finite lemma equivalence"),
    (3, "monotonicity and relabeling"),
    (4, "card_min family"),
    (5, "partition constants"),
    (6, "cover search vs enumeration"),
    (7, "truncated dimension profile"),
    (8, "topological case on nets"),
    (9, "commutator estimate"),
    (10, "block compression witness"),
    (11, "commutative witness"),
];

/// Failure messages kept per criterion.
const MAX_FAILURES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub checks: u64,
    pub failures: Vec<String>,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub version: String,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
}

struct Tally {
    checks: u64,
    failures: Vec<String>,
    failed: u64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            checks: 0,
            failures: Vec::new(),
            failed: 0,
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_FAILURES {
                self.failures.push(msg());
            }
        }
    }

    fn finish(self, id: u32, details: Value) -> CriterionResult {
        let name = CRITERIA.iter().find(|c| c.0 == id).map_or("", |c| c.1);
        let mut failures = self.failures;
        if self.failed as usize > failures.len() {
            failures.push(format!("... {} failures in total", self.failed));
        }
        CriterionResult {
            id,
            name: name.to_string(),
            passed: self.failed == 0 && self.checks > 0,
            checks: self.checks,
            failures,
            details,
        }
    }
}

fn rng_for(seed: u64, id: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(id as u64 + 1)))
}

/// Runs the given criteria in order.
pub fn run(seed: u64, ids: &[u32]) -> SelftestReport {
    let criteria: Vec<CriterionResult> = ids.iter().map(|&id| run_criterion(id, seed)).collect();
    SelftestReport {
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}

pub fn all_ids() -> Vec<u32> {
    CRITERIA.iter().map(|c| c.0).collect()
}

pub fn run_criterion(id: u32, seed: u64) -> CriterionResult {
    match id {
        1 => ord_vs_naive(seed),
        2 => finite_lemma(seed),
        3 => monotone_and_relabel(seed),
        4 => card_min(),
        5 => partition_constants(),
        6 => search_vs_enumeration(seed),
        7 => truncated_profile(),
        8 => topological_nets(),
        9 => commutator_estimate(seed),
        10 => cpc_witness(seed),
        11 => commutative_witness(),
        _ => {
            let mut t = Tally::new();
            t.check(false, || format!("no criterion {id}"));
            t.finish(id, Value::Null)
        }
    }
}

/// Every inclusive family over ground sets of size ≤ 5 and 500 random
/// families over size ≤ 7, with their ground sizes.
fn ord_population(seed: u64) -> Vec<(usize, Vec<Vec<Label>>)> {
    let mut pop: Vec<(usize, Vec<Vec<Label>>)> = (0..=5)
        .flat_map(|n| all_inclusive_families(n).into_iter().map(move |f| (n, f)))
        .collect();
    let mut rng = rng_for(seed, 1);
    for _ in 0..500 {
        let n = rng.random_range(1..=7);
        let p = rng.random_range(0.02..0.5);
        pop.push((n, random_family(n, p, &mut rng)));
    }
    pop
}

fn explicit(n: usize, members: &[Vec<Label>]) -> SetFamily {
    SetFamily::explicit(GroundSet::finite(0..n as Label).expect("distinct labels"), members.to_vec())
        .expect("members lie in the ground set")
}

fn ord_vs_naive(seed: u64) -> CriterionResult {
    let pop = ord_population(seed);
    let results: Vec<(u64, Option<Ordinal>, bool)> = pop
        .par_iter()
        .map(|(n, m)| {
            let fam = explicit(*n, m);
            (naive_ord(m), fam.ord().ok(), fam.is_inclusive())
        })
        .collect();
    let mut t = Tally::new();
    let mut histogram = [0u64; 8];
    for ((n, m), (naive, lib, _)) in pop.iter().zip(&results) {
        histogram[(*naive as usize).min(7)] += 1;
        t.check(lib.as_ref() == Some(&Ordinal::finite(*naive)), || {
            format!("ground {n}, {} members: naive {naive}, library {lib:?}", m.len())
        });
    }
    let inclusive = results.iter().filter(|r| r.2).count();
    t.finish(
        1,
        json!({
            "families": pop.len(),
            "inclusive": inclusive,
            "ord_histogram": histogram,
        }),
    )
}

fn finite_lemma(seed: u64) -> CriterionResult {
    let pop = ord_population(seed);
    let mut t = Tally::new();
    for (n, m) in &pop {
        let fam = explicit(*n, m);
        let ord = naive_ord(m);
        for k in 0..=8u64 {
            let check = fam.finite_lemma_check(k);
            t.check(check == Ok(ord <= k), || format!("ground {n}, k = {k}: check {check:?}, ord {ord}"));
        }
    }
    t.finish(2, json!({ "families": pop.len(), "bounds": 9 }))
}

fn monotone_and_relabel(seed: u64) -> CriterionResult {
    let mut rng = rng_for(seed, 3);
    let mut t = Tally::new();
    let mut strict = 0u64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=7);
        let big = random_family(n, rng.random_range(0.05..0.6), &mut rng);
        let small: Vec<Vec<Label>> = big.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        let (ob, os) = (explicit(n, &big).ord(), explicit(n, &small).ord());
        match (&os, &ob) {
            (Ok(a), Ok(b)) => {
                strict += u64::from(a < b);
                t.check(a <= b, || format!("Ord M = {a} > Ord N = {b}"));
            }
            _ => t.check(false, || format!("ord failed: {os:?} {ob:?}")),
        }
    }
    for _ in 0..1000 {
        let n = rng.random_range(1..=7);
        let fam = explicit(n, &random_family(n, rng.random_range(0.05..0.6), &mut rng));
        let targets: Vec<Label> = sample(&mut rng, 1_000_000, n).into_iter().map(|v| v as Label).collect();
        let relabeled = fam.relabel(|l| targets[l as usize]);
        match (fam.ord(), relabeled.and_then(|r| r.ord())) {
            (Ok(a), Ok(b)) => t.check(a == b, || format!("relabeling changed Ord {a} to {b}")),
            (a, b) => t.check(false, || format!("ord failed: {a:?} {b:?}")),
        }
    }
    t.finish(3, json!({ "pairs": 1000, "relabelings": 1000, "strict_pairs": strict }))
}

/// `{σ ⊆ {1, …, n} : |σ| ≤ min σ}`.
fn card_min_truncation(n: u64) -> Vec<Vec<Label>> {
    let mut out = Vec::new();
    for mask in 1u64..(1 << n) {
        let set: Vec<Label> = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect();
        if set.len() as u64 <= set[0] {
            out.push(set);
        }
    }
    out
}

fn card_min() -> CriterionResult {
    let mut t = Tally::new();
    let family = SetFamily::card_min(1);
    let ord = family.ord();
    t.check(ord == Ok(Ordinal::omega()), || format!("Ord card_min = {ord:?}"));
    for a in 1..=30u64 {
        let r = family.restrict(&[a]).ord();
        t.check(r == Ok(Ordinal::finite(a - 1)), || format!("Ord M^{{{a}}} = {r:?}"));
    }
    let mut truncations = Vec::new();
    for n in [10u64, 14, 18] {
        let members = card_min_truncation(n);
        let fam = SetFamily::explicit(GroundSet::finite(1..=n).expect("distinct"), members.clone())
            .expect("labels in range");
        let whole = fam.ord();
        let expected_whole = n.div_ceil(2);
        t.check(whole == Ok(Ordinal::finite(expected_whole)), || {
            format!("n = {n}: Ord = {whole:?}, expected {expected_whole}")
        });
        let mut per_label = Vec::new();
        for a in 1..=n {
            let value = fam.restrict(&[a]).ord();
            // Room for a − 1 further labels above a exists iff 2a − 1 ≤ n.
            let expected = if 2 * a - 1 <= n { a - 1 } else { (n - 1) / 2 };
            t.check(value == Ok(Ordinal::finite(expected)), || {
                format!("n = {n}, a = {a}: {value:?}, expected {expected}")
            });
            // The symbolic family agrees while the truncation leaves room.
            if 2 * a - 1 <= n {
                let symbolic = family.restrict(&[a]).ord();
                t.check(symbolic == value, || format!("n = {n}, a = {a}: symbolic {symbolic:?}"));
            }
            per_label.push(value.map(|v| v.to_string()).unwrap_or_default());
        }
        truncations.push(json!({
            "n": n,
            "members": members.len(),
            "ord": whole.map(|v| v.to_string()).unwrap_or_default(),
            "ord_per_label": per_label,
        }));
    }
    t.finish(
        4,
        json!({ "ord": ord.map(|v| v.to_string()).unwrap_or_default(), "truncations": truncations }),
    )
}

fn partition_constants() -> CriterionResult {
    let x = FiniteMetricSpace::interval(5000);
    let mut t = Tally::new();
    let mut runs = Vec::new();
    for q in 1..=3u64 {
        for n in 0..=2usize {
            let schedule = match ScaleSchedule::standard(q, n) {
                Ok(s) => s,
                Err(e) => {
                    t.check(false, || format!("q = {q}, n = {n}: {e}"));
                    continue;
                }
            };
            let top = *schedule.values.last().expect("n + 1 scales");
            let decomposition =
                striped_decomposition(x.len(), n + 1, block_for_gap(n + 1, top).max(5), top as usize);
            let p = match PartitionOfUnity::build(&x, &decomposition, &schedule) {
                Ok(p) => p,
                Err(e) => {
                    t.check(false, || format!("q = {q}, n = {n}: {e}"));
                    continue;
                }
            };
            let r = p.verify(&x);
            t.check(r.holder_ok, || format!("q = {q}, n = {n}: C_i = {:?}", r.holder_constants));
            t.check(r.sum_holder_ok, || format!("q = {q}, n = {n}: Σ C_i = {}", r.sum_holder));
            t.check(r.sum_sq_ok, || format!("q = {q}, n = {n}: |Σ f² − 1| = {}", r.sum_sq_max_err));
            t.check(r.support_ok, || format!("q = {q}, n = {n}: support"));
            runs.push(json!({
                "q": q,
                "n": n,
                "scales": schedule.values,
                "holder_constants": r.holder_constants,
                "holder_bounds": r.holder_bounds,
                "sum_holder": r.sum_holder,
                "sum_sq_max_err": r.sum_sq_max_err,
                "covered": p.covered.iter().filter(|&&c| c).count(),
            }));
        }
    }
    t.finish(5, json!({ "points": x.len(), "runs": runs }))
}

/// Spaces with at most 10 points: intervals, half-step intervals, small
/// grids and random weighted graphs.
fn small_spaces(seed: u64) -> Vec<(String, FiniteMetricSpace)> {
    let mut out = Vec::new();
    for n in [1usize, 3, 5, 7, 9] {
        out.push((format!("interval({n})"), FiniteMetricSpace::interval(n)));
    }
    for n in [4usize, 7, 9] {
        out.push((format!("halves({n})"), FiniteMetricSpace::scaled_interval(n, 2)));
    }
    for (sides, norm) in [
        (vec![2, 2], Norm::L1),
        (vec![3, 3], Norm::L1),
        (vec![3, 3], Norm::Linf),
        (vec![2, 5], Norm::Linf),
        (vec![2, 5], Norm::L1),
        (vec![2, 2, 2], Norm::Linf),
    ] {
        out.push((
            format!("box({sides:?}, {norm:?})"),
            FiniteMetricSpace::scaled_box(&sides, norm, 1),
        ));
    }
    let mut rng = rng_for(seed, 6);
    for g in 0..6 {
        let nodes = rng.random_range(5..=10);
        let mut edges: Vec<(usize, usize, u64)> = (1..nodes)
            .map(|v| (rng.random_range(0..v), v, rng.random_range(1..=3)))
            .collect();
        for _ in 0..rng.random_range(0..nodes) {
            let a = rng.random_range(0..nodes);
            let b = rng.random_range(0..nodes);
            if a != b {
                edges.push((a, b, rng.random_range(1..=4)));
            }
        }
        let space = FiniteMetricSpace::graph(nodes, &edges, 1).expect("connected graph");
        out.push((format!("graph#{g}({nodes})"), space));
    }
    out
}

fn search_vs_enumeration(seed: u64) -> CriterionResult {
    let mut t = Tally::new();
    // Half-integer parameters up to 6.
    let params: Vec<Rational> = (1..=12).map(|k| Rational::new(k, 2)).collect();
    let mut constraints_checked = 0u64;
    let mut feasible = 0u64;
    let index_order = SearchOptions {
        order: SearchOrder::Index,
        ..SearchOptions::default()
    };
    let spaces = small_spaces(seed);
    for (name, space) in &spaces {
        let mut gap_tuples: Vec<Vec<Gap>> = Vec::new();
        for &r in &params {
            gap_tuples.push(vec![Gap::AtLeast(r)]);
            gap_tuples.push(vec![Gap::Exceeds(r)]);
        }
        for &r1 in &params {
            for &r2 in &params {
                gap_tuples.push(vec![Gap::AtLeast(r1), Gap::AtLeast(r2)]);
            }
        }
        gap_tuples.push(vec![Gap::Exceeds(Rational::from_integer(1)), Gap::Exceeds(Rational::from_integer(2))]);
        type Row = (Vec<Gap>, Vec<Vec<Rational>>, Vec<bool>, Vec<Result<SearchOutcome, String>>, Vec<bool>);
        let outcomes: Vec<Row> =
            gap_tuples
                .par_iter()
                .map(|gaps| {
                    let profile = brute_force_profile(space, gaps);
                    let bound_sets: Vec<Vec<Rational>> = if gaps.len() == 1 {
                        params.iter().map(|&b| vec![b]).collect()
                    } else {
                        params.iter().flat_map(|&a| params.iter().map(move |&b| vec![a, b])).collect()
                    };
                    let mut expected = Vec::new();
                    let mut got = Vec::new();
                    let mut witness_ok = Vec::new();
                    for rb in &bound_sets {
                        expected.push(profile_admits(&profile, rb));
                        let constraint = DecompositionConstraint {
                            indices: gaps
                                .iter()
                                .zip(rb)
                                .map(|(&gap, &bound)| IndexConstraint { gap, bound })
                                .collect(),
                        };
                        let a = find_decomposition(space, &constraint, &SearchOptions::default());
                        let b = find_decomposition(space, &constraint, &index_order);
                        let outcome = match (a, b) {
                            (Ok(a), Ok(b)) if a.outcome.is_feasible() == b.outcome.is_feasible() => Ok(a.outcome),
                            (Ok(a), Ok(b)) => Err(format!("orders disagree: {:?} vs {:?}", a.outcome, b.outcome)),
                            (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
                        };
                        let ok = match &outcome {
                            Ok(SearchOutcome::Feasible { decomposition }) => {
                                verify(space, decomposition, &constraint).map(|c| c.is_ok()).unwrap_or(false)
                            }
                            _ => true,
                        };
                        got.push(outcome);
                        witness_ok.push(ok);
                    }
                    (gaps.clone(), bound_sets, expected, got, witness_ok)
                })
                .collect();
        for (gaps, bound_sets, expected, got, witness_ok) in outcomes {
            for (((bounds, exp), outcome), ok) in bound_sets.iter().zip(expected).zip(got).zip(witness_ok) {
                constraints_checked += 1;
                feasible += u64::from(exp);
                let matches = match &outcome {
                    Ok(SearchOutcome::Feasible { .. }) => exp,
                    Ok(SearchOutcome::Infeasible) => !exp,
                    _ => false,
                };
                t.check(matches && ok, || {
                    let bounds: Vec<String> = bounds.iter().map(|b| b.to_string()).collect();
                    format!("{name}, gaps {gaps:?}, bounds {bounds:?}: enumeration {exp}, search {outcome:?}")
                });
            }
        }
    }
    let nine = FiniteMetricSpace::interval(9);
    let first = find_decomposition(&nine, &DecompositionConstraint::at_least_int(&[(3, 2)]), &SearchOptions::default());
    t.check(
        matches!(first.as_ref().map(|r| &r.outcome), Ok(SearchOutcome::Infeasible)),
        || format!("interval(9) [(3,2)]: {first:?}"),
    );
    let second = find_decomposition(
        &nine,
        &DecompositionConstraint::at_least_int(&[(3, 2), (4, 2)]),
        &SearchOptions::default(),
    );
    t.check(
        second.as_ref().is_ok_and(|r| r.outcome.is_feasible()),
        || format!("interval(9) [(3,2),(4,2)]: {second:?}"),
    );
    t.finish(
        6,
        json!({
            "spaces": spaces.iter().map(|(n, s)| json!({ "name": n, "points": s.len() })).collect::<Vec<_>>(),
            "constraints": constraints_checked,
            "feasible": feasible,
        }),
    )
}

fn truncated_profile() -> CriterionResult {
    let mut t = Tally::new();
    let opts = SearchOptions::default();
    let mut rows = Vec::new();
    for n in 2..=12usize {
        let x = FiniteMetricSpace::interval(n);
        for scale in 2..=5u64 {
            // Neighbouring points are closer than any gap ≥ 2, so one family
            // is a single set: infeasible exactly when B < n = diam.
            let mut threshold = None;
            for b in 1..=(n as i64 + 2) {
                let fam = truncated_dim_family(&x, &[scale], Rational::from_integer(b), &opts);
                let nonempty = fam.as_ref().ok().and_then(|f| f.members().map(|m| !m.is_empty()));
                t.check(nonempty == Some(b < n as i64), || {
                    format!("interval({n}), t = {scale}, B = {b}: {fam:?}")
                });
                if nonempty == Some(false) && threshold.is_none() {
                    threshold = Some(b);
                }
            }
            rows.push(json!({ "n": n, "t": scale, "first_empty_bound": threshold }));
        }
    }
    let x = FiniteMetricSpace::interval(9);
    let fam = truncated_dim_family(&x, &[3, 4], Rational::from_integer(2), &opts);
    let members = fam.as_ref().ok().and_then(|f| f.members().map(|m| m.to_vec()));
    t.check(members == Some(vec![vec![3], vec![4]]), || format!("S = {{3,4}}, B = 2: {members:?}"));
    let ord = fam.as_ref().map(|f| f.ord());
    t.check(matches!(ord, Ok(Ok(ref o)) if *o == Ordinal::finite(1)), || format!("Ord = {ord:?}"));
    t.finish(7, json!({ "single_scale": rows, "example_members": members }))
}

fn topological_nets() -> CriterionResult {
    let mut t = Tally::new();
    let opts = SearchOptions::default();

    let line = FiniteMetricSpace::scaled_interval(64, 64);
    let delta = Rational::new(1, 64);
    let fam = topological_dim_family(&line, delta, Separation::Resolution, &[4, 8], &opts);
    let line_members = fam.as_ref().ok().and_then(|f| f.members().map(|m| m.to_vec()));
    let line_ord = fam.as_ref().ok().and_then(|f| f.ord().ok());
    t.check(line_ord == Some(Ordinal::finite(1)), || format!("[0,1]: {fam:?}"));
    t.check(line_members == Some(vec![vec![4], vec![8]]), || format!("[0,1]: {line_members:?}"));
    // Neighbouring net points are not separated, so one family is one set.
    t.check(line.diameter() > Rational::new(1, 4), || "[0,1] single family".into());
    let stripes = crate::covers::CoverDecomposition {
        families: vec![
            SubsetFamily::new(vec![(0..=12).collect(), (20..=32).collect(), (40..=52).collect(), (60..=64).collect()])
                .expect("nonempty"),
            SubsetFamily::new(vec![(13..=19).collect(), (33..=39).collect(), (53..=59).collect()]).expect("nonempty"),
        ],
        coloring: None,
    };
    let stripes_ok = verify(&line, &stripes, &net_constraint(delta, &[4, 8])).map(|c| c.is_ok());
    t.check(stripes_ok == Ok(true), || format!("[0,1] stripes: {stripes_ok:?}"));

    let square = FiniteMetricSpace::scaled_grid(2, 17, Norm::Linf, 16);
    let delta2 = Rational::new(1, 16);
    let fam = topological_dim_family(&square, delta2, Separation::Resolution, &[2, 3, 4], &opts);
    let square_members = fam.as_ref().ok().and_then(|f| f.members().map(|m| m.to_vec()));
    let square_ord = fam.as_ref().ok().and_then(|f| f.ord().ok());
    t.check(square_ord == Some(Ordinal::finite(2)), || format!("[0,1]²: {fam:?}"));
    let proper: Vec<Vec<Label>> = vec![vec![2], vec![2, 3], vec![2, 4], vec![3], vec![3, 4], vec![4]];
    t.check(square_members.as_ref() == Some(&proper), || format!("[0,1]²: {square_members:?}"));
    let bricks_ok = verify(&square, &cross_bricks(8), &net_constraint(delta2, &[2, 3, 4])).map(|c| c.is_ok());
    t.check(bricks_ok == Ok(true), || format!("[0,1]² bricks: {bricks_ok:?}"));

    t.finish(
        8,
        json!({
            "line": { "points": line.len(), "scales": [4, 8], "members": line_members,
                      "ord": line_ord.map(|o| o.to_string()) },
            "square": { "points": square.len(), "scales": [2, 3, 4], "members": square_members,
                        "ord": square_ord.map(|o| o.to_string()) },
        }),
    )
}

fn net_constraint(separation: Rational, scales: &[i64]) -> DecompositionConstraint {
    DecompositionConstraint {
        indices: scales
            .iter()
            .map(|&t| IndexConstraint {
                gap: Gap::Exceeds(separation),
                bound: Rational::new(1, t),
            })
            .collect(),
    }
}

fn commutator_estimate(seed: u64) -> CriterionResult {
    let x = FiniteMetricSpace::interval(500);
    let n = x.len();
    let mut rng = rng_for(seed, 9);
    let cases: Vec<(RoeOperator, Vec<f64>, f64)> = (0..100)
        .map(|k| {
            let width = rng.random_range(0..=4);
            let density = rng.random_range(0.2..0.9);
            let a = RoeOperator::random_band(&x, Rational::from_integer(width), density, &mut rng);
            let alpha = if k % 2 == 0 { 1.0 } else { 0.5 };
            let centre = rng.random_range(0.0..n as f64);
            let waves: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.random_range(-1.0..1.0),
                        rng.random_range(0.001..0.05),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let h: Vec<f64> = (0..n)
                .map(|p| {
                    let p = p as f64;
                    let wave: f64 = waves.iter().map(|&(c, w, phi)| c * (w * p + phi).sin()).sum();
                    if alpha < 1.0 {
                        wave + (p - centre).abs().sqrt() / 10.0
                    } else {
                        wave
                    }
                })
                .collect();
            (a, h, alpha)
        })
        .collect();
    let opts = NormOptions::default();
    let reports: Vec<_> = cases
        .par_iter()
        .map(|(a, h, alpha)| {
            let c = crate::partition::holder(&x, h, *alpha);
            commutator_check(&x, a, h, *alpha, c, &opts)
        })
        .collect();
    let mut t = Tally::new();
    let mut worst_ratio: f64 = 0.0;
    for (k, r) in reports.iter().enumerate() {
        match r {
            Ok(r) => {
                if r.bound > 0.0 {
                    worst_ratio = worst_ratio.max(r.measured / r.bound);
                }
                t.check(r.passed, || format!("case {k}: ‖[a,h]‖ = {} > {}", r.measured, r.bound));
            }
            Err(e) => t.check(false, || format!("case {k}: {e}")),
        }
    }
    t.finish(9, json!({ "cases": cases.len(), "points": n, "worst_ratio": worst_ratio }))
}

fn cpc_witness(seed: u64) -> CriterionResult {
    let x = FiniteMetricSpace::interval(200);
    let n = x.len();
    let mut rng = rng_for(seed, 10);
    let shift = RoeOperator::shift(n);
    let ops = vec![shift.add(&shift.adjoint()), RoeOperator::random_diagonal(n, &mut rng)];
    let scales = [1u64, 2];
    let q = 1;
    let opts = NormOptions::default();
    let mut t = Tally::new();
    let outcome = build_cpc_witness(
        &x,
        &ops,
        q,
        &scales,
        Rational::from_integer(100),
        &SearchOptions::default(),
        &opts,
    );
    let witness = match outcome {
        Ok(CpcOutcome::Witness { witness }) => witness,
        other => {
            t.check(false, || format!("no witness: {other:?}"));
            return t.finish(10, Value::Null);
        }
    };
    let report = match verify_nfq(&x, &witness, &ops, q, &scales, &opts) {
        Ok(r) => r,
        Err(e) => {
            t.check(false, || format!("verification failed to run: {e}"));
            return t.finish(10, Value::Null);
        }
    };
    for a in &report.approximation {
        t.check(a.ok, || format!("‖ΦΨ(b_{}) − b_{}‖ = {} ≥ 1/q", a.op, a.op, a.error));
    }
    for p in &report.pairs {
        t.check(p.ok, || {
            format!("index {}, pair ({}, {}): {} ≥ {}", p.index, p.left, p.right, p.product_norm, p.target)
        });
    }
    for r in &report.residuals {
        t.check(r.ok, || format!("index {}, op {}: residual {} > {}", r.index, r.op, r.measured, r.bound));
    }
    t.check(report.structure_ok, || "structural checks failed".into());
    t.check(report.passed, || "report did not pass".into());
    let min_pair_margin = report.pairs.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    let min_approx_margin = report.approximation.iter().map(|a| a.margin).fold(f64::INFINITY, f64::min);
    t.finish(
        10,
        json!({
            "m": report.m,
            "k": report.k,
            "s": report.s,
            "min_pair_margin": min_pair_margin,
            "min_approximation_margin": min_approx_margin,
            "approximation_errors": report.approximation.iter().map(|a| a.error).collect::<Vec<_>>(),
            "max_residual": report.residuals.iter().map(|r| r.measured).fold(0.0, f64::max),
        }),
    )
}

fn commutative_witness() -> CriterionResult {
    let net = FiniteMetricSpace::scaled_interval(64, 64);
    let xs: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
    let funcs = vec![xs.clone(), xs.iter().map(|v| v * v).collect(), vec![1.0; xs.len()]];
    let cover = vec![
        SubsetFamily::new(net_intervals(64, 0, 8, 16)).expect("nonempty"),
        SubsetFamily::new(net_intervals(63, 7, 8, 16)).expect("nonempty"),
    ];
    let mut t = Tally::new();
    let scales = [5u64, 6];
    let report = build_commutative_witness(&net, &cover, &funcs, 4)
        .and_then(|w| verify_mfq(&net, &w, &funcs, 4, &scales));
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            t.check(false, || e.to_string());
            return t.finish(11, Value::Null);
        }
    };
    t.check(report.partition_ok, || "partition invariants".into());
    t.check(report.order_zero_ok, || "supports overlap within a family".into());
    t.check(report.condition_products, || "product condition".into());
    for a in &report.approximation {
        t.check(a.error < 0.25, || format!("function {}: sup error {}", a.function, a.error));
    }
    for d in &report.diameters {
        t.check(d.ok, || format!("index {}, set {}: diameter {} ≥ {}", d.index, d.set, d.diameter, d.limit));
    }
    t.finish(
        11,
        json!({
            "points": net.len(),
            "sup_errors": report.approximation.iter().map(|a| a.error).collect::<Vec<_>>(),
            "min_product_slack": report.products.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min),
        }),
    )
}
