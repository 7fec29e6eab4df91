//! Acceptance suite: one line per criterion, then a determinism check that
//! runs the whole suite a second time and compares the reports byte for byte.

use std::time::{Duration, Instant};

use trdim::selftest::{self, DEFAULT_SEED};

/// Wall-clock limit per criterion.
fn limit(id: u32) -> Duration {
    Duration::from_secs(match id {
        1 => 60,
        2 | 11 => 10,
        5 | 9 | 10 => 120,
        6 | 8 => 300,
        _ => 300,
    })
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    let mut results = Vec::new();
    for id in selftest::all_ids() {
        let start = Instant::now();
        let r = selftest::run_criterion(id, DEFAULT_SEED);
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit(id);
        let ok = r.passed && in_time;
        println!(
            "criterion {:>2} {}: {} ({} checks, {:.1}s{})",
            id,
            r.name,
            if ok { "PASS" } else { "FAIL" },
            r.checks,
            elapsed.as_secs_f64(),
            if in_time { String::new() } else { format!(", limit {}s", limit(id).as_secs()) },
        );
        for f in &r.failures {
            println!("    {f}");
        }
        if !ok {
            failed.push(id);
        }
        results.push(r);
    }
    let first = serde_json::to_string_pretty(&selftest::SelftestReport {
        seed: DEFAULT_SEED,
        version: env!("CARGO_PKG_VERSION").to_string(),
        passed: results.iter().all(|r| r.passed),
        criteria: results,
    })
    .unwrap();
    let second = serde_json::to_string_pretty(&selftest::run(DEFAULT_SEED, &selftest::all_ids())).unwrap();
    let same = first == second;
    println!(
        "criterion 12 determinism: {} ({} bytes)",
        if same { "PASS" } else { "FAIL" },
        first.len()
    );
    if !same {
        failed.push(12);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
