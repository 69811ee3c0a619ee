//! Acceptance gate: runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each. Exits non-zero if any criterion fails.

use beamtie::verify::{run_criterion, CRITERIA};
use std::time::Instant;

fn main() {
    beamtie::solver::init_threads();
    let mut failed = Vec::new();
    for id in 1..=CRITERIA {
        let t = Instant::now();
        let o = run_criterion(id);
        println!("{} [{:.1} s]", o.line(), t.elapsed().as_secs_f64());
        if !o.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {CRITERIA} criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
