//! One line per acceptance criterion, followed by its individual checks.
//! Exits non-zero when any criterion fails.

use std::process::ExitCode;

use viscokit::par::Execution;
use viscokit::verify::{run_suites, SUITES};

fn main() -> ExitCode {
    let seed = std::env::var("VISCOKIT_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(42);
    let reports = run_suites(seed, None, Execution::Parallel);
    let mut failed = 0;
    for ((name, criterion, _), report) in SUITES.iter().zip(&reports) {
        assert_eq!(*name, report.suite);
        let tag = if report.passed() { "PASS" } else { "FAIL" };
        println!("criterion {criterion:>2} ({name}): {tag}");
        for c in &report.checks {
            println!("      {c}");
        }
        failed += usize::from(!report.passed());
    }
    println!("acceptance: {}/{} criteria passed", reports.len() - failed, reports.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
