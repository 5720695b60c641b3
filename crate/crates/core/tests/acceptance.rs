//! Acceptance suite. Runs every criterion in turn, prints one PASS/FAIL
//! line each with the measured values, and exits non-zero if any failed.
//!
//! Positional arguments select criteria by number or by a substring of
//! their name; flags are ignored so `cargo test` options pass through.

use std::process::ExitCode;

use monohom::acceptance::{run, CRITERIA};

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<u8> = CRITERIA
        .iter()
        .filter(|(id, name)| {
            filters.is_empty() || filters.iter().any(|f| f.parse::<u8>().ok() == Some(*id) || name.contains(f.as_str()))
        })
        .map(|c| c.0)
        .collect();
    let mut failed = 0;
    for id in &selected {
        let o = run(*id);
        println!("{o}");
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", selected.len() - failed);
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
