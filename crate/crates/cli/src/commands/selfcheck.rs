//! `selfcheck`: run the optimized library against the naive brute-force
//! references on random instances and report per-suite pass/fail.

use crate::error::Result;
use crate::oracle::{run_selfcheck, CheckReport};

pub fn render(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&format!(
            "[{}] {}: {} trials, max deviation {:.3e}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.trials,
            r.max_deviation
        ));
    }
    out
}

pub fn run(trials: usize, seed: u64) -> Result<String> {
    let reports = run_selfcheck(trials, seed)?;
    Ok(render(&reports))
}
