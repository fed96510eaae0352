//! Acceptance suite. Runs each criterion once with fixed seeds and prints one
//! pass/fail line per criterion.

mod acceptance {
    pub mod common;
    pub mod couplings;
    pub mod processes;
    pub mod pipeline;
}

use std::process::ExitCode;
use std::time::Instant;

use acceptance::common::Verdict;

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("quantile coupling", acceptance::couplings::quantile),
        ("marriage refinement", acceptance::couplings::marriage),
        ("star-coupling", acceptance::couplings::star),
        ("alternating joining", acceptance::processes::alternating),
        ("entropy bounds", acceptance::processes::entropy),
        ("exact block map", acceptance::pipeline::exact_block_map),
        ("end-to-end almost factor", acceptance::pipeline::end_to_end),
        ("determinism", acceptance::pipeline::determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        let ok = v.passed && secs < v.time_limit;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {} [{secs:.2} s, limit {} s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            v.time_limit
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
