//! `verify`: runs the named check suite and prints one verdict line per
//! check; exit status reflects the aggregate outcome.

use psgd_lab::error::Result;
use psgd_lab::verify::{run_suite, CheckOutcome, Suite};

pub fn run(suite: Suite, seed: u64) -> Result<Vec<CheckOutcome>> {
    run_suite(suite, seed)
}

pub fn print_outcomes(outcomes: &[CheckOutcome]) -> bool {
    let mut all_ok = true;
    for o in outcomes {
        println!(
            "[{}] {}: margin {:+.3e} | {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.margin,
            o.detail
        );
        all_ok &= o.passed;
    }
    all_ok
}
