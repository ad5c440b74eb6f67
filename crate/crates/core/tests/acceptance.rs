//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the observed margin. Scales and tolerances are pinned
//! here; run with `cargo test --test acceptance -- --nocapture` to see the
//! verdict lines and timings.

use std::time::Instant;

use psgd_lab::verify::*;

fn report(criterion: &str, outcome: &CheckOutcome, elapsed_s: f64) {
    println!(
        "[{}] {criterion}: {} (margin {:.3e}, {elapsed_s:.1}s) | {}",
        if outcome.passed { "PASS" } else { "FAIL" },
        outcome.name,
        outcome.margin,
        outcome.detail
    );
}

#[test]
fn criterion_01_cocoercivity_fuzz() {
    let start = Instant::now();
    let outcome = cocoercivity_fuzz(30_000, 0xC0C0);
    let secs = start.elapsed().as_secs_f64();
    report("criterion 1", &outcome, secs);
    assert!(outcome.passed, "{}", outcome.detail);
    assert!(secs < 60.0, "runtime budget exceeded: {secs:.1}s");
}

#[test]
fn criterion_02_contractivity_fuzz() {
    let start = Instant::now();
    let outcome = contractivity_fuzz(30_000, 0xC027);
    let secs = start.elapsed().as_secs_f64();
    report("criterion 2", &outcome, secs);
    assert!(outcome.passed, "{}", outcome.detail);
}

#[test]
fn criterion_03_oracle_agreement() {
    let start = Instant::now();
    let outcome = recursion_vs_monte_carlo(10_000, 0x0AC7);
    let secs = start.elapsed().as_secs_f64();
    report("criterion 3", &outcome, secs);
    assert!(outcome.passed, "{}", outcome.detail);
    assert!(secs < 300.0, "runtime budget exceeded: {secs:.1}s");
}

#[test]
fn criterion_04_algorithmic_lower_bound() {
    let start = Instant::now();
    let outcome = algo_lower_exact(10, 10_000, 0xA160);
    report("criterion 4", &outcome, start.elapsed().as_secs_f64());
    assert!(outcome.passed, "{}", outcome.detail);
}

#[test]
fn criterion_05_ill_conditioned_p_trend() {
    let start = Instant::now();
    let outcome = bad_p_check(0xBADB);
    report("criterion 5", &outcome, start.elapsed().as_secs_f64());
    assert!(outcome.passed, "{}", outcome.detail);
}

#[test]
fn criterion_06_rank_one_sigma_equality() {
    let start = Instant::now();
    let outcome = rank_one_equality(1000, 0x5167);
    report("criterion 6", &outcome, start.elapsed().as_secs_f64());
    assert!(outcome.passed, "{}", outcome.detail);
}

#[test]
fn criterion_07_stability_bound_grid() {
    let start = Instant::now();
    let outcomes = stability_grid_check(10_000, 0x57AB);
    let secs = start.elapsed().as_secs_f64();
    for outcome in &outcomes {
        report("criterion 7", outcome, secs);
    }
    for outcome in &outcomes {
        assert!(outcome.passed, "{}", outcome.detail);
    }
    assert!(secs < 900.0, "runtime budget exceeded: {secs:.1}s");
}

#[test]
fn criterion_08_multipass_vs_proposition_bounds() {
    let start = Instant::now();
    let outcomes = multipass_vs_upper_bounds(1000, 0x8041);
    let secs = start.elapsed().as_secs_f64();
    for outcome in &outcomes {
        report("criterion 8", outcome, secs);
    }
    for outcome in &outcomes {
        assert!(outcome.passed, "{}", outcome.detail);
    }
}

#[test]
fn criterion_09_minimax_witness() {
    let start = Instant::now();
    let outcome = minimax_witness(10_000, 0x3141);
    report("criterion 9", &outcome, start.elapsed().as_secs_f64());
    assert!(outcome.passed, "{}", outcome.detail);
}

#[test]
fn criterion_10_schedule_lemmas() {
    let start = Instant::now();
    let a = capped_harmonic_envelope_check(20, 10_000, 0x5CED);
    let b = decay_envelope_check(20, 10_000, 0xDECA);
    let secs = start.elapsed().as_secs_f64();
    report("criterion 10", &a, secs);
    report("criterion 10", &b, secs);
    assert!(a.passed, "{}", a.detail);
    assert!(b.passed, "{}", b.detail);
}

#[test]
fn criterion_11_pl_risk_bound() {
    let start = Instant::now();
    let outcome = pl_bound_check(1000, 0x9132);
    report("criterion 11", &outcome, start.elapsed().as_secs_f64());
    assert!(outcome.passed, "{}", outcome.detail);
}
