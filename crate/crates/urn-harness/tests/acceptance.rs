//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

use std::io::Write;

use urn_harness::acceptance::{run_criterion, AcceptanceConfig};
use urn_harness::Verdict;

fn config() -> AcceptanceConfig {
    let seed = std::env::var("URNLAB_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    AcceptanceConfig { seed, ..AcceptanceConfig::default() }
}

fn check(id: u32) {
    let outcome = run_criterion(id, &config());
    let mut text = format!("{}\n", outcome.line());
    for d in &outcome.details {
        text.push_str(&format!("    {d}\n"));
    }
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).unwrap();
    out.flush().unwrap();
    assert_eq!(outcome.verdict, Verdict::Pass, "{}", outcome.line());
}

#[test]
fn criterion_01_exact_oracle() {
    check(1);
}

#[test]
fn criterion_02_good_identity() {
    check(2);
}

#[test]
fn criterion_03_birthday() {
    check(3);
}

#[test]
fn criterion_04_variance_sandwich() {
    check(4);
}

#[test]
fn criterion_05_missing_mass_variance() {
    check(5);
}

#[test]
fn criterion_06_mgf_dominance() {
    check(6);
}

#[test]
fn criterion_07_tail_domination() {
    check(7);
}

#[test]
fn criterion_08_proxy_tightness() {
    check(8);
}

#[test]
fn criterion_09_ci_coverage() {
    check(9);
}

#[test]
fn criterion_10_ratio_clt() {
    check(10);
}

#[test]
fn criterion_11_asymptotic_equivalents() {
    check(11);
}

#[test]
fn criterion_12_index_and_species() {
    check(12);
}

#[test]
fn criterion_13_light_tail() {
    check(13);
}

#[test]
fn criterion_14_determinism() {
    check(14);
}
