//! Full-level acceptance battery: one test per criterion, each printing its
//! pass/fail line. These run the declared scales and tolerances; see the
//! README for the runtime expectations and for the two checks that encode
//! constants known to disagree with the measured lattice limits.

use looplab_core::acceptance::{self, Level};

const SEED: u64 = 0x10_0f_57;

fn assert_report(r: looplab_core::stats::StatReport) {
    println!("{}", r.line());
    assert!(r.pass, "{}", r.line());
}

#[test]
fn c01_green_asymptotics() {
    assert_report(acceptance::green_asymptotics(Level::Full).unwrap());
}

#[test]
fn c02_conductance_limit() {
    assert_report(acceptance::conductance_limit(Level::Full).unwrap());
}

#[test]
fn c03_edge_opening_oracle() {
    assert_report(acceptance::edge_opening_oracle(Level::Full, SEED).unwrap());
}

#[test]
fn c04_conditional_connection_law() {
    assert_report(acceptance::conditional_connection_law(Level::Full, SEED).unwrap());
}

#[test]
fn c05_cable_connection_formula() {
    assert_report(acceptance::cable_connection_formula(Level::Full, SEED).unwrap());
}

#[test]
fn c06_scaling_limit_trend() {
    assert_report(acceptance::scaling_limit_trend(Level::Full, SEED).unwrap());
}

#[test]
fn c07_restriction_martingale() {
    assert_report(acceptance::restriction_martingale(Level::Full, SEED).unwrap());
}

#[test]
fn c08_closed_form_identities() {
    assert_report(acceptance::closed_form_identities(Level::Full).unwrap());
}

#[test]
fn c09_loop_soup_distributions() {
    assert_report(acceptance::loop_soup_distributions(Level::Full, SEED).unwrap());
}

#[test]
fn c10_geometry_suite() {
    assert_report(acceptance::geometry_suite(Level::Full, SEED).unwrap());
}
