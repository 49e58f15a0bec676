//! Release gate: one test per acceptance criterion, each printing a
//! PASS/FAIL line per checked quantity at the pinned tolerance.
//!
//! Run with `cargo test -p qubit-decoherence --test acceptance -- --nocapture`
//! to see the lines.

use qubit_decoherence::presets::Presets;
use qubit_decoherence::reproduction::{self, Row};

const SEED: u64 = 20_240_601;

fn gate(rows: Vec<Row>) {
    for r in &rows {
        println!("{}", r.line());
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
    assert!(failed.is_empty(), "failing rows: {failed:?}");
}

#[test]
fn criterion_01_t2_closed_form() {
    gate(reproduction::t2_rows());
}

#[test]
fn criterion_02_phonon_jumping_rate_estimate() {
    gate(reproduction::pjr_rows(&Presets::bundled()));
}

#[test]
fn criterion_03_lifetime_correction() {
    gate(vec![reproduction::lifetime_row()]);
}

#[test]
fn criterion_04a_rate_formula_identity() {
    let rows = reproduction::rate_formula_rows(&Presets::bundled());
    gate(rows.into_iter().filter(|r| r.id == "4a").collect());
}

#[test]
fn criterion_04b_classical_thermal_form() {
    let rows = reproduction::rate_formula_rows(&Presets::bundled());
    gate(rows.into_iter().filter(|r| r.id != "4a").collect());
}

#[test]
fn criterion_05_monte_carlo_vs_closed_form() {
    gate(vec![reproduction::monte_carlo_row(SEED)]);
}

#[test]
fn criterion_06_scattering_oracle() {
    gate(vec![reproduction::scattering_row()]);
}

#[test]
fn criterion_07_filter_function_oracle() {
    gate(reproduction::filter_rows());
}

#[test]
fn criterion_08_fit_recovery() {
    gate(reproduction::fit_rows(SEED));
}

#[test]
fn criterion_09_psd_pipeline() {
    gate(reproduction::psd_rows(SEED));
}

#[test]
fn criterion_10_order_of_magnitude_checks() {
    gate(reproduction::order_of_magnitude_rows(&Presets::bundled()));
}
