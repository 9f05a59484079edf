//! Acceptance gate: every criterion runs at its pinned tolerance and prints
//! one pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the table.

use paratorus::verify::{self, CheckRow};

fn assert_rows(criterion: &str, rows: Vec<CheckRow>) {
    let mut all_pass = true;
    for row in &rows {
        println!(
            "  [{}] {} :: measured {:.6e} (need {})",
            if row.pass { "pass" } else { "FAIL" },
            row.name,
            row.measured,
            row.threshold
        );
        all_pass &= row.pass;
    }
    println!(
        "{} {criterion}",
        if all_pass { "PASS" } else { "FAIL" },
    );
    assert!(all_pass, "criterion failed: {criterion}");
}

#[test]
fn c01_heat_decay() {
    assert_rows("c01 heat decay", verify::heat_decay_check().unwrap());
}

#[test]
fn c02_biharmonic_decay() {
    assert_rows("c02 biharmonic decay", verify::biharmonic_check().unwrap());
}

#[test]
fn c03_fully_nonlinear_convergence() {
    assert_rows(
        "c03 fully nonlinear convergence",
        verify::nonlinear_convergence_check().unwrap(),
    );
}

#[test]
fn c04_contraction_scaling() {
    assert_rows(
        "c04 contraction scaling",
        verify::contraction_scaling_check().unwrap(),
    );
}

#[test]
fn c05_uniqueness() {
    assert_rows("c05 uniqueness", verify::uniqueness_check().unwrap());
}

#[test]
fn c06_legendre_hadamard() {
    assert_rows("c06 legendre-hadamard", verify::ellipticity_check().unwrap());
}

#[test]
fn c07_garding() {
    assert_rows("c07 garding", verify::garding_check().unwrap());
}

#[test]
fn c08_gronwall() {
    assert_rows("c08 gronwall", verify::gronwall_suite().unwrap());
}

#[test]
fn c09_schauder_ratio() {
    assert_rows("c09 schauder ratio", verify::schauder_check().unwrap());
}

#[test]
fn c10_interpolation() {
    assert_rows("c10 interpolation", verify::interpolation_check().unwrap());
}

#[test]
fn c11_parallel_transport() {
    assert_rows("c11 parallel transport", verify::transport_check().unwrap());
}

#[test]
fn c12_bootstrap() {
    assert_rows("c12 bootstrap", verify::bootstrap_check().unwrap());
}
