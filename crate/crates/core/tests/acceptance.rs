//! The acceptance suite: runs every criterion at its stated tolerance and
//! prints one pass/fail line per criterion. Each criterion is its own test
//! so failures localise; `acceptance_summary` re-prints the full table.

use symcirc::accept;

fn check(r: symcirc::error::Result<accept::CriterionResult>) {
    let r = r.expect("criterion runner failed");
    println!("{}", r.line());
    assert!(r.passed, "{}", r.line());
}

#[test]
fn criterion_01_swap_test() {
    check(accept::criterion_1_swap_test());
}

#[test]
fn criterion_02_dicke() {
    check(accept::criterion_2_dicke());
}

#[test]
fn criterion_03_symmetric_state() {
    check(accept::criterion_3_symmetric_state());
}

#[test]
fn criterion_04_phase_states() {
    check(accept::criterion_4_phase_states());
}

#[test]
fn criterion_05_qpe() {
    check(accept::criterion_5_qpe());
}

#[test]
fn criterion_06_aa_trace() {
    check(accept::criterion_6_aa_trace());
}

#[test]
fn criterion_07_lcu() {
    check(accept::criterion_7_lcu());
}

#[test]
fn criterion_08_partition_synthesis() {
    check(accept::criterion_8_partition_synthesis());
}

#[test]
fn criterion_09_subspace_unitaries() {
    check(accept::criterion_9_subspace_unitaries());
}

#[test]
fn criterion_10_classical_conversions() {
    check(accept::criterion_10_classical_conversions());
}

#[test]
fn criterion_11_partition_boolean() {
    check(accept::criterion_11_partition_boolean());
}

#[test]
fn criterion_12_xorsat() {
    check(accept::criterion_12_xorsat());
}

#[test]
fn criterion_13_invariant_sweep() {
    check(accept::criterion_13_invariant_sweep());
}
