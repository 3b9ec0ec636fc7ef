//! The exact and fast statistical acceptance checks, asserted. The long
//! lattice sweeps only run in the acceptance target.

mod common;

use common::criteria;

fn check(o: criteria::Outcome) {
    assert!(o.pass, "{}", o.detail);
}

#[test]
fn povm_resolves_identity() {
    check(criteria::povm_validity());
}

#[test]
fn ahd_series_values() {
    check(criteria::ahd_golden());
}

#[test]
fn emission_statistics() {
    check(criteria::trajectory_statistics(20_000, 5_000));
}

#[test]
fn commuted_noise_operator() {
    check(criteria::commuted_noise(30));
}

#[test]
fn twirl_removes_coherences() {
    check(criteria::twirl_exactness());
}

#[test]
fn measurement_scheme_ordering() {
    check(criteria::chain_benchmark(3_000));
}

#[test]
fn local_and_full_inference_agree() {
    check(criteria::qsi_equivalence(3_000));
}

#[test]
fn exact_matching_and_single_flips() {
    check(criteria::decoder_exactness(2_000));
}
