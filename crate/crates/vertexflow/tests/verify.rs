//! Every verification check at reduced sizes.

use vertexflow::lattice::{ModelParams, SkewDomain, UpLeftPath};
use vertexflow::qmoments::QuadOptions;
use vertexflow::verify::*;

fn assert_pass(r: &CheckReport) {
    eprintln!("{:<40} {:?} err {:.3e} tol {:.1e} cases {} {}", r.name, r.status, r.max_abs_error, r.tolerance, r.cases, r.details);
    assert!(r.passed(), "{r:?}");
}

#[test]
fn local_relation_holds() {
    for r in 0..=4 {
        assert_pass(&check_local_relation(r, 300, 11 + r as u64, 1e-12).unwrap());
    }
}

#[test]
fn fused_local_relation_holds() {
    for r in 0..=4 {
        assert_pass(&check_local_relation_fused(r, 300, 21 + r as u64, 1e-12).unwrap());
    }
}

#[test]
fn global_relation_holds_on_small_domains() {
    let params = ModelParams::new(0.35, vec![2.2, 3.1, 2.7], vec![1.0, 1.3, 0.9]);
    for (q, p, coloring) in [("HHVV", "VVHH", vec![1, 2, 3, 4]), ("HVHV", "VVHH", vec![0, 1, 1, 2]), ("HHHVV", "VVHHH", vec![1, 1, 2, 3, 3])] {
        let domain = SkewDomain::new(UpLeftPath::from_word(q).unwrap(), UpLeftPath::from_word(p).unwrap(), coloring).unwrap();
        assert_pass(&check_global_relation(&domain, &params, 2, 1e-12).unwrap());
    }
}

#[test]
fn vertex_identities_hold() {
    assert_pass(&check_ybe(2, 5, 3, 1e-12).unwrap());
    assert_pass(&check_exchange(2, 3, 10, 4, 1e-12).unwrap());
    assert_pass(&check_qhahn_stochasticity(3, 6, 5, 5, 1e-12).unwrap());
}

#[test]
fn hecke_identities_hold() {
    assert_pass(&check_hecke_geometric_sum(4, 50, 6, 1e-10).unwrap());
    assert_pass(&check_symmetrization_identity(3, 50, 7, 1e-10).unwrap());
    for k in 2..=4 {
        assert_pass(&check_hecke_relations(k, 30, 8, 1e-10).unwrap());
        for r in check_kappa_properties(k, 10, 9, 1e-10).unwrap() {
            assert_pass(&r);
        }
    }
}

#[test]
fn self_adjointness_holds() {
    assert_pass(&check_self_adjoint(2, 3, 10, 1e-9, &QuadOptions::default()).unwrap());
    assert_pass(&check_self_adjoint(3, 1, 12, 1e-9, &QuadOptions::default()).unwrap());
}

#[test]
fn base_case_matches_closed_form() {
    assert_pass(&check_base_case(8, 3, 13, 1e-9, &QuadOptions::default()).unwrap());
}

#[test]
fn figure_pair_is_shift_isomorphic() {
    let pair = figure_pair().unwrap();
    let found = find_shift_isomorphism(&pair.left, &pair.right).unwrap();
    validate_shift_isomorphism(&pair.left, &pair.right, &found.0, &found.1).unwrap();
    let mut bad = pair.phi.clone();
    bad.swap(0, 1);
    assert!(validate_shift_isomorphism(&pair.left, &pair.right, &bad, &pair.psi).is_err());
}

#[test]
fn random_pairs_have_equal_height_laws() {
    let params = ModelParams::new(0.4, vec![2.23, 2.91, 2.57, 2.74], vec![1.03, 0.81, 1.12, 0.93]);
    for pair in random_shift_pairs(4, 4, 4, 2..=3, 14).unwrap() {
        let sub = ModelParams {
            row_rapidities: params.row_rapidities[..pair.left.domain.rows()].to_vec(),
            col_rapidities: params.col_rapidities[..pair.left.domain.cols()].to_vec(),
            ..params.clone()
        };
        let (a, b) = check_shift_exact(&pair, &sub, &QuadOptions::default(), (1e-10, 1e-8)).unwrap();
        assert_pass(&a);
        assert_pass(&b);
    }
}

#[test]
fn figure_pair_agrees_by_monte_carlo() {
    let params = ModelParams::new(0.4, vec![2.23, 2.91, 2.57, 2.74, 2.13, 2.46], vec![1.03, 0.81, 1.12, 0.93, 1.19, 0.87]);
    assert_pass(&check_shift_mc(&figure_pair().unwrap(), &params, 20_000, 15, 0, 4.0, &QuadOptions::default()).unwrap());
}

#[test]
fn moments_suite_passes_at_small_sample_sizes() {
    let opts = SuiteOptions { samples: 20_000, trials: 50, ..Default::default() };
    for r in run_suite(Suite::Moments, &opts).unwrap() {
        assert_pass(&r);
    }
}
