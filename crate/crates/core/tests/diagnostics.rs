mod common;

use bilr::diagnostics::{
    consistency_width_probe, entropy_bound, local_isometry_stat, polar_rip_check, rip_audit_bilr,
    rip_audit_rank, rip_audit_sparse, RipKind,
};
use bilr::matrix::{frobenius_inner, frobenius_norm, generate_bilr, DenseMatrix};
use bilr::rng::derive_seed;
use bilr::sensing::{make_dense_ensemble, make_factorized_ensemble};
use common::gaussian;
use proptest::prelude::*;

fn row_sparse(n: usize, k: usize, rows: &[usize], seed: u64) -> DenseMatrix {
    let full = gaussian(n, k, seed);
    let mut z = DenseMatrix::zeros(n, k);
    for &i in rows {
        z.set_row(i, &full.row(i));
    }
    z
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn entropy_grows_with_n_and_shrinks_with_eta(n in 4usize..60, s in 1usize..4, eta in 0.01f64..8.0) {
        let r = 1;
        let here = entropy_bound(n, s, r, eta).unwrap();
        prop_assert!(entropy_bound(n + 1, s, r, eta).unwrap() >= here);
        prop_assert!(entropy_bound(n, s, r, eta * 1.1).unwrap() <= here);
    }

    #[test]
    fn rip_report_is_ordered(seed in any::<u64>()) {
        let e = make_dense_ensemble(5, 60, seed, true).unwrap();
        let rep = rip_audit_bilr(&e, 2, 1, 20, seed).unwrap();
        prop_assert!(rep.ratio_min <= rep.ratio_mean && rep.ratio_mean <= rep.ratio_max);
        prop_assert!(rep.implied_delta >= 0.0);
        prop_assert_eq!(rep.property_kind, RipKind::L1Bilr);
    }
}

#[test]
fn entropy_rejects_bad_eta() {
    assert!(entropy_bound(4, 2, 1, 0.0).is_err());
    assert!(entropy_bound(4, 2, 1, 9.0).is_err());
}

#[test]
fn bilr_audit_delta_small_at_m_4000() {
    let e = make_dense_ensemble(12, 4000, 3, true).unwrap();
    let rep = rip_audit_bilr(&e, 3, 1, 500, 4).unwrap();
    assert!(rep.implied_delta < 0.5, "delta {}", rep.implied_delta);
}

#[test]
fn rank_audit_reports_its_kind() {
    let e = make_factorized_ensemble(10, 2000, 8, 3).unwrap();
    let rep = rip_audit_rank(&e, 1, 100, 5).unwrap();
    assert_eq!(rep.property_kind, RipKind::L1Rank);
    assert!(rep.implied_delta < 0.5, "delta {}", rep.implied_delta);
}

#[test]
fn sparse_audit_delta_small() {
    let (p, n) = (400, 64);
    let d = gaussian(p, n, 7) / (p as f64).sqrt();
    let rep = rip_audit_sparse(&d, 3, 500, 8).unwrap();
    assert_eq!(rep.property_kind, RipKind::L2SparseVector);
    assert!(rep.implied_delta < 0.4, "delta {}", rep.implied_delta);
}

#[test]
fn polar_check_within_delta() {
    let (p, n, s) = (400, 32, 3);
    let mut within = 0;
    let trials = 500;
    for t in 0..trials {
        let d = gaussian(p, n, derive_seed(20, &[t])) / (p as f64).sqrt();
        let delta = rip_audit_sparse(&d, s, 300, derive_seed(21, &[t])).unwrap().implied_delta;
        let z = row_sparse(n, 4, &[0, 5, 9], derive_seed(22, &[t]));
        let z2 = row_sparse(n, 4, &[5, 17, 30], derive_seed(23, &[t]));
        if polar_rip_check(&d, &z, &z2, s).unwrap() <= delta {
            within += 1;
        }
    }
    assert!(within * 10 >= trials * 9, "{within}/{trials}");
}

#[test]
fn polar_check_rejects_wide_support() {
    let d = gaussian(10, 8, 1);
    let z = row_sparse(8, 2, &[0, 1, 2], 2);
    let z2 = row_sparse(8, 2, &[3, 4], 3);
    assert!(polar_rip_check(&d, &z, &z2, 2).is_err());
}

#[test]
fn hamming_tracks_angle() {
    let n = 5;
    let x = generate_bilr(n, 2, 1, 1).unwrap().to_dense();
    let w = generate_bilr(n, 3, 2, 2).unwrap().to_dense();
    // a partner at a fixed angle from x
    let w = &w - &x * frobenius_inner(&w, &x).unwrap();
    let w = &w / frobenius_norm(&w);
    let theta: f64 = 0.7;
    let x2 = &x * theta.cos() + &w * theta.sin();

    let (m, reps) = (500, 200);
    let samples: Vec<f64> = (0..reps)
        .map(|t| {
            let e = make_dense_ensemble(n, m, derive_seed(30, &[t]), true).unwrap();
            local_isometry_stat(&x, &x2, &e).unwrap().hamming_frac
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / reps as f64;
    let expected = theta / std::f64::consts::PI;
    let se = (expected * (1.0 - expected) / (m * reps as usize) as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} vs {expected}");
}

#[test]
fn probe_outcome_is_consistent() {
    let e = make_dense_ensemble(6, 300, 5, true).unwrap();
    let out = consistency_width_probe(6, 2, 1, &e, 200, 6).unwrap();
    assert_eq!(out.worst.hamming, 0);
    assert!(out.worst.frobenius_gap <= 2.0 * out.first_sample_error + 1e-12);
    assert!((0.0..=1.0).contains(&out.worst.angular_gap));
    assert!(out.evaluations <= 200 + 1);
    let again = consistency_width_probe(6, 2, 1, &e, 200, 6).unwrap();
    assert_eq!(again.worst.frobenius_gap.to_bits(), out.worst.frobenius_gap.to_bits());
}
