mod common;

use bilr::experiment::{error_statistics, run_experiment, ErrorColumn, ErrorMode, ExperimentConfig, RunOptions, Statistic};
use bilr::matrix::{frobenius_norm, generate_bilr, DenseMatrix};
use bilr::operators::project_bilr_heuristic;
use bilr::recovery::{recover_multistep, recover_pbp, rescale_to_unit, PbpProjection, Scheme};
use bilr::rng::derive_seed;
use bilr::sensing::{make_dense_ensemble, make_factorized_ensemble, SensingMap, SignVector};
use bilr::Error;
use common::{nonzero_cols, nonzero_rows, rank};

/// Best rank-`r` approximation straight from nalgebra's decomposition.
fn truncate(m: &DenseMatrix, r: usize) -> DenseMatrix {
    let svd = m.clone().svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
    for &k in order.iter().take(r) {
        out += u.column(k) * v_t.row(k) * svd.singular_values[k];
    }
    out
}

fn keep_rows(m: &DenseMatrix, s: usize) -> DenseMatrix {
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&a, &b| m.row(b).norm().total_cmp(&m.row(a).norm()).then(a.cmp(&b)));
    let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
    for &i in idx.iter().take(s) {
        out.set_row(i, &m.row(i));
    }
    out
}

fn config(scheme: Scheme, n: usize, s: usize, r: usize, m: usize, p: Option<usize>) -> ExperimentConfig {
    ExperimentConfig {
        scheme,
        n,
        s,
        r,
        m_grid: vec![m],
        p,
        trials_per_m: 50,
        master_seed: 99,
        output_path: None,
        error_mode: ErrorMode::Both,
        allow_heuristic_projection: false,
    }
}

#[test]
fn multistep_matches_hand_composition() {
    for seed in 0..10u64 {
        let (n, s, r) = (12, 3, 2);
        let x = generate_bilr(n, s, r, derive_seed(seed, &[0])).unwrap().to_dense();
        let e = make_factorized_ensemble(n, 300, 10, derive_seed(seed, &[1])).unwrap();
        let y = e.measure(&x).unwrap();
        let out = recover_multistep(&y, &e, s, r).unwrap();

        let mut w = DenseMatrix::zeros(10, 10);
        for (i, &b) in y.bits().iter().enumerate() {
            w += e.inner_matrix(i) * b as f64;
        }
        let rows = keep_rows(&(e.side_b().transpose() * truncate(&w, r)), s);
        let expected = keep_rows(&(rows * e.side_c()).transpose(), s).transpose();
        let gap = frobenius_norm(&(&out.estimate - &expected));
        assert!(gap <= 1e-12 * frobenius_norm(&expected).max(1.0), "gap {gap}");
    }
}

#[test]
fn multistep_output_is_structured_and_deterministic() {
    let e = make_factorized_ensemble(10, 200, 8, 5).unwrap();
    let y = SignVector::from_bits(vec![1; 200]).unwrap();
    let a = recover_multistep(&y, &e, 3, 1).unwrap();
    let b = recover_multistep(&y, &e, 3, 1).unwrap();
    assert_eq!(a.estimate, b.estimate);
    assert!(nonzero_rows(&a.estimate) <= 3 && nonzero_cols(&a.estimate) <= 3 && rank(&a.estimate) <= 1);
    assert_eq!(a.estimate_structured.to_dense(), a.estimate);
}

#[test]
fn multistep_is_odd_in_y() {
    for seed in 0..10u64 {
        let x = generate_bilr(10, 3, 1, seed).unwrap().to_dense();
        let e = make_factorized_ensemble(10, 400, 12, seed + 100).unwrap();
        let y = e.measure(&x).unwrap();
        let plus = recover_multistep(&y, &e, 3, 1).unwrap().estimate;
        let minus = recover_multistep(&y.negated(), &e, 3, 1).unwrap().estimate;
        assert!(frobenius_norm(&(plus + minus)) <= 1e-10);
    }
}

#[test]
fn pbp_is_odd_in_y() {
    for seed in 0..10u64 {
        let x = generate_bilr(6, 2, 1, seed).unwrap().to_dense();
        let e = make_dense_ensemble(6, 300, seed + 100, true).unwrap();
        let y = e.measure(&x).unwrap();
        let plus = recover_pbp(&y, &e, 2, 1, PbpProjection::Exhaustive).unwrap().estimate;
        let minus = recover_pbp(&y.negated(), &e, 2, 1, PbpProjection::Exhaustive).unwrap().estimate;
        assert!(frobenius_norm(&(plus + minus)) <= 1e-10);
    }
}

#[test]
fn exhaustive_pbp_never_worse_than_heuristic() {
    for seed in 0..20u64 {
        let x = generate_bilr(8, 3, 1, seed).unwrap().to_dense();
        let e = make_dense_ensemble(8, 200, seed + 50, true).unwrap();
        let y = e.measure(&x).unwrap();
        let exact = recover_pbp(&y, &e, 3, 1, PbpProjection::Exhaustive).unwrap();
        let back = e.adjoint(&y.to_f64()).unwrap();
        let heuristic = project_bilr_heuristic(&back, 3, 1, 8).unwrap();
        assert!(exact.metadata.projection_residual.unwrap() <= heuristic.residual + 1e-12);
        assert!(!exact.metadata.heuristic_projection);
    }
}

#[test]
fn pbp_above_ceiling_needs_opt_in() {
    let e = make_dense_ensemble(16, 50, 1, true).unwrap();
    let y = SignVector::from_bits(vec![1; 50]).unwrap();
    assert!(matches!(
        recover_pbp(&y, &e, 2, 1, PbpProjection::Exhaustive),
        Err(Error::DimensionTooLarge { .. })
    ));
    let out = recover_pbp(&y, &e, 2, 1, PbpProjection::AllowHeuristic { sweeps: 4 }).unwrap();
    assert!(out.metadata.heuristic_projection);
}

#[test]
fn rescale_is_idempotent_and_rejects_zero() {
    let e = make_dense_ensemble(5, 100, 3, true).unwrap();
    let x = generate_bilr(5, 2, 1, 4).unwrap().to_dense();
    let out = recover_pbp(&e.measure(&x).unwrap(), &e, 2, 1, PbpProjection::Exhaustive).unwrap();
    let once = rescale_to_unit(out).unwrap();
    assert!((frobenius_norm(&once.estimate) - 1.0).abs() < 1e-12);
    let twice = rescale_to_unit(once.clone()).unwrap();
    assert!(frobenius_norm(&(&twice.estimate - &once.estimate)) < 1e-12);

    let f = make_factorized_ensemble(5, 10, 3, 1).unwrap();
    let mut zero = recover_multistep(&SignVector::from_bits(vec![1; 10]).unwrap(), &f, 2, 1).unwrap();
    zero.estimate_structured = zero.estimate_structured.scaled(0.0);
    zero.estimate.fill(0.0);
    assert!(matches!(rescale_to_unit(zero), Err(Error::ZeroEstimate)));
}

#[test]
fn pbp_median_error_at_m_2000() {
    let records = run_experiment(&config(Scheme::Pbp, 6, 2, 1, 2000, None), RunOptions::default()).unwrap();
    let median = error_statistics(&records, Statistic::Median, ErrorColumn::Unit)[0].1;
    assert!(median < 0.45, "median {median}");
}

#[test]
fn multistep_median_error_at_m_6000() {
    let cfg = config(Scheme::Multistep, 32, 3, 1, 6000, Some(160));
    let records = run_experiment(&cfg, RunOptions::default()).unwrap();
    let median = error_statistics(&records, Statistic::Median, ErrorColumn::Unit)[0].1;
    assert!(median < 0.6, "median {median}");
}
