//! Hard-thresholding operators and projections onto the low-rank bisparse set.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::matrix::{svd, BilrMatrix, DenseMatrix};

/// Largest `n` accepted by [`project_bilr_exhaustive`].
pub const EXHAUSTIVE_MAX_N: usize = 14;
/// Largest `s` accepted by [`project_bilr_exhaustive`].
pub const EXHAUSTIVE_MAX_S: usize = 4;

/// A member of the set together with its Frobenius distance to the input.
#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: BilrMatrix,
    pub residual: f64,
}

/// Best rank-`r` approximation: keeps the `r` leading singular triplets.
pub fn hard_threshold_rank(m: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    if r >= m.nrows().min(m.ncols()) {
        return Ok(m.clone());
    }
    if r == 0 {
        return Ok(DenseMatrix::zeros(m.nrows(), m.ncols()));
    }
    Ok(svd(m)?.reconstruct(r))
}

/// Indices of the `s` rows with largest ℓ₂ norm, ties to the smaller index,
/// returned in increasing order.
pub fn top_rows(m: &DenseMatrix, s: usize) -> Vec<usize> {
    let norms: Vec<f64> = (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v * v).sum())
        .collect();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    order.truncate(s);
    order.sort_unstable();
    order
}

/// Keeps the `s` rows with largest ℓ₂ norm and zeroes the rest.
pub fn hard_threshold_rows(m: &DenseMatrix, s: usize) -> DenseMatrix {
    if s >= m.nrows() {
        return m.clone();
    }
    let keep = top_rows(m, s);
    let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
    for &i in &keep {
        out.set_row(i, &m.row(i));
    }
    out
}

/// Column analogue of [`hard_threshold_rows`]; equals `H_row(Mᵀ)ᵀ` exactly.
pub fn hard_threshold_cols(m: &DenseMatrix, s: usize) -> DenseMatrix {
    hard_threshold_rows(&m.transpose(), s).transpose()
}

fn check_projection_args(m: &DenseMatrix, s: usize, r: usize) -> Result<usize> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidShape(format!(
            "projection needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if r == 0 || r > s || s > n {
        return Err(Error::InvalidShape(format!(
            "need 1 <= r <= s <= n, got n = {n}, s = {s}, r = {r}"
        )));
    }
    Ok(n)
}

// Truncates M[rows, cols] to rank r and embeds it back; returns the embedded
// candidate, its residual ‖M − Z‖_F and the structured form.
struct BlockCandidate {
    dense: DenseMatrix,
    residual: f64,
}

fn block_candidate(m: &DenseMatrix, rows: &[usize], cols: &[usize], r: usize) -> Result<BlockCandidate> {
    let sub = m.select_rows(rows).select_columns(cols);
    let trunc = hard_threshold_rank(&sub, r)?;
    let mut dense = DenseMatrix::zeros(m.nrows(), m.ncols());
    for (b, &j) in cols.iter().enumerate() {
        for (a, &i) in rows.iter().enumerate() {
            dense[(i, j)] = trunc[(a, b)];
        }
    }
    let residual = residual_norm(m, &dense);
    Ok(BlockCandidate { dense, residual })
}

/// `‖M − Z‖_F`, summed in storage order.
pub(crate) fn residual_norm(m: &DenseMatrix, z: &DenseMatrix) -> f64 {
    m.iter()
        .zip(z.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn structured(dense: &DenseMatrix, rows: &[usize], cols: &[usize], s: usize, r: usize) -> Result<BilrMatrix> {
    let n = dense.nrows();
    let sub = dense.select_rows(rows).select_columns(cols);
    let dec = svd(&sub)?;
    let k = r.min(dec.singular_values.len());
    let mut left = DenseMatrix::zeros(n, r);
    let mut right = DenseMatrix::zeros(n, r);
    for j in 0..k {
        let sigma = dec.singular_values[j];
        for (a, &i) in rows.iter().enumerate() {
            left[(i, j)] = sigma * dec.left_vectors[(a, j)];
        }
        for (b, &i) in cols.iter().enumerate() {
            right[(i, j)] = dec.right_vectors[(b, j)];
        }
    }
    BilrMatrix::new(s, left, right, rows.to_vec(), cols.to_vec())
}

/// Exact projection by enumerating every support pair `(S, T)` with
/// `|S| = |T| = s` in lexicographic order and truncating `M[S, T]` to rank
/// `r`. The first minimizer in enumeration order wins.
pub fn project_bilr_exhaustive(m: &DenseMatrix, s: usize, r: usize) -> Result<Projection> {
    let n = check_projection_args(m, s, r)?;
    if n > EXHAUSTIVE_MAX_N || s > EXHAUSTIVE_MAX_S {
        return Err(Error::DimensionTooLarge {
            n,
            s,
            max_n: EXHAUSTIVE_MAX_N,
            max_s: EXHAUSTIVE_MAX_S,
        });
    }
    let supports: Vec<Vec<usize>> = (0..n).combinations(s).collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for (a, rows) in supports.iter().enumerate() {
        for (b, cols) in supports.iter().enumerate() {
            let residual = block_candidate(m, rows, cols, r)?.residual;
            if best.is_none_or(|(res, _, _)| residual < res) {
                best = Some((residual, a, b));
            }
        }
    }
    let (residual, a, b) = best.expect("at least one support pair");
    let winner = block_candidate(m, &supports[a], &supports[b], r)?;
    Ok(Projection {
        matrix: structured(&winner.dense, &supports[a], &supports[b], s, r)?,
        residual,
    })
}

fn restrict_cols(m: &DenseMatrix, cols: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
    for &j in cols {
        out.set_column(j, &m.column(j));
    }
    out
}

/// Alternating support search; not an exact projection.
///
/// Starts from `H_col ∘ H_row ∘ H_[r]` and from the largest-norm rows and
/// columns, then alternates: fix `T`, pick `S` as the top rows of the rank-`r`
/// truncation of `M[:, T]`; fix `S`, pick `T` likewise. Every visited support
/// pair is scored by its optimal rank-`r` block and the best is returned, so
/// the result is never worse than the single-pass composition.
pub fn project_bilr_heuristic(m: &DenseMatrix, s: usize, r: usize, sweeps: usize) -> Result<Projection> {
    check_projection_args(m, s, r)?;
    if sweeps == 0 {
        return Err(Error::InvalidInput("sweeps must be at least 1".into()));
    }
    let composed = hard_threshold_rows(&hard_threshold_rank(m, r)?, s);
    let composed = hard_threshold_cols(&composed, s);
    let starts = [
        (top_rows(&hard_threshold_rank(m, r)?, s), top_rows(&composed.transpose(), s)),
        (top_rows(m, s), top_rows(&m.transpose(), s)),
    ];

    // the composition itself lies in the set; it is the baseline to beat
    let mut best_res = residual_norm(m, &composed);
    let mut best = (composed, starts[0].0.clone(), starts[0].1.clone());

    for (rows0, cols0) in starts {
        let (mut rows, mut cols) = (rows0, cols0);
        for _ in 0..sweeps {
            let cand = block_candidate(m, &rows, &cols, r)?;
            if cand.residual < best_res {
                best_res = cand.residual;
                best = (cand.dense, rows.clone(), cols.clone());
            }
            let next_rows = top_rows(&hard_threshold_rank(&restrict_cols(m, &cols), r)?, s);
            let row_block = restrict_cols(&m.transpose(), &next_rows).transpose();
            let next_cols = top_rows(&hard_threshold_rank(&row_block, r)?.transpose(), s);
            if next_rows == rows && next_cols == cols {
                break;
            }
            rows = next_rows;
            cols = next_cols;
        }
        let cand = block_candidate(m, &rows, &cols, r)?;
        if cand.residual < best_res {
            best_res = cand.residual;
            best = (cand.dense, rows, cols);
        }
    }

    let (dense, _, _) = best;
    Ok(Projection {
        matrix: BilrMatrix::from_dense(&dense, s, r)?,
        residual: best_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frobenius_norm, generate_bilr, nonzero_rows};
    use crate::rng;
    use nalgebra::{dmatrix, dvector};

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(rows, cols);
        rng::fill_standard_normal(&mut rng::stream(seed), m.as_mut_slice());
        m
    }

    #[test]
    fn rank_threshold_diagonal() {
        let d = DenseMatrix::from_diagonal(&dvector![3.0, 2.0, 1.0]);
        let out = hard_threshold_rank(&d, 2).unwrap();
        let want = DenseMatrix::from_diagonal(&dvector![3.0, 2.0, 0.0]);
        assert!((out - want).norm() < 1e-12);
        assert_eq!(hard_threshold_rank(&d, 3).unwrap(), d);
        assert_eq!(hard_threshold_rank(&d, 7).unwrap(), d);
    }

    #[test]
    fn rank_threshold_residual_is_tail_energy() {
        let m = random(5, 5, 3);
        let sv = svd(&m).unwrap().singular_values;
        let tail: f64 = sv[1..].iter().map(|v| v * v).sum();
        let out = hard_threshold_rank(&m, 1).unwrap();
        let res = frobenius_norm(&(&m - out)).powi(2);
        assert!((res - tail).abs() <= 1e-8 * tail);
    }

    #[test]
    fn row_threshold_order_statistics() {
        let m = dmatrix![5.0, 0.0; 0.0, 1.0; 3.0, 0.0];
        let out = hard_threshold_rows(&m, 2);
        assert_eq!(out, dmatrix![5.0, 0.0; 0.0, 0.0; 3.0, 0.0]);
        assert_eq!(hard_threshold_rows(&m, 3), m);
    }

    #[test]
    fn row_ties_prefer_smaller_index() {
        let m = dmatrix![1.0; -1.0; 1.0];
        assert_eq!(top_rows(&m, 2), vec![0, 1]);
    }

    #[test]
    fn col_threshold_keeps_largest_column() {
        let m = dmatrix![2.0, 9.0, 4.0];
        assert_eq!(hard_threshold_cols(&m, 1), dmatrix![0.0, 9.0, 0.0]);
        assert_eq!(hard_threshold_cols(&m, 5), m);
    }

    #[test]
    fn exhaustive_singleton_example() {
        let m = dmatrix![1.0, 0.0, 0.0; 0.0, 5.0, 0.0; 0.0, 0.0, 2.0];
        let p = project_bilr_exhaustive(&m, 1, 1).unwrap();
        assert!((p.residual - 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(p.matrix.row_support(), &[1]);
        assert_eq!(p.matrix.col_support(), &[1]);
        assert!((p.matrix.to_dense()[(1, 1)] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_fixes_members() {
        let x = generate_bilr(6, 2, 1, 12).unwrap().to_dense();
        let p = project_bilr_exhaustive(&x, 2, 1).unwrap();
        assert!(p.residual <= 1e-10);
        assert!((p.matrix.to_dense() - &x).norm() <= 1e-10);
    }

    #[test]
    fn exhaustive_ceiling() {
        let m = DenseMatrix::zeros(15, 15);
        assert!(matches!(
            project_bilr_exhaustive(&m, 2, 1),
            Err(Error::DimensionTooLarge { n: 15, .. })
        ));
        let m = DenseMatrix::zeros(10, 10);
        assert!(matches!(
            project_bilr_exhaustive(&m, 5, 1),
            Err(Error::DimensionTooLarge { s: 5, .. })
        ));
        assert!(matches!(
            project_bilr_exhaustive(&m, 2, 3),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn heuristic_on_members_and_structure() {
        let x = generate_bilr(9, 3, 2, 5).unwrap().to_dense();
        let p = project_bilr_heuristic(&x, 3, 2, 4).unwrap();
        assert!(p.residual <= 1e-10);

        let m = random(9, 9, 8);
        let p = project_bilr_heuristic(&m, 3, 1, 4).unwrap();
        let z = p.matrix.to_dense();
        assert!(nonzero_rows(&z).len() <= 3);
        assert!(nonzero_rows(&z.transpose()).len() <= 3);
        assert!((frobenius_norm(&(&m - &z)) - p.residual).abs() < 1e-10);
        assert!(project_bilr_heuristic(&m, 3, 1, 0).is_err());
    }
}
