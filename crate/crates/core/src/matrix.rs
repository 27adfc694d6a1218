//! Dense matrices, the SVD contract, and the low-rank bisparse signal class.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng;

/// Real matrix with finite entries. Storage is nalgebra's column-major layout.
pub type DenseMatrix = DMatrix<f64>;

/// Singular values below `ZERO_SINGULAR_RTOL * σ₁` are treated as zero.
pub const ZERO_SINGULAR_RTOL: f64 = 1e-10;

const SVD_MAX_ITERATIONS: usize = 10_000;
const SVD_BASE_EPS: f64 = 5.0 * f64::EPSILON;
const SVD_MAX_EPS: f64 = 1e-8;
const SVD_CHECK_RTOL: f64 = 1e-6;

/// Square `n × n` matrix of rank at most `r` whose nonzero entries sit on a
/// `S × T` block with `|S|, |T| <= s`, stored as `left · rightᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilrMatrix {
    n: usize,
    s: usize,
    r: usize,
    left: DenseMatrix,
    right: DenseMatrix,
    row_support: Vec<usize>,
    col_support: Vec<usize>,
}

impl BilrMatrix {
    /// Builds a structured matrix from explicit factors. Supports must be
    /// strictly increasing and factor rows outside them exactly zero.
    pub fn new(
        s: usize,
        left: DenseMatrix,
        right: DenseMatrix,
        row_support: Vec<usize>,
        col_support: Vec<usize>,
    ) -> Result<Self> {
        let n = left.nrows();
        let r = left.ncols();
        if right.shape() != (n, r) {
            return Err(Error::mismatch(
                format!("right factor {n}x{r}"),
                format!("{}x{}", right.nrows(), right.ncols()),
            ));
        }
        if row_support.len() > s || col_support.len() > s {
            return Err(Error::InvalidShape(format!(
                "support sizes ({}, {}) exceed s = {s}",
                row_support.len(),
                col_support.len()
            )));
        }
        for (name, support, factor) in [("row", &row_support, &left), ("col", &col_support, &right)]
        {
            if support.windows(2).any(|w| w[0] >= w[1]) || support.iter().any(|&i| i >= n) {
                return Err(Error::InvalidShape(format!(
                    "{name} support must be strictly increasing indices below {n}"
                )));
            }
            let mut inside = vec![false; n];
            for &i in support.iter() {
                inside[i] = true;
            }
            let stray = (0..n).any(|i| !inside[i] && factor.row(i).iter().any(|&v| v != 0.0));
            if stray {
                return Err(Error::InvalidShape(format!(
                    "{name} factor has nonzero rows outside its support"
                )));
            }
        }
        Ok(Self {
            n,
            s,
            r,
            left,
            right,
            row_support,
            col_support,
        })
    }

    /// Factorizes a dense matrix already known to lie in the set: at most `s`
    /// nonzero rows and columns, rank at most `r`.
    ///
    /// Supports are the nonzero rows/columns, padded with the smallest unused
    /// indices up to size `s` (or `n`). Factors keep the `r` leading singular
    /// triplets; `left` carries the singular values.
    pub fn from_dense(m: &DenseMatrix, s: usize, r: usize) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::InvalidShape(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let rows = nonzero_rows(m);
        let cols = nonzero_rows(&m.transpose());
        if rows.len() > s || cols.len() > s {
            return Err(Error::InvalidShape(format!(
                "matrix has {} nonzero rows and {} nonzero columns, more than s = {s}",
                rows.len(),
                cols.len()
            )));
        }
        let target = s.min(n);
        let row_support = pad_support(rows, target, n);
        let col_support = pad_support(cols, target, n);

        let dec = svd(m)?;
        let k = r.min(dec.singular_values.len());
        let mut left = DenseMatrix::zeros(n, r);
        let mut right = DenseMatrix::zeros(n, r);
        for j in 0..k {
            let sigma = dec.singular_values[j];
            for &i in &row_support {
                left[(i, j)] = sigma * dec.left_vectors[(i, j)];
            }
            for &i in &col_support {
                right[(i, j)] = dec.right_vectors[(i, j)];
            }
        }
        Self::new(s, left, right, row_support, col_support)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn left_factor(&self) -> &DenseMatrix {
        &self.left
    }

    pub fn right_factor(&self) -> &DenseMatrix {
        &self.right
    }

    pub fn row_support(&self) -> &[usize] {
        &self.row_support
    }

    pub fn col_support(&self) -> &[usize] {
        &self.col_support
    }

    pub fn to_dense(&self) -> DenseMatrix {
        &self.left * self.right.transpose()
    }

    /// Returns a copy whose dense form is multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            left: &self.left * factor,
            ..self.clone()
        }
    }
}

/// Draws a random unit-norm member of the set with `|S| = |T| = s` and rank `r`.
///
/// Supports are uniform without replacement; factor entries on `S × [r]` and
/// `T × [r]` are iid standard normal. The product is rescaled to unit Frobenius
/// norm by dividing the left factor.
pub fn generate_bilr(n: usize, s: usize, r: usize, seed: u64) -> Result<BilrMatrix> {
    if r == 0 || r > s || s > n {
        return Err(Error::InvalidShape(format!(
            "need 1 <= r <= s <= n, got n = {n}, s = {s}, r = {r}"
        )));
    }
    let mut rng = rng::stream(seed);
    let mut row_support = index::sample(&mut rng, n, s).into_vec();
    let mut col_support = index::sample(&mut rng, n, s).into_vec();
    row_support.sort_unstable();
    col_support.sort_unstable();

    let mut draws = vec![0.0; 2 * s * r];
    rng::fill_standard_normal(&mut rng, &mut draws);
    let (left_draws, right_draws) = draws.split_at(s * r);

    let mut left = DenseMatrix::zeros(n, r);
    let mut right = DenseMatrix::zeros(n, r);
    for (a, &i) in row_support.iter().enumerate() {
        for j in 0..r {
            left[(i, j)] = left_draws[a * r + j];
        }
    }
    for (a, &i) in col_support.iter().enumerate() {
        for j in 0..r {
            right[(i, j)] = right_draws[a * r + j];
        }
    }

    let norm = frobenius_norm(&(&left * right.transpose()));
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Numerical("degenerate random factors".into()));
    }
    left /= norm;
    BilrMatrix::new(s, left, right, row_support, col_support)
}

pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn frobenius_inner(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::mismatch(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

/// Thin SVD with singular values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub singular_values: Vec<f64>,
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub left_vectors: DenseMatrix,
    /// `cols × k` with orthonormal columns.
    pub right_vectors: DenseMatrix,
}

impl SvdResult {
    /// `Σ_{k < rank} σₖ uₖ vₖᵀ`.
    pub fn reconstruct(&self, rank: usize) -> DenseMatrix {
        let k = rank.min(self.singular_values.len());
        let mut out = DenseMatrix::zeros(self.left_vectors.nrows(), self.right_vectors.nrows());
        for j in 0..k {
            let u = self.left_vectors.column(j) * self.singular_values[j];
            out.ger(1.0, &u, &self.right_vectors.column(j), 1.0);
        }
        out
    }

    /// Number of singular values above `ZERO_SINGULAR_RTOL · σ₁`.
    pub fn numerical_rank(&self) -> usize {
        let Some(&top) = self.singular_values.first() else {
            return 0;
        };
        if top == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .take_while(|&&v| v > ZERO_SINGULAR_RTOL * top)
            .count()
    }
}

pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    if m.is_empty() {
        return Err(Error::InvalidShape("empty matrix".into()));
    }
    // nalgebra can return a wrong factorization of rank-deficient input at
    // tight tolerances, so each attempt is checked against `m`; the
    // transpose is tried too since it takes a different bidiagonalization.
    let scale = frobenius_norm(m);
    let mut eps = SVD_BASE_EPS;
    let (u, v_t, sv) = loop {
        let mut found = None;
        for transposed in [false, true] {
            let (u, v_t, sv) = raw_svd(m, transposed, eps)?;
            let recomposed = &u * DenseMatrix::from_diagonal(&sv) * &v_t;
            if frobenius_norm(&(recomposed - m)) <= SVD_CHECK_RTOL * scale {
                found = Some((u, v_t, sv));
                break;
            }
        }
        if let Some(found) = found {
            break found;
        }
        eps *= 16.0;
        if eps > SVD_MAX_EPS {
            return Err(Error::Numerical("SVD failed its reconstruction check".into()));
        }
    };

    let mut order: Vec<usize> = (0..sv.len()).collect();
    // stable: equal singular values keep the decomposition's own order
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));

    let k = order.len();
    let mut left_vectors = DenseMatrix::zeros(m.nrows(), k);
    let mut right_vectors = DenseMatrix::zeros(m.ncols(), k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        singular_values.push(sv[src]);
        left_vectors.set_column(dst, &u.column(src));
        right_vectors.set_column(dst, &v_t.row(src).transpose());
    }
    Ok(SvdResult {
        singular_values,
        left_vectors,
        right_vectors,
    })
}

type RawSvd = (DenseMatrix, DenseMatrix, DVector<f64>);

/// `(U, Vᵀ, σ)` of `m`, computed on `mᵀ` and swapped back if `transposed`.
fn raw_svd(m: &DenseMatrix, transposed: bool, eps: f64) -> Result<RawSvd> {
    let input = if transposed { m.transpose() } else { m.clone() };
    let dec = input
        .try_svd(true, true, eps, SVD_MAX_ITERATIONS)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = dec.u.ok_or_else(|| Error::Numerical("missing left vectors".into()))?;
    let v_t = dec
        .v_t
        .ok_or_else(|| Error::Numerical("missing right vectors".into()))?;
    Ok(if transposed {
        (v_t.transpose(), u.transpose(), dec.singular_values)
    } else {
        (u, v_t, dec.singular_values)
    })
}

/// Indices of rows containing at least one nonzero entry.
pub fn nonzero_rows(m: &DenseMatrix) -> Vec<usize> {
    (0..m.nrows())
        .filter(|&i| m.row(i).iter().any(|&v| v != 0.0))
        .collect()
}

fn pad_support(mut support: Vec<usize>, target: usize, n: usize) -> Vec<usize> {
    let mut next = 0;
    while support.len() < target && next < n {
        if support.binary_search(&next).is_err() {
            let pos = support.partition_point(|&i| i < next);
            support.insert(pos, next);
        }
        next += 1;
    }
    support
}
