#![allow(dead_code)]

use bilr::matrix::DenseMatrix;
use bilr::rng::{fill_standard_normal, stream};

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    fill_standard_normal(&mut stream(seed), m.as_mut_slice());
    m
}

pub fn rank(m: &DenseMatrix) -> usize {
    bilr::svd(m).unwrap().numerical_rank()
}

pub fn nonzero_cols(m: &DenseMatrix) -> usize {
    (0..m.ncols()).filter(|&j| m.column(j).iter().any(|&v| v != 0.0)).count()
}

pub fn nonzero_rows(m: &DenseMatrix) -> usize {
    bilr::matrix::nonzero_rows(m).len()
}
