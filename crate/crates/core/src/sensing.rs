//! Gaussian sensing ensembles, one-bit quantization and adjoints.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

const SIDE_TAG: u64 = 0x51DE;
const INNER_TAG: u64 = 0x1AAE;

/// `√(π/2)/m`: makes `E‖𝓐(Z)‖₁ = ‖Z‖_F` for iid standard normal `A_i`.
pub fn l1_normalization(m: usize) -> f64 {
    FRAC_PI_2.sqrt() / m as f64
}

/// A linear map `ℝ^{n×n} → ℝ^m` with its adjoint.
pub trait SensingMap {
    fn measurements(&self) -> usize;

    /// Side length `n` of the signals the map accepts.
    fn dimension(&self) -> usize;

    /// `(⟨A_i, X⟩_F)_i`.
    fn sense_raw(&self, x: &DenseMatrix) -> Result<Vec<f64>>;

    /// `Σᵢ vᵢ A_i`.
    fn adjoint(&self, v: &[f64]) -> Result<DenseMatrix>;

    fn measure(&self, x: &DenseMatrix) -> Result<SignVector> {
        Ok(quantize(&self.sense_raw(x)?))
    }
}

/// One-bit measurement record, every entry exactly `±1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn from_bits(bits: Vec<i8>) -> Result<Self> {
        if let Some(bad) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(Error::InvalidInput(format!("sign entry {bad} is not ±1")));
        }
        Ok(Self(bits))
    }

    pub fn bits(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&b| -b).collect())
    }

    /// Number of positions where the two records differ.
    pub fn hamming(&self, other: &SignVector) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::mismatch(self.len(), other.len()));
        }
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }
}

impl TryFrom<Vec<i8>> for SignVector {
    type Error = Error;

    fn try_from(bits: Vec<i8>) -> Result<Self> {
        Self::from_bits(bits)
    }
}

impl From<SignVector> for Vec<i8> {
    fn from(v: SignVector) -> Self {
        v.0
    }
}

/// `sgn` with the convention `sgn(0) = +1`.
pub fn quantize(raw: &[f64]) -> SignVector {
    SignVector(raw.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect())
}

/// Dense ensemble of `m` matrices `A_i ∈ ℝ^{n×n}`, stored pre-scaled.
#[derive(Debug, Clone)]
pub struct DenseEnsemble {
    n: usize,
    m: usize,
    scale: f64,
    normalized: bool,
    seed: Option<u64>,
    // row i holds vec(A_i) in column-major order
    rows: DenseMatrix,
}

/// Draws `A_i` with iid N(0,1) entries, multiplied by `√(π/2)/m` when
/// `normalized`.
pub fn make_dense_ensemble(n: usize, m: usize, seed: u64, normalized: bool) -> Result<DenseEnsemble> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidShape(format!("need n, m >= 1, got n = {n}, m = {m}")));
    }
    let scale = if normalized { l1_normalization(m) } else { 1.0 };
    let nn = n * n;
    let mut rng = rng::stream(seed);
    let mut draws = vec![0.0; nn];
    let mut rows = DenseMatrix::zeros(m, nn);
    for i in 0..m {
        rng::fill_standard_normal(&mut rng, &mut draws);
        for (j, &g) in draws.iter().enumerate() {
            rows[(i, j)] = scale * g;
        }
    }
    Ok(DenseEnsemble {
        n,
        m,
        scale,
        normalized,
        seed: Some(seed),
        rows,
    })
}

impl DenseEnsemble {
    /// Ensemble with `A_i = scale · matrices[i]`.
    pub fn from_matrices(matrices: &[DenseMatrix], scale: f64) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidShape("need at least one sensing matrix".into()));
        };
        let n = first.nrows();
        if n == 0 || scale.is_nan() || scale <= 0.0 {
            return Err(Error::InvalidShape("need n >= 1 and a positive scale".into()));
        }
        let mut rows = DenseMatrix::zeros(matrices.len(), n * n);
        for (i, a) in matrices.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::mismatch(
                    format!("{n}x{n}"),
                    format!("{}x{}", a.nrows(), a.ncols()),
                ));
            }
            for (j, &v) in a.as_slice().iter().enumerate() {
                rows[(i, j)] = scale * v;
            }
        }
        Ok(Self {
            n,
            m: matrices.len(),
            scale,
            normalized: false,
            seed: None,
            rows,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// The `i`-th sensing matrix, including the scale.
    pub fn matrix(&self, i: usize) -> DenseMatrix {
        DenseMatrix::from_iterator(self.n, self.n, self.rows.row(i).iter().copied())
    }

    pub fn spec(&self) -> Option<EnsembleSpec> {
        self.seed.map(|seed| EnsembleSpec::Dense {
            n: self.n,
            m: self.m,
            seed,
            normalized: self.normalized,
        })
    }
}

impl SensingMap for DenseEnsemble {
    fn measurements(&self) -> usize {
        self.m
    }

    fn dimension(&self) -> usize {
        self.n
    }

    fn sense_raw(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        check_square(x, self.n)?;
        let v = DVector::from_column_slice(x.as_slice());
        Ok((&self.rows * v).as_slice().to_vec())
    }

    fn adjoint(&self, v: &[f64]) -> Result<DenseMatrix> {
        if v.len() != self.m {
            return Err(Error::mismatch(self.m, v.len()));
        }
        let flat = self.rows.tr_mul(&DVector::from_column_slice(v));
        Ok(DenseMatrix::from_column_slice(self.n, self.n, flat.as_slice()))
    }
}

/// Factorized ensemble `A_i = Bᵀ A′_i C` with `A′_i ∈ ℝ^{p×p}` and
/// `B, C ∈ ℝ^{p×n}`.
///
/// The inner matrices are never stored: `A′_i` is regenerated from its own
/// seeded stream each time it is needed, so memory stays at `2pn + p²`.
#[derive(Debug, Clone)]
pub struct FactorizedEnsemble {
    n: usize,
    m: usize,
    p: usize,
    seed: u64,
    inner_scale: f64,
    b: DenseMatrix,
    c: DenseMatrix,
}

/// `A′_i` entries iid N(0,1)·`√(π/2)/m`; `B`, `C` entries iid N(0, 1/p).
pub fn make_factorized_ensemble(n: usize, m: usize, p: usize, seed: u64) -> Result<FactorizedEnsemble> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::InvalidShape(format!(
            "need n, m, p >= 1, got n = {n}, m = {m}, p = {p}"
        )));
    }
    let mut rng = rng::stream(rng::derive_seed(seed, &[SIDE_TAG]));
    let side_scale = 1.0 / (p as f64).sqrt();
    let mut side = || {
        let mut d = DenseMatrix::zeros(p, n);
        rng::fill_standard_normal(&mut rng, d.as_mut_slice());
        d * side_scale
    };
    let b = side();
    let c = side();
    Ok(FactorizedEnsemble {
        n,
        m,
        p,
        seed,
        inner_scale: l1_normalization(m),
        b,
        c,
    })
}

impl FactorizedEnsemble {
    pub fn inner_dimension(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn inner_scale(&self) -> f64 {
        self.inner_scale
    }

    pub fn side_b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn side_c(&self) -> &DenseMatrix {
        &self.c
    }

    pub fn spec(&self) -> EnsembleSpec {
        EnsembleSpec::Factorized {
            n: self.n,
            m: self.m,
            p: self.p,
            seed: self.seed,
        }
    }

    // unscaled standard normal entries of A′_i, column-major
    fn inner_draw(&self, i: usize, buf: &mut [f64]) {
        let mut rng = rng::stream(rng::derive_seed(self.seed, &[INNER_TAG, i as u64]));
        rng::fill_standard_normal(&mut rng, buf);
    }

    /// `A′_i`, including the scale.
    pub fn inner_matrix(&self, i: usize) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.p, self.p);
        self.inner_draw(i, g.as_mut_slice());
        g * self.inner_scale
    }

    /// `B X Cᵀ`.
    pub fn compress(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_square(x, self.n)?;
        Ok(&self.b * x * self.c.transpose())
    }

    /// `𝓐′(Z) = (⟨A′_i, Z⟩_F)_i` for `Z ∈ ℝ^{p×p}`.
    pub fn sense_inner(&self, z: &DenseMatrix) -> Result<Vec<f64>> {
        check_square(z, self.p)?;
        let mut g = vec![0.0; self.p * self.p];
        Ok((0..self.m)
            .map(|i| {
                self.inner_draw(i, &mut g);
                self.inner_scale * dot(&g, z.as_slice())
            })
            .collect())
    }

    /// `𝓐′*(v) = Σᵢ vᵢ A′_i`, a `p × p` matrix.
    pub fn inner_adjoint(&self, v: &[f64]) -> Result<DenseMatrix> {
        if v.len() != self.m {
            return Err(Error::mismatch(self.m, v.len()));
        }
        let mut g = vec![0.0; self.p * self.p];
        let mut acc = DenseMatrix::zeros(self.p, self.p);
        for (i, &vi) in v.iter().enumerate() {
            self.inner_draw(i, &mut g);
            axpy(vi, &g, acc.as_mut_slice());
        }
        Ok(acc * self.inner_scale)
    }

    /// One regeneration pass computing both `y = sgn 𝓐′(BXCᵀ)` and
    /// `𝓐′*(y)`. Bit-identical to `quantize(sense_raw(x))` followed by
    /// `inner_adjoint(y)`.
    pub fn sense_and_backproject(&self, x: &DenseMatrix) -> Result<(SignVector, DenseMatrix)> {
        let z = self.compress(x)?;
        let mut g = vec![0.0; self.p * self.p];
        let mut acc = DenseMatrix::zeros(self.p, self.p);
        let mut bits = Vec::with_capacity(self.m);
        for i in 0..self.m {
            self.inner_draw(i, &mut g);
            let raw = self.inner_scale * dot(&g, z.as_slice());
            let bit: i8 = if raw >= 0.0 { 1 } else { -1 };
            axpy(f64::from(bit), &g, acc.as_mut_slice());
            bits.push(bit);
        }
        Ok((SignVector(bits), acc * self.inner_scale))
    }

    /// Materializes every `A_i = Bᵀ A′_i C` into a dense ensemble. Debug aid;
    /// costs `m n²` memory.
    pub fn materialize(&self) -> Result<DenseEnsemble> {
        let mut g = DenseMatrix::zeros(self.p, self.p);
        let matrices: Vec<DenseMatrix> = (0..self.m)
            .map(|i| {
                self.inner_draw(i, g.as_mut_slice());
                self.b.transpose() * &g * &self.c
            })
            .collect();
        let mut dense = DenseEnsemble::from_matrices(&matrices, self.inner_scale)?;
        dense.normalized = true;
        Ok(dense)
    }
}

impl SensingMap for FactorizedEnsemble {
    fn measurements(&self) -> usize {
        self.m
    }

    fn dimension(&self) -> usize {
        self.n
    }

    fn sense_raw(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        self.sense_inner(&self.compress(x)?)
    }

    fn adjoint(&self, v: &[f64]) -> Result<DenseMatrix> {
        Ok(self.b.transpose() * self.inner_adjoint(v)? * &self.c)
    }
}

/// Seed and shape of an ensemble; enough to rebuild it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnsembleSpec {
    Dense {
        n: usize,
        m: usize,
        seed: u64,
        normalized: bool,
    },
    Factorized {
        n: usize,
        m: usize,
        p: usize,
        seed: u64,
    },
}

impl EnsembleSpec {
    pub fn build(&self) -> Result<Ensemble> {
        Ok(match *self {
            EnsembleSpec::Dense {
                n,
                m,
                seed,
                normalized,
            } => Ensemble::Dense(make_dense_ensemble(n, m, seed, normalized)?),
            EnsembleSpec::Factorized { n, m, p, seed } => {
                Ensemble::Factorized(make_factorized_ensemble(n, m, p, seed)?)
            }
        })
    }
}

#[derive(Debug, Clone)]
pub enum Ensemble {
    Dense(DenseEnsemble),
    Factorized(FactorizedEnsemble),
}

impl SensingMap for Ensemble {
    fn measurements(&self) -> usize {
        match self {
            Ensemble::Dense(e) => e.measurements(),
            Ensemble::Factorized(e) => e.measurements(),
        }
    }

    fn dimension(&self) -> usize {
        match self {
            Ensemble::Dense(e) => e.dimension(),
            Ensemble::Factorized(e) => e.dimension(),
        }
    }

    fn sense_raw(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        match self {
            Ensemble::Dense(e) => e.sense_raw(x),
            Ensemble::Factorized(e) => e.sense_raw(x),
        }
    }

    fn adjoint(&self, v: &[f64]) -> Result<DenseMatrix> {
        match self {
            Ensemble::Dense(e) => e.adjoint(v),
            Ensemble::Factorized(e) => e.adjoint(v),
        }
    }
}

fn check_square(x: &DenseMatrix, n: usize) -> Result<()> {
    if x.shape() != (n, n) {
        return Err(Error::mismatch(
            format!("{n}x{n}"),
            format!("{}x{}", x.nrows(), x.ncols()),
        ));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
