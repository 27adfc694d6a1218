//! Empirical checks of the isometry conditions and theory-side quantities:
//! randomized RIP audits, the polarized RIP inequality, inexact row
//! thresholding, the Hamming/angle local isometry, the entropy bound and a
//! consistent-pair search.

use std::f64::consts::PI;

use rand::seq::index;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{frobenius_inner, frobenius_norm, generate_bilr, nonzero_rows, DenseMatrix};
use crate::operators::{
    hard_threshold_rows, project_bilr_exhaustive, project_bilr_heuristic, EXHAUSTIVE_MAX_N,
    EXHAUSTIVE_MAX_S,
};
use crate::rng;
use crate::sensing::{DenseEnsemble, FactorizedEnsemble, SensingMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RipKind {
    /// `‖𝓐(Z)‖₁ / ‖Z‖_F` over low-rank bisparse `Z`.
    #[serde(rename = "l1-bilr")]
    L1Bilr,
    /// `‖𝓐′(Z)‖₁ / ‖Z‖_F` over low-rank `Z`.
    #[serde(rename = "l1-rank")]
    L1Rank,
    /// `‖Dz‖₂² / ‖z‖₂²` over sparse vectors.
    #[serde(rename = "l2-sparse-vector")]
    L2SparseVector,
}

pub const IMPLIED_DELTA_NOTE: &str =
    "implied_delta is an empirical lower bound on the restricted isometry constant";

/// Distortion statistics from a randomized restricted-isometry audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub samples: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_mean: f64,
    /// `max(1 − ratio_min, ratio_max − 1)`, clamped at zero.
    pub implied_delta: f64,
    pub property_kind: RipKind,
    pub note: String,
}

impl RipReport {
    pub fn from_ratios(property_kind: RipKind, ratios: &[f64]) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::InvalidInput("audit needs at least one trial".into()));
        }
        let ratio_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ratio_mean = (ratios.iter().sum::<f64>() / ratios.len() as f64).clamp(ratio_min, ratio_max);
        Ok(Self {
            samples: ratios.len(),
            ratio_min,
            ratio_max,
            ratio_mean,
            implied_delta: implied_delta(ratio_min, ratio_max),
            property_kind,
            note: IMPLIED_DELTA_NOTE.to_string(),
        })
    }
}

pub fn implied_delta(ratio_min: f64, ratio_max: f64) -> f64 {
    (1.0 - ratio_min).max(ratio_max - 1.0).max(0.0)
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Audits the ℓ₁/Frobenius isometry of a normalized dense ensemble over
/// `trials` random unit members of the `(s, r)` set.
pub fn rip_audit_bilr(
    ensemble: &DenseEnsemble,
    s: usize,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<RipReport> {
    if !ensemble.is_normalized() {
        return Err(Error::InvalidInput("RIP audit expects a normalized ensemble".into()));
    }
    let n = ensemble.dimension();
    let ratios = (0..trials)
        .map(|t| {
            let z = generate_bilr(n, s, r, rng::derive_seed(seed, &[t as u64]))?.to_dense();
            Ok(l1(&ensemble.sense_raw(&z)?) / frobenius_norm(&z))
        })
        .collect::<Result<Vec<f64>>>()?;
    RipReport::from_ratios(RipKind::L1Bilr, &ratios)
}

/// Audits the inner map `𝓐′` over random unit `p × p` matrices of rank `r`.
pub fn rip_audit_rank(ensemble: &FactorizedEnsemble, r: usize, trials: usize, seed: u64) -> Result<RipReport> {
    let p = ensemble.inner_dimension();
    let ratios = (0..trials)
        .map(|t| {
            let z = generate_bilr(p, p, r, rng::derive_seed(seed, &[t as u64]))?.to_dense();
            Ok(l1(&ensemble.sense_inner(&z)?) / frobenius_norm(&z))
        })
        .collect::<Result<Vec<f64>>>()?;
    RipReport::from_ratios(RipKind::L1Rank, &ratios)
}

/// Audits `‖Dz‖₂²/‖z‖₂²` over random unit vectors with `min(2s, n)` nonzeros.
pub fn rip_audit_sparse(d: &DenseMatrix, s: usize, trials: usize, seed: u64) -> Result<RipReport> {
    let n = d.ncols();
    if s == 0 || n == 0 {
        return Err(Error::InvalidShape("need s >= 1 and a nonempty matrix".into()));
    }
    let k = (2 * s).min(n);
    let mut values = vec![0.0; k];
    let ratios = (0..trials)
        .map(|t| {
            let mut rng = rng::stream(rng::derive_seed(seed, &[t as u64]));
            let support = index::sample(&mut rng, n, k).into_vec();
            rng::fill_standard_normal(&mut rng, &mut values);
            let mut z = nalgebra::DVector::zeros(n);
            for (&i, &v) in support.iter().zip(&values) {
                z[i] = v;
            }
            z /= z.norm();
            (d * &z).norm_squared() / z.norm_squared()
        })
        .collect::<Vec<f64>>();
    RipReport::from_ratios(RipKind::L2SparseVector, &ratios)
}

fn row_support_union(a: &DenseMatrix, b: &DenseMatrix) -> usize {
    let mut rows = nonzero_rows(a);
    rows.extend(nonzero_rows(b));
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

/// `|⟨(I − DᵀD)Z, Z′⟩_F| / (‖Z‖_F ‖Z′‖_F)` for `Z, Z′` whose row supports
/// together have at most `2s` rows.
pub fn polar_rip_check(d: &DenseMatrix, z: &DenseMatrix, z_prime: &DenseMatrix, s: usize) -> Result<f64> {
    if z.shape() != z_prime.shape() || z.nrows() != d.ncols() {
        return Err(Error::mismatch(
            format!("two {}xk matrices", d.ncols()),
            format!("{}x{} and {}x{}", z.nrows(), z.ncols(), z_prime.nrows(), z_prime.ncols()),
        ));
    }
    let combined = row_support_union(z, z_prime);
    if combined > 2 * s {
        return Err(Error::InvalidInput(format!(
            "combined row support {combined} exceeds 2s = {}",
            2 * s
        )));
    }
    let (nz, nz2) = (frobenius_norm(z), frobenius_norm(z_prime));
    if nz == 0.0 || nz2 == 0.0 {
        return Err(Error::InvalidInput("polarized check needs nonzero inputs".into()));
    }
    let defect = z - d.transpose() * (d * z);
    Ok(frobenius_inner(&defect, z_prime)?.abs() / (nz * nz2))
}

/// Both sides of the inexact row-thresholding bound
/// `‖Z − H_row(DᵀY)‖_F ≤ 2δ‖Z‖_F + 2√2‖E‖_F` with `Y = DZ + E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InexactThresholdCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl InexactThresholdCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

pub fn inexact_threshold_check(
    d: &DenseMatrix,
    z: &DenseMatrix,
    e: &DenseMatrix,
    s: usize,
    delta: f64,
) -> Result<InexactThresholdCheck> {
    if z.nrows() != d.ncols() || e.shape() != (d.nrows(), z.ncols()) {
        return Err(Error::mismatch(
            format!("Z {}xk and E {}xk", d.ncols(), d.nrows()),
            format!("Z {}x{} and E {}x{}", z.nrows(), z.ncols(), e.nrows(), e.ncols()),
        ));
    }
    if nonzero_rows(z).len() > s {
        return Err(Error::InvalidInput(format!("Z is not {s}-row-sparse")));
    }
    let y = d * z + e;
    let estimate = hard_threshold_rows(&(d.transpose() * y), s);
    Ok(InexactThresholdCheck {
        lhs: frobenius_norm(&(z - estimate)),
        rhs: 2.0 * delta * frobenius_norm(z) + 2.0 * 2f64.sqrt() * frobenius_norm(e),
    })
}

/// Normalized Hamming distance of the sign records against the normalized
/// angle between two unit signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalIsometry {
    pub hamming_frac: f64,
    pub angular: f64,
    pub gap: f64,
}

pub fn local_isometry_stat<E: SensingMap + ?Sized>(
    x: &DenseMatrix,
    x_prime: &DenseMatrix,
    ensemble: &E,
) -> Result<LocalIsometry> {
    for v in [x, x_prime] {
        if (frobenius_norm(v) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("local isometry expects unit-norm signals".into()));
        }
    }
    let y = ensemble.measure(x)?;
    let y_prime = ensemble.measure(x_prime)?;
    let hamming_frac = y.hamming(&y_prime)? as f64 / y.len() as f64;
    let angular = angle(x, x_prime)?;
    Ok(LocalIsometry {
        hamming_frac,
        angular,
        gap: (hamming_frac - angular).abs(),
    })
}

/// `arccos⟨X, X′⟩_F / π` for unit matrices.
fn angle(x: &DenseMatrix, x_prime: &DenseMatrix) -> Result<f64> {
    Ok(frobenius_inner(x, x_prime)?.clamp(-1.0, 1.0).acos() / PI)
}

/// Closed-form entropy bound `2s ln(en/s) + r(2s + 1) ln(9/η)`.
pub fn entropy_bound(n: usize, s: usize, r: usize, eta: f64) -> Result<f64> {
    if r == 0 || r > s || s > n {
        return Err(Error::InvalidShape(format!(
            "need 1 <= r <= s <= n, got n = {n}, s = {s}, r = {r}"
        )));
    }
    if !(eta > 0.0 && eta < 9.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 9), got {eta}")));
    }
    let (n, s, r) = (n as f64, s as f64, r as f64);
    Ok(2.0 * s * (std::f64::consts::E * n / s).ln() + r * (2.0 * s + 1.0) * (9.0 / eta).ln())
}

/// A pair of unit members with their sign disagreement and distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyProbe {
    pub x: DenseMatrix,
    pub x_prime: DenseMatrix,
    pub hamming: usize,
    pub frobenius_gap: f64,
    pub angular_gap: f64,
}

impl Serialize for ConsistencyProbe {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = |m: &DenseMatrix| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let mut st = serializer.serialize_struct("ConsistencyProbe", 4)?;
        st.serialize_field("pair", &(rows(&self.x), rows(&self.x_prime)))?;
        st.serialize_field("hamming", &self.hamming)?;
        st.serialize_field("frobenius_gap", &self.frobenius_gap)?;
        st.serialize_field("angular_gap", &self.angular_gap)?;
        st.end()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeOutcome {
    /// Farthest consistent pair found.
    pub worst: ConsistencyProbe,
    /// Largest distance between a consistent sample and the first sample found
    /// for the same sign record; the error of the "first consistent sample"
    /// decoder on the probe's sample set.
    pub first_sample_error: f64,
    pub consistent_samples: usize,
    pub evaluations: usize,
}

pub const PROBE_INITIAL_STEP: f64 = 0.3;
pub const PROBE_MIN_STEP: f64 = 1e-4;

/// Randomized search for far-apart consistent pairs.
///
/// Each restart draws a random unit member `X`, then hill-climbs a companion
/// `X′` away from `X`: propose `X′ + step·G` for a random unit direction `G`,
/// project onto the set, renormalize, and accept when the sign record is
/// unchanged and the distance to `X` grows. The step starts at 0.3, halves on
/// every rejection and the restart ends below 1e-4. `budget` counts sign
/// evaluations across all restarts. The result lower-bounds the worst
/// consistent distance for this ensemble.
pub fn consistency_width_probe<E: SensingMap + ?Sized>(
    n: usize,
    s: usize,
    r: usize,
    ensemble: &E,
    budget: usize,
    seed: u64,
) -> Result<ProbeOutcome> {
    if ensemble.dimension() != n {
        return Err(Error::mismatch(n, ensemble.dimension()));
    }
    let exhaustive = n <= EXHAUSTIVE_MAX_N && s <= EXHAUSTIVE_MAX_S;
    let project = |m: &DenseMatrix| -> Result<DenseMatrix> {
        let p = if exhaustive {
            project_bilr_exhaustive(m, s, r)?
        } else {
            project_bilr_heuristic(m, s, r, 8)?
        };
        Ok(p.matrix.to_dense())
    };

    let mut evaluations = 0;
    let mut consistent_samples = 0;
    let mut first_sample_error: f64 = 0.0;
    let mut worst: Option<(DenseMatrix, DenseMatrix, f64)> = None;
    let mut direction = DenseMatrix::zeros(n, n);
    let mut restart = 0u64;

    loop {
        let x = generate_bilr(n, s, r, rng::derive_seed(seed, &[0, restart]))?.to_dense();
        let y = ensemble.measure(&x)?;
        evaluations += 1;
        let mut rng = rng::stream(rng::derive_seed(seed, &[1, restart]));
        let mut group = vec![x.clone()];
        let mut current = x.clone();
        let mut current_gap = 0.0;
        let mut step = PROBE_INITIAL_STEP;

        while step >= PROBE_MIN_STEP && evaluations < budget {
            rng::fill_standard_normal(&mut rng, direction.as_mut_slice());
            let dn = frobenius_norm(&direction);
            let moved = project(&(&current + &direction * (step / dn)))?;
            let norm = frobenius_norm(&moved);
            evaluations += 1;
            if norm > 0.0 {
                let candidate = moved / norm;
                let gap = frobenius_norm(&(&candidate - &x));
                if gap > current_gap && ensemble.measure(&candidate)? == y {
                    current_gap = gap;
                    current = candidate.clone();
                    group.push(candidate);
                    continue;
                }
            }
            step /= 2.0;
        }

        consistent_samples += group.len();
        for g in &group {
            first_sample_error = first_sample_error.max(frobenius_norm(&(g - &group[0])));
        }
        for (i, a) in group.iter().enumerate() {
            for b in &group[i..] {
                let gap = frobenius_norm(&(a - b));
                if worst.as_ref().is_none_or(|w| gap > w.2) {
                    worst = Some((a.clone(), b.clone(), gap));
                }
            }
        }
        restart += 1;
        if evaluations >= budget {
            break;
        }
    }

    let (x, x_prime, frobenius_gap) = worst.expect("at least one restart");
    let hamming = ensemble.measure(&x)?.hamming(&ensemble.measure(&x_prime)?)?;
    let angular_gap = angle(&x, &x_prime)?;
    Ok(ProbeOutcome {
        worst: ConsistencyProbe {
            x,
            x_prime,
            hamming,
            frobenius_gap,
            angular_gap,
        },
        first_sample_error,
        consistent_samples,
        evaluations,
    })
}
