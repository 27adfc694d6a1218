//! Reconstruction from one-bit measurements: projected back projection for
//! dense ensembles and the multistep thresholding pipeline for factorized ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, BilrMatrix, DenseMatrix};
use crate::operators::{
    hard_threshold_cols, hard_threshold_rank, hard_threshold_rows, project_bilr_exhaustive,
    project_bilr_heuristic, Projection, EXHAUSTIVE_MAX_N, EXHAUSTIVE_MAX_S,
};
use crate::sensing::{DenseEnsemble, FactorizedEnsemble, SensingMap, SignVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Pbp,
    Multistep,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Pbp => "pbp",
            Scheme::Multistep => "multistep",
        }
    }
}

/// How projected back projection reaches the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbpProjection {
    /// Exhaustive search only; fails above the enumeration ceiling.
    Exhaustive,
    /// Exhaustive when within the ceiling, otherwise the alternating heuristic.
    AllowHeuristic { sweeps: usize },
}

/// Intermediate matrices of the multistep pipeline.
#[derive(Debug, Clone)]
pub struct MultistepStages {
    /// `𝓐′* y`, `p × p`.
    pub backprojection: DenseMatrix,
    /// `H_[r](𝓐′* y)`.
    pub rank_truncated: DenseMatrix,
    /// `H_row(Bᵀ H_[r](𝓐′* y))`, `n × p`.
    pub row_thresholded: DenseMatrix,
    /// `H_col(· C)` before factorization, `n × n`.
    pub output: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct RecoveryMetadata {
    pub scheme: Scheme,
    pub s: usize,
    pub r: usize,
    pub heuristic_projection: bool,
    pub projection_residual: Option<f64>,
    /// Hamming distance between `y` and the re-quantized estimate.
    pub consistency_hamming: Option<usize>,
    pub stage_norms: Vec<(&'static str, f64)>,
    pub stages: Option<MultistepStages>,
    pub unit_normalized: bool,
}

#[derive(Debug, Clone)]
pub struct RecoveryOutput {
    pub estimate: DenseMatrix,
    pub estimate_structured: BilrMatrix,
    pub metadata: RecoveryMetadata,
}

impl RecoveryOutput {
    fn from_structured(structured: BilrMatrix, metadata: RecoveryMetadata) -> Self {
        Self {
            estimate: structured.to_dense(),
            estimate_structured: structured,
            metadata,
        }
    }

    /// `‖X − X′‖_F` against the raw estimate.
    pub fn error_against(&self, truth: &DenseMatrix) -> Result<f64> {
        if truth.shape() != self.estimate.shape() {
            return Err(Error::mismatch(
                format!("{}x{}", self.estimate.nrows(), self.estimate.ncols()),
                format!("{}x{}", truth.nrows(), truth.ncols()),
            ));
        }
        Ok(frobenius_norm(&(truth - &self.estimate)))
    }
}

/// `X′ = 𝒫(𝓐* y)`.
pub fn recover_pbp(
    y: &SignVector,
    ensemble: &DenseEnsemble,
    s: usize,
    r: usize,
    projection: PbpProjection,
) -> Result<RecoveryOutput> {
    if !ensemble.is_normalized() {
        return Err(Error::InvalidInput(
            "projected back projection expects a normalized ensemble".into(),
        ));
    }
    let n = ensemble.dimension();
    let backprojection = ensemble.adjoint(&y.to_f64())?;
    let within_ceiling = n <= EXHAUSTIVE_MAX_N && s <= EXHAUSTIVE_MAX_S;
    let (Projection { matrix, residual }, heuristic) = match projection {
        _ if within_ceiling => (project_bilr_exhaustive(&backprojection, s, r)?, false),
        PbpProjection::AllowHeuristic { sweeps } => {
            (project_bilr_heuristic(&backprojection, s, r, sweeps)?, true)
        }
        PbpProjection::Exhaustive => {
            return Err(Error::DimensionTooLarge {
                n,
                s,
                max_n: EXHAUSTIVE_MAX_N,
                max_s: EXHAUSTIVE_MAX_S,
            })
        }
    };
    let mut out = RecoveryOutput::from_structured(
        matrix,
        RecoveryMetadata {
            scheme: Scheme::Pbp,
            s,
            r,
            heuristic_projection: heuristic,
            projection_residual: Some(residual),
            consistency_hamming: None,
            stage_norms: vec![("backprojection", frobenius_norm(&backprojection))],
            stages: None,
            unit_normalized: false,
        },
    );
    // logged, never enforced: the projection need not be consistent with y
    out.metadata.consistency_hamming = Some(y.hamming(&ensemble.measure(&out.estimate)?)?);
    out.metadata
        .stage_norms
        .push(("estimate", frobenius_norm(&out.estimate)));
    Ok(out)
}

/// `X′ = H_col{ H_row[ Bᵀ H_[r](𝓐′* y) ] C }`.
pub fn recover_multistep(
    y: &SignVector,
    ensemble: &FactorizedEnsemble,
    s: usize,
    r: usize,
) -> Result<RecoveryOutput> {
    let backprojection = ensemble.inner_adjoint(&y.to_f64())?;
    recover_multistep_from_backprojection(backprojection, ensemble, s, r)
}

/// The multistep pipeline starting from an already computed `𝓐′* y`, e.g.
/// from [`FactorizedEnsemble::sense_and_backproject`].
pub fn recover_multistep_from_backprojection(
    backprojection: DenseMatrix,
    ensemble: &FactorizedEnsemble,
    s: usize,
    r: usize,
) -> Result<RecoveryOutput> {
    let p = ensemble.inner_dimension();
    if backprojection.shape() != (p, p) {
        return Err(Error::mismatch(
            format!("{p}x{p}"),
            format!("{}x{}", backprojection.nrows(), backprojection.ncols()),
        ));
    }
    if r == 0 || r > s || s > ensemble.dimension() {
        return Err(Error::InvalidShape(format!(
            "need 1 <= r <= s <= n, got n = {}, s = {s}, r = {r}",
            ensemble.dimension()
        )));
    }
    let rank_truncated = hard_threshold_rank(&backprojection, r)?;
    let row_thresholded = hard_threshold_rows(&(ensemble.side_b().transpose() * &rank_truncated), s);
    let output = hard_threshold_cols(&(&row_thresholded * ensemble.side_c()), s);

    let structured = BilrMatrix::from_dense(&output, s, r)?;
    let stage_norms = vec![
        ("backprojection", frobenius_norm(&backprojection)),
        ("rank_truncated", frobenius_norm(&rank_truncated)),
        ("row_thresholded", frobenius_norm(&row_thresholded)),
        ("output", frobenius_norm(&output)),
    ];
    Ok(RecoveryOutput::from_structured(
        structured,
        RecoveryMetadata {
            scheme: Scheme::Multistep,
            s,
            r,
            heuristic_projection: false,
            projection_residual: None,
            consistency_hamming: None,
            stage_norms,
            stages: Some(MultistepStages {
                backprojection,
                rank_truncated,
                row_thresholded,
                output,
            }),
            unit_normalized: false,
        },
    ))
}

/// Divides the estimate by its Frobenius norm.
pub fn rescale_to_unit(out: RecoveryOutput) -> Result<RecoveryOutput> {
    let norm = frobenius_norm(&out.estimate);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroEstimate);
    }
    let mut metadata = out.metadata;
    metadata.unit_normalized = true;
    Ok(RecoveryOutput::from_structured(
        out.estimate_structured.scaled(1.0 / norm),
        metadata,
    ))
}
