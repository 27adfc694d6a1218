//! Seeded Monte-Carlo sweeps over the measurement count, result tables and
//! log–log decay fits.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, generate_bilr, nonzero_rows, svd};
use crate::recovery::{
    recover_multistep_from_backprojection, recover_pbp, rescale_to_unit, PbpProjection, RecoveryOutput,
    Scheme,
};
use crate::rng;
use crate::sensing::{make_dense_ensemble, make_factorized_ensemble, SensingMap};

pub const CSV_HEADER: &str = "m,trial,seed,error_raw,error_unit,hamming_consistency_frac,wall_time_ms";

/// Sweeps used when projected back projection exceeds the exhaustive ceiling
/// and the config opts into the heuristic.
pub const HEURISTIC_SWEEPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMode {
    Raw,
    UnitNormalized,
    #[default]
    Both,
}

impl ErrorMode {
    /// Column used for summaries and fits.
    pub fn primary_column(self) -> ErrorColumn {
        match self {
            ErrorMode::Raw => ErrorColumn::Raw,
            ErrorMode::UnitNormalized | ErrorMode::Both => ErrorColumn::Unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub s: usize,
    pub r: usize,
    pub m_grid: Vec<usize>,
    /// Inner dimension of the factorized ensemble; multistep only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub trials_per_m: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub error_mode: ErrorMode,
    /// Lets projected back projection fall back to the heuristic projection
    /// above the exhaustive ceiling.
    #[serde(default)]
    pub allow_heuristic_projection: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.r == 0 || self.r > self.s || self.s > self.n {
            return bad(format!(
                "need 1 <= r <= s <= n, got n = {}, s = {}, r = {}",
                self.n, self.s, self.r
            ));
        }
        if self.m_grid.is_empty() || self.m_grid[0] == 0 {
            return bad("m_grid must be nonempty with positive entries".into());
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("m_grid must be strictly increasing".into());
        }
        if self.trials_per_m == 0 {
            return bad("trials_per_m must be at least 1".into());
        }
        match (self.scheme, self.p) {
            (Scheme::Multistep, None) => bad("multistep requires p".into()),
            (Scheme::Multistep, Some(0)) => bad("p must be positive".into()),
            (Scheme::Pbp, Some(_)) => bad("p only applies to the multistep scheme".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    pub error_raw: f64,
    pub error_unit: f64,
    pub hamming_consistency_frac: f64,
    pub wall_time_ms: u64,
}

/// Structure of the estimate produced in one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimateShape {
    pub nonzero_rows: usize,
    pub nonzero_cols: usize,
    /// Singular values above `1e-10 · σ₁`.
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: ExperimentRecord,
    pub shape: EstimateShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    /// Fill `wall_time_ms`. Off by default so output bytes depend only on
    /// the config.
    pub record_timing: bool,
}

/// Seed of trial `trial` at grid point `m`: `derive_seed(master, [m, trial])`.
pub fn child_seed(master_seed: u64, m: usize, trial: usize) -> u64 {
    rng::derive_seed(master_seed, &[m as u64, trial as u64])
}

pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<Vec<ExperimentRecord>> {
    Ok(run_experiment_detailed(config, options)?
        .into_iter()
        .map(|o| o.record)
        .collect())
}

/// Runs every `(m, trial)` pair; results sorted by `(m, trial)`.
pub fn run_experiment_detailed(config: &ExperimentConfig, options: RunOptions) -> Result<Vec<TrialOutcome>> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = config
        .m_grid
        .iter()
        .flat_map(|&m| (0..config.trials_per_m).map(move |t| (m, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let mut outcomes = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, t)| run_trial(config, m, t, options.record_timing))
            .collect::<Result<Vec<_>>>()
    })?;
    outcomes.sort_by_key(|o| (o.record.m, o.record.trial));
    Ok(outcomes)
}

/// One trial: draw signal and ensemble from the child seed, sense, recover.
pub fn run_trial(config: &ExperimentConfig, m: usize, trial: usize, record_timing: bool) -> Result<TrialOutcome> {
    let start = Instant::now();
    let seed = child_seed(config.master_seed, m, trial);
    let (n, s, r) = (config.n, config.s, config.r);
    let x = generate_bilr(n, s, r, rng::derive_seed(seed, &[0]))?.to_dense();
    let ensemble_seed = rng::derive_seed(seed, &[1]);

    let (out, hamming): (RecoveryOutput, usize) = match config.scheme {
        Scheme::Pbp => {
            let ensemble = make_dense_ensemble(n, m, ensemble_seed, true)?;
            let y = ensemble.measure(&x)?;
            let projection = if config.allow_heuristic_projection {
                PbpProjection::AllowHeuristic {
                    sweeps: HEURISTIC_SWEEPS,
                }
            } else {
                PbpProjection::Exhaustive
            };
            let out = recover_pbp(&y, &ensemble, s, r, projection)?;
            let hamming = out.metadata.consistency_hamming.unwrap_or_default();
            (out, hamming)
        }
        Scheme::Multistep => {
            let p = config
                .p
                .ok_or_else(|| Error::InvalidConfig("multistep requires p".into()))?;
            let ensemble = make_factorized_ensemble(n, m, p, ensemble_seed)?;
            let (y, backprojection) = ensemble.sense_and_backproject(&x)?;
            let out = recover_multistep_from_backprojection(backprojection, &ensemble, s, r)?;
            let hamming = y.hamming(&ensemble.measure(&out.estimate)?)?;
            (out, hamming)
        }
    };

    let estimate = &out.estimate;
    let shape = EstimateShape {
        nonzero_rows: nonzero_rows(estimate).len(),
        nonzero_cols: nonzero_rows(&estimate.transpose()).len(),
        rank: svd(estimate)?.numerical_rank(),
    };
    let error_raw = out.error_against(&x)?;
    let error_unit = match rescale_to_unit(out) {
        Ok(unit) => unit.error_against(&x)?,
        // a zero estimate has no direction; its error is ‖X‖ = 1 either way
        Err(Error::ZeroEstimate) => frobenius_norm(&x),
        Err(e) => return Err(e),
    };
    let wall_time_ms = if record_timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(TrialOutcome {
        record: ExperimentRecord {
            m,
            trial,
            seed,
            error_raw,
            error_unit,
            hamming_consistency_frac: hamming as f64 / m as f64,
            wall_time_ms,
        },
        shape,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Median,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorColumn {
    Raw,
    Unit,
}

impl ErrorColumn {
    fn pick(self, record: &ExperimentRecord) -> f64 {
        match self {
            ErrorColumn::Raw => record.error_raw,
            ErrorColumn::Unit => record.error_unit,
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Per-`m` statistic of the chosen error column, in increasing `m`.
pub fn error_statistics(records: &[ExperimentRecord], statistic: Statistic, column: ErrorColumn) -> Vec<(usize, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for rec in records {
        groups.entry(rec.m).or_default().push(column.pick(rec));
    }
    groups
        .into_iter()
        .map(|(m, mut v)| {
            let value = match statistic {
                Statistic::Median => median(&mut v),
                Statistic::Mean => v.iter().sum::<f64>() / v.len() as f64,
            };
            (m, value)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares fit of `ln(statistic)` against `ln m`.
pub fn fit_decay_slope(records: &[ExperimentRecord], statistic: Statistic, column: ErrorColumn) -> Result<DecayFit> {
    let points = error_statistics(records, statistic, column);
    if points.len() < 2 {
        return Err(Error::DegenerateGrid(format!(
            "need at least 2 distinct m values, got {}",
            points.len()
        )));
    }
    if let Some(&(m, v)) = points.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateGrid(format!(
            "statistic at m = {m} is {v}; a log-log fit needs positive values"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|&(m, _)| (m as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / k;
    let y_mean = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit {
        slope,
        intercept: y_mean - slope * x_mean,
    })
}

fn float17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with the fixed header, LF line endings, floats at 17 significant digits.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.m,
            r.trial,
            r.seed,
            float17(r.error_raw),
            float17(r.error_unit),
            float17(r.hamming_consistency_frac),
            r.wall_time_ms
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(records: &[ExperimentRecord], mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, records)?;
    writeln!(out)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected header `{header}`")));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}
