//! `bilr`: generate signals, sense, recover, audit and run Monte-Carlo sweeps.
//!
//! Exit codes: 0 success, 1 validation error (including usage errors), 2 I/O
//! error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bilr::diagnostics::{rip_audit_bilr, rip_audit_rank, rip_audit_sparse};
use bilr::experiment::{
    fit_decay_slope, read_csv, run_experiment, write_csv, write_json, ErrorColumn, ExperimentConfig,
    RunOptions, Statistic,
};
use bilr::rng::derive_seed;
use bilr::sensing::{Ensemble, EnsembleSpec};
use bilr::{
    generate_bilr, make_dense_ensemble, make_factorized_ensemble, recover_multistep, recover_pbp,
    rescale_to_unit, BilrMatrix, DenseMatrix, Error, PbpProjection, RecoveryOutput, SensingMap, SignVector,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "bilr", version, about = "One-bit sensing and recovery of low-rank bisparse matrices")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AuditKind {
    Bilr,
    Rank,
    Sparse,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit a random unit-norm low-rank bisparse matrix.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        r: usize,
    },
    /// One-bit measurements of a matrix produced by `generate`.
    Sense {
        /// Signal JSON from `generate`.
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        m: usize,
        /// Use a factorized ensemble with inner dimension p.
        #[arg(long)]
        p: Option<usize>,
        /// Dense ensemble without the √(π/2)/m scale.
        #[arg(long)]
        unnormalized: bool,
    },
    /// Recover a matrix from the output of `sense`.
    Recover {
        /// Measurements JSON from `sense`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        r: usize,
        /// Rescale the estimate to unit Frobenius norm.
        #[arg(long)]
        unit: bool,
        /// Fall back to the heuristic projection above the exhaustive ceiling.
        #[arg(long)]
        allow_heuristic: bool,
    },
    /// Randomized restricted-isometry audit.
    RipAudit {
        #[arg(long, value_enum, default_value_t = AuditKind::Bilr)]
        kind: AuditKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
    },
    /// Run a Monte-Carlo sweep described by --config.
    Experiment {
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Record per-trial wall time (output is then not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Fit log(error) against log(m) from an experiment CSV.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = StatArg::Median)]
        statistic: StatArg,
        #[arg(long, value_enum, default_value_t = ColumnArg::Unit)]
        error: ColumnArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatArg {
    Median,
    Mean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ColumnArg {
    Unit,
    Raw,
}

#[derive(Debug, Serialize, Deserialize)]
struct SignalFile {
    n: usize,
    s: usize,
    r: usize,
    row_support: Vec<usize>,
    col_support: Vec<usize>,
    left_factor: Vec<Vec<f64>>,
    right_factor: Vec<Vec<f64>>,
    dense: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasurementFile {
    ensemble: EnsembleSpec,
    bits: SignVector,
}

#[derive(Debug, Serialize)]
struct RecoveryFile {
    scheme: &'static str,
    s: usize,
    r: usize,
    unit_normalized: bool,
    heuristic_projection: bool,
    projection_residual: Option<f64>,
    consistency_hamming: Option<usize>,
    stage_norms: Vec<(&'static str, f64)>,
    row_support: Vec<usize>,
    col_support: Vec<usize>,
    estimate: Vec<Vec<f64>>,
}

enum Failure {
    Validation(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<DenseMatrix, Failure> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != ncols) {
        return Err(Failure::Validation(format!("{what} must be a nonempty rectangular array")));
    }
    Ok(DenseMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_failure(path, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock).map_err(|e| Failure::Io(format!("stdout: {e}")))
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn emit_matrix_csv(out: Option<&Path>, m: &DenseMatrix) -> Result<(), Failure> {
    emit(out, |w| {
        for row in rows(m) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Generate { n, s, r } => {
            let x = generate_bilr(n, s, r, cli.seed)?;
            match cli.format {
                Format::Csv => emit_matrix_csv(out, &x.to_dense()),
                Format::Json => emit_json(out, &signal_file(&x)),
            }
        }
        Command::Sense {
            signal,
            m,
            p,
            unnormalized,
        } => {
            let file: SignalFile = read_json(&signal)?;
            let x = from_rows(&file.dense, "dense")?;
            let spec = match p {
                Some(p) => make_factorized_ensemble(x.nrows(), m, p, cli.seed)?.spec(),
                None => EnsembleSpec::Dense {
                    n: x.nrows(),
                    m,
                    seed: cli.seed,
                    normalized: !unnormalized,
                },
            };
            let bits = spec.build()?.measure(&x)?;
            match cli.format {
                Format::Csv => emit(out, |w| {
                    writeln!(w, "i,bit")?;
                    for (i, b) in bits.bits().iter().enumerate() {
                        writeln!(w, "{i},{b}")?;
                    }
                    Ok(())
                }),
                Format::Json => emit_json(out, &MeasurementFile { ensemble: spec, bits }),
            }
        }
        Command::Recover {
            input,
            s,
            r,
            unit,
            allow_heuristic,
        } => {
            let file: MeasurementFile = read_json(&input)?;
            let recovered = match file.ensemble.build()? {
                Ensemble::Dense(e) => {
                    let projection = if allow_heuristic {
                        PbpProjection::AllowHeuristic { sweeps: 8 }
                    } else {
                        PbpProjection::Exhaustive
                    };
                    recover_pbp(&file.bits, &e, s, r, projection)?
                }
                Ensemble::Factorized(e) => recover_multistep(&file.bits, &e, s, r)?,
            };
            let recovered = if unit { rescale_to_unit(recovered)? } else { recovered };
            match cli.format {
                Format::Csv => emit_matrix_csv(out, &recovered.estimate),
                Format::Json => emit_json(out, &recovery_file(&recovered)),
            }
        }
        Command::RipAudit {
            kind,
            n,
            m,
            s,
            r,
            p,
            trials,
        } => {
            let audit_seed = derive_seed(cli.seed, &[1]);
            let need_p = || p.ok_or_else(|| Failure::Validation("--p is required for this audit".into()));
            let report = match kind {
                AuditKind::Bilr => {
                    let e = make_dense_ensemble(n, m, cli.seed, true)?;
                    rip_audit_bilr(&e, s, r, trials, audit_seed)?
                }
                AuditKind::Rank => {
                    let e = make_factorized_ensemble(n, m, need_p()?, cli.seed)?;
                    rip_audit_rank(&e, r, trials, audit_seed)?
                }
                AuditKind::Sparse => {
                    let e = make_factorized_ensemble(n, 1, need_p()?, cli.seed)?;
                    rip_audit_sparse(e.side_b(), s, trials, audit_seed)?
                }
            };
            emit_json(out, &report)
        }
        Command::Experiment { jobs, timing } => {
            let path = cli
                .config
                .ok_or_else(|| Failure::Validation("experiment requires --config <path>".into()))?;
            let config = ExperimentConfig::load(&path)?;
            let records = run_experiment(
                &config,
                RunOptions {
                    jobs,
                    record_timing: timing,
                },
            )?;
            let target = out.map(Path::to_path_buf).or(config.output_path.clone());
            match cli.format {
                Format::Csv => emit(target.as_deref(), |w| write_csv(&records, w)),
                Format::Json => emit(target.as_deref(), |w| write_json(&records, w)),
            }
        }
        Command::Fit {
            input,
            statistic,
            error,
        } => {
            let file = File::open(&input).map_err(|e| io_failure(&input, e))?;
            let records = read_csv(file)?;
            let statistic = match statistic {
                StatArg::Median => Statistic::Median,
                StatArg::Mean => Statistic::Mean,
            };
            let column = match error {
                ColumnArg::Unit => ErrorColumn::Unit,
                ColumnArg::Raw => ErrorColumn::Raw,
            };
            let fit = fit_decay_slope(&records, statistic, column)?;
            emit(out, |w| writeln!(w, "{}", serde_json::to_string(&fit)?))
        }
    }
}

fn signal_file(x: &BilrMatrix) -> SignalFile {
    SignalFile {
        n: x.n(),
        s: x.s(),
        r: x.r(),
        row_support: x.row_support().to_vec(),
        col_support: x.col_support().to_vec(),
        left_factor: rows(x.left_factor()),
        right_factor: rows(x.right_factor()),
        dense: rows(&x.to_dense()),
    }
}

fn recovery_file(out: &RecoveryOutput) -> RecoveryFile {
    let meta = &out.metadata;
    RecoveryFile {
        scheme: meta.scheme.name(),
        s: meta.s,
        r: meta.r,
        unit_normalized: meta.unit_normalized,
        heuristic_projection: meta.heuristic_projection,
        projection_residual: meta.projection_residual,
        consistency_hamming: meta.consistency_hamming,
        stage_norms: meta.stage_norms.clone(),
        row_support: out.estimate_structured.row_support().to_vec(),
        col_support: out.estimate_structured.col_support().to_vec(),
        estimate: rows(&out.estimate),
    }
}

fn cli_main(argv: Vec<OsString>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(cli_main(std::env::args_os().collect()))
}
