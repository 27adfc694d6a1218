use bilr::experiment::{
    fit_decay_slope, read_csv, run_experiment, write_csv, ErrorColumn, ExperimentConfig,
    ExperimentRecord, RunOptions, Statistic, CSV_HEADER,
};
use bilr::Error;

fn smoke() -> ExperimentConfig {
    ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/smoke.json").as_ref()).unwrap()
}

fn csv_bytes(records: &[ExperimentRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).unwrap();
    buf
}

fn synthetic(errors: impl Fn(f64) -> f64) -> Vec<ExperimentRecord> {
    [100usize, 400, 1600, 6400]
        .iter()
        .flat_map(|&m| {
            (0..3).map(move |trial| (m, trial))
        })
        .map(|(m, trial)| ExperimentRecord {
            m,
            trial,
            seed: 0,
            error_raw: errors(m as f64),
            error_unit: errors(m as f64),
            hamming_consistency_frac: 0.0,
            wall_time_ms: 0,
        })
        .collect()
}

#[test]
fn same_config_same_bytes() {
    let cfg = smoke();
    let a = csv_bytes(&run_experiment(&cfg, RunOptions::default()).unwrap());
    let b = csv_bytes(&run_experiment(&cfg, RunOptions { jobs: 2, record_timing: false }).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert!(!text.contains('\r'));
}

#[test]
fn records_are_bounded_and_sorted() {
    let records = run_experiment(&smoke(), RunOptions::default()).unwrap();
    assert_eq!(records.len(), 6);
    let keys: Vec<_> = records.iter().map(|r| (r.m, r.trial)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for r in &records {
        assert!(r.error_raw >= 0.0 && r.error_unit >= 0.0);
        assert!((0.0..=1.0).contains(&r.hamming_consistency_frac));
    }
}

#[test]
fn extra_trials_leave_existing_records_alone() {
    let cfg = smoke();
    let base = run_experiment(&cfg, RunOptions::default()).unwrap();
    let mut wider = cfg.clone();
    wider.trials_per_m += 2;
    wider.m_grid.push(800);
    let more = run_experiment(&wider, RunOptions::default()).unwrap();
    for r in &base {
        assert!(more.contains(r));
    }
}

#[test]
fn single_trial_single_record() {
    let mut cfg = smoke();
    cfg.m_grid = vec![100];
    cfg.trials_per_m = 1;
    assert_eq!(run_experiment(&cfg, RunOptions::default()).unwrap().len(), 1);
}

#[test]
fn csv_round_trip() {
    let records = run_experiment(&smoke(), RunOptions::default()).unwrap();
    let back = read_csv(csv_bytes(&records).as_slice()).unwrap();
    assert_eq!(back, records);
}

#[test]
fn fit_recovers_exact_power_law() {
    let fit = fit_decay_slope(&synthetic(|m| 3.0 * m.powf(-0.25)), Statistic::Median, ErrorColumn::Unit).unwrap();
    assert!((fit.slope + 0.25).abs() < 1e-10);
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
    let flat = fit_decay_slope(&synthetic(|_| 0.4), Statistic::Mean, ErrorColumn::Raw).unwrap();
    assert!(flat.slope.abs() < 1e-12);
}

#[test]
fn fit_needs_two_grid_points() {
    let records: Vec<_> = synthetic(|m| 1.0 / m).into_iter().filter(|r| r.m == 100).collect();
    assert!(matches!(
        fit_decay_slope(&records, Statistic::Median, ErrorColumn::Unit),
        Err(Error::DegenerateGrid(_))
    ));
}

#[test]
fn config_rejects_unknown_keys_and_bad_grids() {
    let good = r#"{"scheme":"pbp","n":5,"s":2,"r":1,"m_grid":[10,20],"trials_per_m":1,"master_seed":1}"#;
    assert!(ExperimentConfig::from_json(good).is_ok());
    let typo = good.replace("master_seed", "master_sead");
    assert!(matches!(ExperimentConfig::from_json(&typo), Err(Error::InvalidConfig(_))));
    let unsorted = good.replace("[10,20]", "[20,10]");
    assert!(ExperimentConfig::from_json(&unsorted).is_err());
    let no_p = good.replace("\"pbp\"", "\"multistep\"");
    assert!(ExperimentConfig::from_json(&no_p).is_err());
}

#[test]
fn missing_config_is_io_error() {
    let err = ExperimentConfig::load("/nonexistent/cfg.json".as_ref()).unwrap_err();
    assert!(err.is_io());
    assert!(err.to_string().contains("/nonexistent/cfg.json"));
}
