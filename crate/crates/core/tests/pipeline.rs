mod common;

use std::fs;
use std::path::Path;

use stss_core::analysis::{reference_corpus, CorpusRow};
use stss_core::classifiers::MethodId;
use stss_core::curves::evaluate_curve;
use stss_core::pipeline::{
    analyze, analyze_to_dir, fit_dataset, fit_records, run_dataset, DatasetEntry, FitSettings, FitStatus,
    ResultStore, RunConfig,
};
use stss_core::sampling::size_grid;
use stss_core::Error;

fn small_config(out: &Path, data: &Path, schema: &Path) -> (DatasetEntry, RunConfig) {
    let entry = DatasetEntry {
        id: "SYN".into(),
        data: data.to_path_buf(),
        schema: schema.to_path_buf(),
    };
    let config = RunConfig {
        datasets: vec![entry.clone()],
        folds: 2,
        reps: 1,
        methods: vec![MethodId::Logistic, MethodId::NaiveBayes],
        out_dir: out.to_path_buf(),
        ..RunConfig::default()
    };
    (entry, config)
}

fn run(entry: &DatasetEntry, config: &RunConfig, workers: usize) {
    let summary = run_dataset(entry, config, workers, &mut |_, _| {}).unwrap();
    assert!(summary.failures.is_empty(), "{:?}", summary.failures);
}

#[test]
fn record_count_is_grid_times_folds_times_reps() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = common::write_synthetic_dataset(tmp.path(), 100, 1);
    let (entry, config) = small_config(&tmp.path().join("out"), &data, &schema);
    run(&entry, &config, 1);
    let store = ResultStore::open(&config.dataset_dir("SYN"), "SYN").unwrap();
    assert_eq!(store.len(), size_grid(100).unwrap().len() * 2);

    let report = fit_dataset(&config.out_dir, "SYN", &config.fit_settings()).unwrap();
    let csv = fs::read_to_string(config.dataset_dir("SYN").join("curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + size_grid(100).unwrap().len());
    assert_eq!(csv.lines().next().unwrap(), "size,mean,lower,upper,fitted_lower,fitted_mean");
    assert_eq!(report.points.len(), size_grid(100).unwrap().len());
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = common::write_synthetic_dataset(tmp.path(), 120, 2);
    let (entry, full) = small_config(&tmp.path().join("full"), &data, &schema);
    run(&entry, &full, 2);
    let (_, partial) = small_config(&tmp.path().join("partial"), &data, &schema);
    run(&entry, &partial, 2);

    // simulate a crash mid-write: keep 7 records and half of the 8th
    let path = ResultStore::path_for(&partial.dataset_dir("SYN"));
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut cut = lines[..7].join("\n");
    cut.push('\n');
    cut.push_str(&lines[7][..lines[7].len() / 2]);
    fs::write(&path, cut).unwrap();

    let summary = run_dataset(&entry, &partial, 2, &mut |_, _| {}).unwrap();
    assert_eq!(summary.already_stored, 7);
    assert_eq!(
        fs::read(ResultStore::path_for(&full.dataset_dir("SYN"))).unwrap(),
        fs::read(&path).unwrap()
    );
    // a second resume has nothing to do
    let again = run_dataset(&entry, &partial, 1, &mut |_, _| {}).unwrap();
    assert_eq!(again.executed, 0);
}

#[test]
fn output_is_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = common::write_synthetic_dataset(tmp.path(), 90, 3);
    let mut outputs = Vec::new();
    for workers in [1, 3] {
        let (entry, mut config) = small_config(&tmp.path().join(format!("w{workers}")), &data, &schema);
        config.methods = stss_core::classifiers::ALL_METHODS.to_vec();
        run(&entry, &config, workers);
        fit_dataset(&config.out_dir, "SYN", &config.fit_settings()).unwrap();
        let dir = config.dataset_dir("SYN");
        outputs.push((
            fs::read(dir.join("records.jsonl")).unwrap(),
            fs::read(dir.join("curve.json")).unwrap(),
        ));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn changed_configuration_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = common::write_synthetic_dataset(tmp.path(), 60, 4);
    let (entry, mut config) = small_config(&tmp.path().join("out"), &data, &schema);
    run(&entry, &config, 1);
    config.base_seed = 99;
    assert!(run_dataset(&entry, &config, 1, &mut |_, _| {}).is_err());
}

#[test]
fn incomplete_store_is_refused_with_missing_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = common::write_synthetic_dataset(tmp.path(), 60, 5);
    let (entry, config) = small_config(&tmp.path().join("out"), &data, &schema);
    run(&entry, &config, 1);
    let path = ResultStore::path_for(&config.dataset_dir("SYN"));
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().skip(2).collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();

    let x_min = size_grid(60).unwrap().x_min();
    match fit_dataset(&config.out_dir, "SYN", &config.fit_settings()) {
        Err(Error::IncompleteStore { missing }) => {
            assert_eq!(missing, vec![(x_min, 0, 0), (x_min, 1, 0)]);
        }
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn noiseless_reference_curve_gives_size_100() {
    let mut records = Vec::new();
    for size in [10, 50, 100, 500, 1000, 5000] {
        let v = evaluate_curve(0.9, 0.5, -0.5, size as f64);
        records.extend(common::records_from_values("REF", size, &[v; 100]));
    }
    let report = fit_records("REF", &records, &FitSettings::default(), None).unwrap();
    assert_eq!(report.status, FitStatus::Ok);
    assert!((report.f_inf - 0.9).abs() < 1e-6);
    assert_eq!(report.stss, Some(100));
    assert_eq!(report.clamped, Some(false));
}

#[test]
fn constant_accuracy_gives_smallest_size() {
    let mut records = Vec::new();
    for size in [34, 68, 137, 273] {
        records.extend(common::records_from_values("FLAT", size, &[0.95; 100]));
    }
    let report = fit_records("FLAT", &records, &FitSettings::default(), None).unwrap();
    assert_eq!(report.stss, Some(34));
    assert_eq!(report.clamped, Some(true));
}

#[test]
fn fitted_lower_curve_stays_below_mean_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = common::write_synthetic_dataset(tmp.path(), 200, 6);
    let (entry, mut config) = small_config(&tmp.path().join("out"), &data, &schema);
    config.reps = 5;
    run(&entry, &config, 1);
    let report = fit_dataset(&config.out_dir, "SYN", &config.fit_settings()).unwrap();
    let tol = 2.0 * (report.lower_curve.mae + report.mean_curve.mae);
    for p in &report.points {
        assert!(p.fitted_lower <= p.fitted_mean + tol, "{p:?}");
        assert!(p.lower <= p.mean && p.mean <= p.upper);
    }
}

#[test]
fn report_fields_are_stable() {
    let mut records = Vec::new();
    for size in [10, 50, 100, 500] {
        let v = evaluate_curve(0.9, 0.5, -0.5, size as f64);
        records.extend(common::records_from_values("REF", size, &[v; 10]));
    }
    let report = fit_records("REF", &records, &FitSettings::default(), None).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    let mut want = vec![
        "dataset",
        "status",
        "message",
        "level",
        "t1",
        "t2",
        "x_min",
        "records",
        "points",
        "lower_curve",
        "mean_curve",
        "f_inf",
        "stss",
        "clamped",
        "analytic_value",
        "characteristics",
    ];
    want.sort_unstable();
    let mut keys = keys;
    keys.sort_unstable();
    assert_eq!(keys, want);
    let curve_keys: Vec<String> = json["lower_curve"].as_object().unwrap().keys().cloned().collect();
    for k in ["alpha", "beta", "gamma", "mae", "sse"] {
        assert!(curve_keys.iter().any(|c| c == k), "{k}");
    }
    let point_keys: Vec<String> = json["points"][0].as_object().unwrap().keys().cloned().collect();
    for k in ["size", "mean", "lower", "upper", "fitted_lower", "fitted_mean"] {
        assert!(point_keys.iter().any(|c| c == k), "{k}");
    }
}

#[test]
fn shipped_corpus_analysis() {
    let tmp = tempfile::tempdir().unwrap();
    let report = analyze_to_dir(&reference_corpus(), 0.05, 0.05, tmp.path()).unwrap();
    let model = report.stepwise.unwrap();
    let signs: Vec<(String, bool)> = model
        .selected
        .iter()
        .map(|f| (f.name.clone(), f.coefficient > 0.0))
        .collect();
    assert!(signs.contains(&("N_C".into(), true)));
    assert!(signs.contains(&("N_F".into(), false)));
    let recs: Vec<Option<u64>> = report.groups.cells.iter().map(|c| c.recommended).collect();
    assert_eq!(recs, vec![Some(3000), Some(3000), Some(30000), Some(10000)]);
    assert!(tmp.path().join("analysis.json").is_file());
    assert!(tmp.path().join("table.json").is_file());
}

#[test]
fn identical_rows_fill_a_single_cell() {
    let row = reference_corpus().into_iter().find(|r| r.id == "BCW").unwrap();
    let corpus: Vec<CorpusRow> = (0..4)
        .map(|i| CorpusRow {
            id: format!("D{i}"),
            ..row.clone()
        })
        .collect();
    let report = analyze(&corpus, 0.05, 0.05).unwrap();
    assert!(report.stepwise.is_none());
    let filled: Vec<_> = report.groups.cells.iter().filter(|c| c.count() > 0).collect();
    assert_eq!(filled.len(), 1);
    assert_eq!(filled[0].count(), 4);
    assert_eq!(filled[0].recommended, Some(100));
}

#[test]
fn config_rejects_unknown_fields_and_resolves_paths() {
    assert!(RunConfig::from_json_str(r#"{"foldz": 3}"#).is_err());
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("cfg.json");
    fs::write(&p, r#"{"datasets": [{"id": "A", "data": "a.csv", "schema": "a.json"}], "reps": 3}"#).unwrap();
    let c = RunConfig::from_path(&p).unwrap();
    assert_eq!(c.reps, 3);
    assert_eq!(c.folds, 10);
    assert_eq!(c.datasets[0].data, tmp.path().join("a.csv"));
    c.validate().unwrap();
    let bad = RunConfig {
        t1: 1.5,
        ..RunConfig::default()
    };
    assert!(bad.validate().is_err());
}
