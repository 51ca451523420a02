//! End-to-end orchestration: configuration, the parallel subsampling run,
//! curve fitting from stored records, and report files.
//!
//! Output layout under the output directory:
//!
//! ```text
//! <out>/<id>/plan.json         experiment manifest, written before any task
//! <out>/<id>/records.jsonl     one AccuracyRecord per line
//! <out>/<id>/curve.json        fit report
//! <out>/<id>/curve.csv         plot data
//! <out>/analysis.json          corpus analysis
//! <out>/table.json             recommendation table
//! ```

mod store;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, CorpusRow, RecommendationTable, StepwiseModel};
use crate::classifiers::{applicable_methods, best_accuracy, MethodConfig, MethodId, Problem, ALL_METHODS};
use crate::curves::{self, AccuracyRecord, CurvePoint, PowerLawCurve, StssCriteria};
use crate::dataset::{self, Characteristics, DesignMatrix, Schema};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sampling::{self, FoldAssignment, Task};

pub use store::{ResultStore, TaskKey};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub id: String,
    pub data: PathBuf,
    pub schema: PathBuf,
}

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetEntry>,
    pub base_seed: u64,
    pub folds: usize,
    pub reps: usize,
    pub methods: Vec<MethodId>,
    /// Confidence level of the per-size interval; derived from `t1` when
    /// absent.
    pub level: Option<f64>,
    pub t1: f64,
    pub t2: f64,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
    pub method_config: MethodConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            datasets: Vec::new(),
            base_seed: DEFAULT_SEED,
            folds: 10,
            reps: 10,
            methods: ALL_METHODS.to_vec(),
            level: None,
            t1: 0.9,
            t2: 0.05,
            out_dir: PathBuf::from("stss-out"),
            workers: None,
            method_config: MethodConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s)?;
        Ok(c)
    }

    /// Reads a config file; relative dataset paths resolve against the
    /// file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_json_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut c.datasets {
            if d.data.is_relative() {
                d.data = base.join(&d.data);
            }
            if d.schema.is_relative() {
                d.schema = base.join(&d.schema);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("folds must be >= 2"));
        }
        if self.reps < 1 {
            return Err(Error::invalid("reps must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one method is required"));
        }
        let criteria = StssCriteria {
            t1: self.t1,
            t2: self.t2,
            x_min: 1,
        };
        criteria.validate()?;
        if let Some(level) = self.level {
            if (level - criteria.interval_level()).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "level {level} is inconsistent with t1 = {} (expected {})",
                    self.t1,
                    criteria.interval_level()
                )));
            }
        }
        let mut ids: Vec<&str> = self.datasets.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("dataset ids must be unique"));
        }
        if let Some(bad) = ids.iter().find(|id| !valid_id(id)) {
            return Err(Error::invalid(format!(
                "dataset id {bad:?} must be non-empty and use only letters, digits, '-', '_' or '.'"
            )));
        }
        self.method_config.validate()
    }

    pub fn interval_level(&self) -> f64 {
        self.level.unwrap_or(1.0 - 2.0 * (1.0 - self.t1))
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            level: self.interval_level(),
            t1: self.t1,
            t2: self.t2,
        }
    }

    pub fn dataset_dir(&self, id: &str) -> PathBuf {
        self.out_dir.join(id)
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizeReport {
    pub dataset: String,
    pub rows_read: usize,
    pub characteristics: Characteristics,
    pub classes: Vec<String>,
    pub encoded_columns: Vec<String>,
}

/// Loads a dataset and computes its characteristics and encoding summary.
pub fn characterize_file(id: &str, data: &Path, schema: &Path) -> Result<CharacterizeReport> {
    let schema = Schema::from_path(schema)?;
    let mut raw = dataset::load_dataset(data, &schema)?;
    raw.id = id.to_string();
    let characteristics = dataset::characterize(&raw)?;
    let design = dataset::preprocess(&raw)?;
    Ok(CharacterizeReport {
        dataset: id.to_string(),
        rows_read: raw.rows.len(),
        characteristics,
        classes: design.class_names,
        encoded_columns: design.encoded_column_names,
    })
}

/// Everything that determines the records of a run. Stored next to the
/// records so a resumed run cannot silently mix configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanManifest {
    pub dataset: String,
    pub n: usize,
    pub folds: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub sizes: Vec<usize>,
    pub methods: Vec<MethodId>,
    pub method_config: MethodConfig,
    pub characteristics: Characteristics,
    pub classes: Vec<String>,
}

impl PlanManifest {
    pub fn path_for(dir: &Path) -> PathBuf {
        dir.join("plan.json")
    }

    pub fn expected_keys(&self) -> Vec<TaskKey> {
        let mut v = Vec::with_capacity(self.sizes.len() * self.folds * self.reps);
        for &s in &self.sizes {
            for f in 0..self.folds {
                for r in 0..self.reps {
                    v.push((s, f, r));
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub size: usize,
    pub fold: usize,
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dataset: String,
    pub tasks: usize,
    pub already_stored: usize,
    pub executed: usize,
    pub failures: Vec<TaskFailure>,
    pub methods: Vec<MethodId>,
}

struct Prepared {
    design: DesignMatrix,
    train_rows: Vec<Vec<usize>>,
    test: Vec<(Matrix, Vec<usize>)>,
}

impl Prepared {
    fn new(design: DesignMatrix, folds: &FoldAssignment) -> Self {
        let train_rows = (0..folds.k).map(|f| folds.train_rows(f)).collect();
        let test = (0..folds.k)
            .map(|f| {
                let rows = folds.test_rows(f);
                let y = rows.iter().map(|&i| design.labels[i]).collect();
                (design.features.select_rows(&rows), y)
            })
            .collect();
        Prepared {
            design,
            train_rows,
            test,
        }
    }
}

fn execute_task(
    dataset: &str,
    prep: &Prepared,
    task: &Task,
    methods: &[MethodId],
    config: &MethodConfig,
) -> Result<AccuracyRecord> {
    let idx = sampling::draw_subset(&prep.train_rows[task.fold], task.size, task.seed)?;
    let x = prep.design.features.select_rows(&idx);
    let y: Vec<usize> = idx.iter().map(|&i| prep.design.labels[i]).collect();
    let problem = Problem {
        x: &x,
        y: &y,
        n_classes: prep.design.n_classes(),
        source_features: prep.design.source_features,
    };
    let (tx, ty) = &prep.test[task.fold];
    let best = best_accuracy(problem, tx, ty, methods, config, task.seed)?;
    Ok(AccuracyRecord {
        dataset: dataset.to_string(),
        size: task.size,
        fold: task.fold,
        rep: task.rep,
        winning_method: best.winning_method,
        accuracy: best.accuracy,
        per_method: best.per_method.into_iter().collect(),
    })
}

/// Runs a task, converting panics to errors, and retries once.
fn execute_with_retry(
    dataset: &str,
    prep: &Prepared,
    task: &Task,
    methods: &[MethodId],
    config: &MethodConfig,
) -> std::result::Result<AccuracyRecord, String> {
    let attempt = || -> std::result::Result<AccuracyRecord, String> {
        match catch_unwind(AssertUnwindSafe(|| execute_task(dataset, prep, task, methods, config))) {
            Ok(Ok(r)) => Ok(r),
            Ok(Err(e)) => Err(e.to_string()),
            Err(p) => Err(p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "task panicked".into())),
        }
    };
    attempt().or_else(|_| attempt())
}

/// Progress callback: (tasks done, tasks total).
pub type Progress<'a> = &'a mut dyn FnMut(usize, usize);

/// Runs every not-yet-stored task of one dataset on `workers` threads.
/// Records are appended in plan order, so an interrupted and resumed run
/// leaves the same file as an uninterrupted one.
pub fn run_dataset(entry: &DatasetEntry, config: &RunConfig, workers: usize, progress: Progress<'_>) -> Result<RunSummary> {
    config.validate()?;
    let schema = Schema::from_path(&entry.schema)?;
    let mut raw = dataset::load_dataset(&entry.data, &schema)?;
    raw.id = entry.id.clone();
    let characteristics = dataset::characterize(&raw)?;
    let design = dataset::preprocess(&raw)?;
    let methods = applicable_methods(&characteristics, &config.methods);
    if methods.is_empty() {
        return Err(Error::invalid(format!("no requested method applies to {}", entry.id)));
    }
    let plan = sampling::plan_experiment(
        &entry.id,
        design.n_rows(),
        config.folds,
        config.reps,
        &methods,
        config.base_seed,
    )?;
    let folds = sampling::stratified_kfold(&design.labels, config.folds, plan.fold_seed)?;

    let dir = config.dataset_dir(&entry.id);
    let manifest = PlanManifest {
        dataset: entry.id.clone(),
        n: design.n_rows(),
        folds: config.folds,
        reps: config.reps,
        base_seed: config.base_seed,
        sizes: plan.grid.sizes.clone(),
        methods: methods.clone(),
        method_config: config.method_config.clone(),
        characteristics,
        classes: design.class_names.clone(),
    };
    let manifest_path = PlanManifest::path_for(&dir);
    if manifest_path.exists() {
        let existing: PlanManifest = read_json(&manifest_path)?;
        if existing != manifest {
            return Err(Error::invalid(format!(
                "{} was produced with a different configuration; use a fresh output directory",
                dir.display()
            )));
        }
    } else {
        write_json(&manifest_path, &manifest)?;
    }

    let mut store = ResultStore::open(&dir, &entry.id)?;
    let pending: Vec<Task> = plan
        .tasks
        .iter()
        .filter(|t| !store.contains((t.size, t.fold, t.rep)))
        .copied()
        .collect();
    let total = plan.tasks.len();
    let already_stored = total - pending.len();
    let prep = Prepared::new(design, &folds);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Task(format!("cannot start worker pool: {e}")))?;
    let chunk = workers.max(1) * 4;
    let mut failures = Vec::new();
    let mut done = already_stored;
    progress(done, total);
    for batch in pending.chunks(chunk) {
        let results: Vec<_> = pool.install(|| {
            batch
                .par_iter()
                .map(|t| execute_with_retry(&entry.id, &prep, t, &methods, &config.method_config))
                .collect()
        });
        for (task, res) in batch.iter().zip(results) {
            match res {
                Ok(r) => {
                    store.append(r)?;
                }
                Err(message) => failures.push(TaskFailure {
                    size: task.size,
                    fold: task.fold,
                    rep: task.rep,
                    message,
                }),
            }
        }
        done += batch.len();
        progress(done, total);
    }
    Ok(RunSummary {
        dataset: entry.id.clone(),
        tasks: total,
        already_stored,
        executed: pending.len() - failures.len(),
        failures,
        methods,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub level: f64,
    pub t1: f64,
    pub t2: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        RunConfig::default().fit_settings()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    /// The lower curve never comes within `t2` of the asymptote.
    Unreachable,
    /// Flat-exponent curve with positive scale.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPoint {
    pub size: usize,
    pub n_samples: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub fitted_lower: f64,
    pub fitted_mean: f64,
    pub wins: BTreeMap<MethodId, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub dataset: String,
    pub status: FitStatus,
    pub message: Option<String>,
    pub level: f64,
    pub t1: f64,
    pub t2: f64,
    pub x_min: usize,
    pub records: usize,
    pub points: Vec<ReportPoint>,
    pub lower_curve: PowerLawCurve,
    pub mean_curve: PowerLawCurve,
    pub f_inf: f64,
    pub stss: Option<u64>,
    pub clamped: Option<bool>,
    pub analytic_value: Option<f64>,
    pub characteristics: Option<Characteristics>,
}

impl CurveReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("size,mean,lower,upper,fitted_lower,fitted_mean\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.size, p.mean, p.lower, p.upper, p.fitted_lower, p.fitted_mean
            ));
        }
        s
    }

    pub fn corpus_row(&self) -> Option<CorpusRow> {
        Some(CorpusRow {
            id: self.dataset.clone(),
            characteristics: self.characteristics.clone()?,
            stss: self.stss?,
        })
    }
}

/// Fits both curves and computes the sufficient size from a record set.
pub fn fit_records(
    dataset: &str,
    records: &[AccuracyRecord],
    settings: &FitSettings,
    characteristics: Option<Characteristics>,
) -> Result<CurveReport> {
    let points: Vec<CurvePoint> = curves::empirical_curve(records, settings.level)?;
    let lower = curves::fit_lower_curve(&points)?;
    let mean = curves::fit_mean_curve(&points)?;
    let f_inf = mean.alpha;
    let x_min = points[0].size;
    let criteria = StssCriteria::new(settings.t1, settings.t2, x_min)?;

    let mut wins: BTreeMap<usize, BTreeMap<MethodId, usize>> = BTreeMap::new();
    for r in records {
        *wins.entry(r.size).or_default().entry(r.winning_method).or_default() += 1;
    }
    let report_points = points
        .iter()
        .map(|p| ReportPoint {
            size: p.size,
            n_samples: p.n_samples,
            mean: p.mean,
            lower: p.lower,
            upper: p.upper,
            fitted_lower: lower.evaluate(p.size as f64),
            fitted_mean: mean.evaluate(p.size as f64),
            wins: wins.remove(&p.size).unwrap_or_default(),
        })
        .collect();

    let (status, message, stss) = match curves::compute_stss(&lower, f_inf, &criteria) {
        Ok(r) => (FitStatus::Ok, None, Some(r)),
        Err(e @ Error::Unreachable { .. }) => (FitStatus::Unreachable, Some(e.to_string()), None),
        Err(e @ Error::DegenerateCurve) => (FitStatus::Degenerate, Some(e.to_string()), None),
        Err(e) => return Err(e),
    };
    Ok(CurveReport {
        dataset: dataset.to_string(),
        status,
        message,
        level: settings.level,
        t1: settings.t1,
        t2: settings.t2,
        x_min,
        records: records.len(),
        points: report_points,
        lower_curve: lower,
        mean_curve: mean,
        f_inf,
        stss: stss.map(|r| r.stss),
        clamped: stss.map(|r| r.clamped),
        analytic_value: stss.map(|r| r.analytic_value),
        characteristics,
    })
}

/// Fits a dataset from its stored run, refusing incomplete stores, and
/// writes `curve.json` and `curve.csv`.
pub fn fit_dataset(out_dir: &Path, id: &str, settings: &FitSettings) -> Result<CurveReport> {
    let dir = out_dir.join(id);
    let manifest_path = PlanManifest::path_for(&dir);
    if !manifest_path.exists() {
        return Err(Error::invalid(format!("no run found for {id} in {}", out_dir.display())));
    }
    let manifest: PlanManifest = read_json(&manifest_path)?;
    let store = ResultStore::open(&dir, id)?;
    let missing = store.missing(manifest.expected_keys());
    if !missing.is_empty() {
        return Err(Error::IncompleteStore { missing });
    }
    let report = fit_records(id, &store.records(), settings, Some(manifest.characteristics))?;
    write_json(&dir.join("curve.json"), &report)?;
    let csv_path = dir.join("curve.csv");
    fs::write(&csv_path, report.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    Ok(report)
}

/// Corpus rows from every `curve.json` with a computed size under `out_dir`.
pub fn corpus_from_reports(out_dir: &Path) -> Result<Vec<CorpusRow>> {
    let mut rows = Vec::new();
    let entries = fs::read_dir(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    dirs.sort();
    for d in dirs {
        let p = d.join("curve.json");
        if p.is_file() {
            let report: CurveReport = read_json(&p)?;
            if let Some(row) = report.corpus_row() {
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Smallest corpus on which the stepwise regression is attempted.
pub const MIN_STEPWISE_ROWS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub datasets: Vec<String>,
    pub candidates: Vec<String>,
    pub stepwise: Option<StepwiseModel>,
    pub stepwise_note: Option<String>,
    pub groups: RecommendationTable,
}

pub fn analyze(corpus: &[CorpusRow], p_enter: f64, p_remove: f64) -> Result<AnalysisReport> {
    let groups = analysis::build_groups(corpus, None, None)?;
    let (stepwise, stepwise_note) = if corpus.len() < MIN_STEPWISE_ROWS {
        (
            None,
            Some(format!(
                "stepwise regression skipped: {} dataset(s), need at least {MIN_STEPWISE_ROWS}",
                corpus.len()
            )),
        )
    } else {
        (Some(analysis::corpus_stepwise(corpus, p_enter, p_remove)?), None)
    };
    Ok(AnalysisReport {
        datasets: corpus.iter().map(|r| r.id.clone()).collect(),
        candidates: analysis::CANDIDATE_FEATURES.iter().map(|s| s.to_string()).collect(),
        stepwise,
        stepwise_note,
        groups,
    })
}

/// Runs [`analyze`] and writes `analysis.json` and `table.json`.
pub fn analyze_to_dir(corpus: &[CorpusRow], p_enter: f64, p_remove: f64, out_dir: &Path) -> Result<AnalysisReport> {
    let report = analyze(corpus, p_enter, p_remove)?;
    write_json(&out_dir.join("analysis.json"), &report)?;
    write_json(&out_dir.join("table.json"), &report.groups)?;
    Ok(report)
}

pub fn load_table(path: &Path) -> Result<RecommendationTable> {
    read_json(path)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}
