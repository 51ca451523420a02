//! Python bindings. Reports come back as plain dicts and lists.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

use stss_core::analysis;
use stss_core::classifiers::{MethodId, ALL_METHODS};
use stss_core::curves::{self, AccuracyRecord, BoundKind, StssCriteria};
use stss_core::pipeline::{self, DatasetEntry, FitSettings, RunConfig};
use stss_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Task(_) | Error::IncompleteStore { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any(),
            (None, Some(i)) => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn parse_methods(names: Option<Vec<String>>) -> PyResult<Vec<MethodId>> {
    match names {
        None => Ok(ALL_METHODS.to_vec()),
        Some(v) => v.iter().map(|s| s.parse().map_err(py_err)).collect(),
    }
}

/// Fitted `alpha - beta * x**gamma`.
#[pyclass(name = "PowerLawCurve", frozen, from_py_object)]
#[derive(Clone)]
struct PyCurve {
    inner: curves::PowerLawCurve,
}

#[pymethods]
impl PyCurve {
    #[new]
    fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        PyCurve {
            inner: curves::PowerLawCurve {
                alpha,
                beta,
                gamma,
                mae: 0.0,
                sse: 0.0,
                bound_kind: BoundKind::Lower,
                converged: true,
            },
        }
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn mae(&self) -> f64 {
        self.inner.mae
    }

    #[getter]
    fn sse(&self) -> f64 {
        self.inner.sse
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    fn evaluate(&self, x: f64) -> f64 {
        self.inner.evaluate(x)
    }

    fn __repr__(&self) -> String {
        format!(
            "PowerLawCurve(alpha={}, beta={}, gamma={})",
            self.inner.alpha, self.inner.beta, self.inner.gamma
        )
    }
}

#[pyclass(name = "StssResult", frozen, get_all)]
struct PyStss {
    stss: u64,
    clamped: bool,
    f_inf: f64,
    analytic_value: f64,
}

#[pymethods]
impl PyStss {
    fn __repr__(&self) -> String {
        format!("StssResult(stss={}, clamped={})", self.stss, self.clamped)
    }
}

/// Dataset characteristics as a dict with `characteristics`, `classes` and
/// `encoded_columns`.
#[pyfunction]
#[pyo3(signature = (data, schema, id=None))]
fn characterize<'py>(py: Python<'py>, data: PathBuf, schema: PathBuf, id: Option<String>) -> PyResult<Bound<'py, PyAny>> {
    let id = id.unwrap_or_else(|| data.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string());
    let report = pipeline::characterize_file(&id, &data, &schema).map_err(py_err)?;
    to_py(py, &report)
}

#[pyfunction]
fn size_grid(n: usize) -> PyResult<Vec<usize>> {
    Ok(stss_core::sampling::size_grid(n).map_err(py_err)?.sizes)
}

/// Fold index of every row.
#[pyfunction]
fn stratified_kfold(labels: Vec<usize>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(stss_core::sampling::stratified_kfold(&labels, k, seed).map_err(py_err)?.fold_of)
}

/// Fits `(size, target)` points; `y_max` defaults to the largest target.
#[pyfunction]
#[pyo3(signature = (points, y_max=None))]
fn fit_power_law(points: Vec<(f64, f64)>, y_max: Option<f64>) -> PyResult<PyCurve> {
    let y_max = y_max.unwrap_or_else(|| points.iter().map(|p| p.1).fold(0.0, f64::max));
    let inner = curves::fit_power_law(&points, y_max, BoundKind::Lower).map_err(py_err)?;
    Ok(PyCurve { inner })
}

#[pyfunction]
#[pyo3(signature = (curve, f_inf, t1=0.9, t2=0.05, x_min=1))]
fn compute_stss(curve: &PyCurve, f_inf: f64, t1: f64, t2: f64, x_min: usize) -> PyResult<PyStss> {
    let criteria = StssCriteria::new(t1, t2, x_min).map_err(py_err)?;
    let r = curves::compute_stss(&curve.inner, f_inf, &criteria).map_err(py_err)?;
    Ok(PyStss {
        stss: r.stss,
        clamped: r.clamped,
        f_inf: r.f_inf,
        analytic_value: r.analytic_value,
    })
}

/// Per-size mean and order-statistic bounds from `{size: [accuracy, ...]}`.
#[pyfunction]
#[pyo3(signature = (accuracies, level=0.8))]
fn empirical_curve<'py>(
    py: Python<'py>,
    accuracies: BTreeMap<usize, Vec<f64>>,
    level: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let mut records = Vec::new();
    for (size, values) in &accuracies {
        for (i, &a) in values.iter().enumerate() {
            records.push(AccuracyRecord {
                dataset: String::new(),
                size: *size,
                fold: 0,
                rep: i,
                winning_method: MethodId::Logistic,
                accuracy: a,
                per_method: BTreeMap::new(),
            });
        }
    }
    let points = curves::empirical_curve(&records, level).map_err(py_err)?;
    to_py(py, &points)
}

#[pyfunction]
fn round_up_half_order(x: f64) -> PyResult<f64> {
    analysis::round_up_half_order(x).map_err(py_err)
}

/// Recommended size; `table` is a path written by the analyze step.
#[pyfunction]
#[pyo3(signature = (classes, features, table=None))]
fn recommend(classes: usize, features: usize, table: Option<PathBuf>) -> PyResult<u64> {
    let table = match table {
        Some(p) => pipeline::load_table(&p).map_err(py_err)?,
        None => analysis::default_table(),
    };
    analysis::recommend(classes, features, &table).map_err(py_err)
}

/// Stepwise regression and groups over a corpus CSV (the built-in
/// reference corpus when omitted).
#[pyfunction]
#[pyo3(signature = (corpus=None, p_enter=0.05, p_remove=0.05))]
fn analyze<'py>(py: Python<'py>, corpus: Option<PathBuf>, p_enter: f64, p_remove: f64) -> PyResult<Bound<'py, PyAny>> {
    let rows = match corpus {
        Some(p) => analysis::load_corpus(&p).map_err(py_err)?,
        None => analysis::reference_corpus(),
    };
    let report = pipeline::analyze(&rows, p_enter, p_remove).map_err(py_err)?;
    to_py(py, &report)
}

/// Runs (or resumes) the subsampling experiment for one dataset under
/// `out/<id>/` and returns the run summary.
#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (data, schema, id, out, folds=10, reps=10, methods=None, seed=1, workers=1))]
fn run<'py>(
    py: Python<'py>,
    data: PathBuf,
    schema: PathBuf,
    id: String,
    out: PathBuf,
    folds: usize,
    reps: usize,
    methods: Option<Vec<String>>,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let entry = DatasetEntry { id, data, schema };
    let config = RunConfig {
        datasets: vec![entry.clone()],
        base_seed: seed,
        folds,
        reps,
        methods: parse_methods(methods)?,
        out_dir: out,
        ..RunConfig::default()
    };
    let summary = py
        .detach(|| pipeline::run_dataset(&entry, &config, workers, &mut |_, _| {}))
        .map_err(py_err)?;
    to_py(py, &summary)
}

/// Fits the stored run of `id` under `out` and returns the curve report.
#[pyfunction]
#[pyo3(signature = (out, id, t1=0.9, t2=0.05))]
fn fit<'py>(py: Python<'py>, out: PathBuf, id: String, t1: f64, t2: f64) -> PyResult<Bound<'py, PyAny>> {
    let criteria = StssCriteria::new(t1, t2, 1).map_err(py_err)?;
    let settings = FitSettings {
        level: criteria.interval_level(),
        t1,
        t2,
    };
    let report = py.detach(|| pipeline::fit_dataset(&out, &id, &settings)).map_err(py_err)?;
    to_py(py, &report)
}

#[pymodule]
fn stss(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCurve>()?;
    m.add_class::<PyStss>()?;
    m.add_function(wrap_pyfunction!(characterize, m)?)?;
    m.add_function(wrap_pyfunction!(size_grid, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_kfold, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(compute_stss, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_curve, m)?)?;
    m.add_function(wrap_pyfunction!(round_up_half_order, m)?)?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    Ok(())
}
