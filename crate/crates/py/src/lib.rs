//! Python bindings: problems, datasets, solvers, training and evaluation.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use softpo_core::datagen::{self, CsvSchema, GenConfig, PredictionDataset, Split};
use softpo_core::penalty::{self, RowDistribution, SamplingProtocol};
use softpo_core::predictor::MlpModel;
use softpo_core::problem::ProblemFile;
use softpo_core::solver::{self, SolveReport, SolverOptions};
use softpo_core::training::{self, Task, TrainConfig};
use softpo_core::{surrogate, unify, Error, ProblemInstance, Vector};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Validation { .. } | Error::Dimension { .. } | Error::Csv { .. } | Error::Json(_) | Error::Degenerate(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn json_config<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    match text {
        Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(format!("invalid config: {e}"))),
        None => Ok(T::default()),
    }
}

fn report_tuple(r: SolveReport) -> (Vec<f64>, f64, String) {
    (r.x_opt.iter().copied().collect(), r.objective, format!("{:?}", r.status))
}

#[pyclass(name = "Problem", module = "softpo", from_py_object)]
#[derive(Clone)]
struct PyProblem {
    inner: ProblemInstance,
}

#[pymethods]
impl PyProblem {
    /// Parses the JSON problem layout written by `softpo datagen`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let inner = ProblemInstance::try_from(file).map_err(to_py)?;
        inner.validate_shapes().map_err(to_py)?;
        Ok(PyProblem { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&ProblemFile::from(self.inner.clone())).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family.to_string()
    }

    #[getter]
    fn target_len(&self) -> usize {
        self.inner.target_len()
    }

    fn target_params(&self) -> Vec<f64> {
        self.inner.target_params().iter().copied().collect()
    }

    /// Copy with the predicted parameter block replaced.
    fn with_target_params(&self, params: Vec<f64>) -> PyResult<Self> {
        let inner = self.inner.with_target_params(&Vector::from_vec(params)).map_err(to_py)?;
        Ok(PyProblem { inner })
    }

    fn true_objective(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.true_objective(&Vector::from_vec(x)).map_err(to_py)
    }

    fn feasibility_violation(&self, x: Vec<f64>) -> f64 {
        self.inner.feasibility_violation(&Vector::from_vec(x))
    }

    fn regret(&self, x_hat: Vec<f64>, x_star: Vec<f64>) -> PyResult<f64> {
        let r = self.inner.regret(&Vector::from_vec(x_hat), &Vector::from_vec(x_star)).map_err(to_py)?;
        Ok(r.value)
    }

    /// Solves the original problem; returns `(x, objective, status)`.
    #[pyo3(signature = (tol = 1e-8))]
    fn solve(&self, tol: f64) -> PyResult<(Vec<f64>, f64, String)> {
        solver::solve_original(&self.inner, &SolverOptions::with_tol(tol)).map(report_tuple).map_err(to_py)
    }

    /// Maximizes the smoothed surrogate with multiplier `beta` and sharpness `k`.
    #[pyo3(signature = (beta, k, tol = 1e-8))]
    fn solve_surrogate(&self, beta: f64, k: f64, tol: f64) -> PyResult<(Vec<f64>, f64, String)> {
        let uf = unify(&self.inner, beta).map_err(to_py)?;
        let (r, _) = solver::solve_surrogate(&uf, &self.inner, k, &SolverOptions::with_tol(tol)).map_err(to_py)?;
        Ok(report_tuple(r))
    }

    /// Empirical penalty multiplier `k·E` with `E` from this instance.
    #[pyo3(signature = (k = 10.0))]
    fn empirical_beta(&self, k: f64) -> PyResult<f64> {
        penalty::empirical_beta(&self.inner, penalty::default_gradient_bound(&self.inner), k, 0).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(family={}, n={}, m1={}, m2={}, m3={})",
            self.inner.family,
            self.inner.n,
            self.inner.m1(),
            self.inner.m2(),
            self.inner.m3()
        )
    }
}

#[pyclass(name = "Dataset", module = "softpo", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: PredictionDataset,
}

#[pymethods]
impl PyDataset {
    /// Split labels default to 50/25/25 in order when `split` is omitted.
    #[new]
    #[pyo3(signature = (features, labels, split = None))]
    fn new(features: Vec<Vec<f64>>, labels: Vec<Vec<f64>>, split: Option<Vec<String>>) -> PyResult<Self> {
        let split = match split {
            Some(s) => s.iter().map(|v| parse::<Split>(v)).collect::<PyResult<_>>()?,
            None => datagen::default_split(features.len()),
        };
        let inner = PredictionDataset::new(
            features.into_iter().map(Vector::from_vec).collect(),
            labels.into_iter().map(Vector::from_vec).collect(),
            split,
        )
        .map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        let inner = datagen::load_csv_dataset(&path, CsvSchema::default()).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        datagen::write_csv_dataset(&path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.features.iter().map(|v| v.iter().copied().collect()).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<Vec<f64>> {
        self.inner.labels.iter().map(|v| v.iter().copied().collect()).collect()
    }

    #[getter]
    fn split(&self) -> Vec<String> {
        self.inner.split.iter().map(|s| s.as_str().to_string()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Model", module = "softpo", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: MlpModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: MlpModel::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    fn predict(&self, features: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = self.inner.predict(&Vector::from_vec(features)).map_err(to_py)?;
        Ok(p.iter().copied().collect())
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
}

/// Generates `(problem, dataset)` from a JSON generator config (defaults
/// when omitted).
#[pyfunction]
#[pyo3(signature = (config = None))]
fn generate(config: Option<&str>) -> PyResult<(PyProblem, PyDataset)> {
    let cfg: GenConfig = json_config(config)?;
    cfg.validate().map_err(to_py)?;
    let (p, d) = datagen::generate(&cfg).map_err(to_py)?;
    Ok((PyProblem { inner: p }, PyDataset { inner: d }))
}

/// Trains a predictor with a JSON training config. Returns the best model and
/// the per-epoch history as dictionaries.
#[pyfunction]
#[pyo3(signature = (problem, dataset, config = None))]
fn train<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    dataset: &PyDataset,
    config: Option<&str>,
) -> PyResult<(PyModel, Vec<Bound<'py, PyDict>>)> {
    let cfg: TrainConfig = json_config(config)?;
    let task = Task::new(dataset.inner.clone(), problem.inner.clone(), cfg.solver_tol).map_err(to_py)?;
    let outcome = training::train(&task, &cfg).map_err(to_py)?;
    let mut history = Vec::with_capacity(outcome.history.len());
    for h in &outcome.history {
        let d = PyDict::new(py);
        d.set_item("epoch", h.epoch)?;
        d.set_item("train_obj", h.train_obj)?;
        d.set_item("valid_regret", h.valid_regret)?;
        d.set_item("test_regret", h.test_regret)?;
        d.set_item("mse", h.mse)?;
        history.push(d);
    }
    Ok((PyModel { inner: outcome.model }, history))
}

/// Mean regret, its standard deviation and prediction MSE on one split. With
/// `model=None` the true labels are used as predictions.
#[pyfunction]
#[pyo3(signature = (problem, dataset, model = None, split = "test", tol = 1e-8))]
fn evaluate<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    dataset: &PyDataset,
    model: Option<&PyModel>,
    split: &str,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let split: Split = parse(split)?;
    let task = Task::new(dataset.inner.clone(), problem.inner.clone(), tol).map_err(to_py)?;
    let r = match model {
        Some(m) => training::evaluate(&m.inner, &task, split, tol),
        None => training::evaluate_with(&task, split, tol, |i| Ok(task.dataset.labels[i].clone())),
    }
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean_regret", r.mean_regret)?;
    d.set_item("std_regret", r.std_regret)?;
    d.set_item("mean_mse", r.mean_mse)?;
    d.set_item("regrets", r.regrets)?;
    d.set_item("max_violation", r.max_violation)?;
    d.set_item("solver_failures", r.solver_failures)?;
    Ok(d)
}

#[pyfunction]
fn s_value(z: f64, k: f64) -> f64 {
    surrogate::s_value(z, k)
}

#[pyfunction]
fn s_grad(z: f64, k: f64) -> f64 {
    surrogate::s_grad(z, k)
}

/// One-tailed paired t-test of `a − b > 0`; returns `(t, p, df)`. Raises
/// `ValueError` when the differences have zero variance.
#[pyfunction]
fn paired_ttest(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let t = training::paired_ttest(&a, &b).map_err(to_py)?;
    Ok((t.t, t.p, t.df))
}

/// Mean and maximum top eigenvalue over `trials` random constraint sets.
#[pyfunction]
#[pyo3(signature = (n, trials, seed = 0, distribution = "uniform01", protocol = "unit-rows"))]
fn lambda_max(n: usize, trials: usize, seed: u64, distribution: &str, protocol: &str) -> PyResult<(f64, f64)> {
    let dist: RowDistribution = parse(distribution)?;
    let protocol: SamplingProtocol = parse(protocol)?;
    let s = penalty::estimate_lambda_max(n, dist, trials, seed, protocol).map_err(to_py)?;
    Ok((s.mean, s.max))
}

#[pymodule]
fn softpo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(s_value, m)?)?;
    m.add_function(wrap_pyfunction!(s_grad, m)?)?;
    m.add_function(wrap_pyfunction!(paired_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_max, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
