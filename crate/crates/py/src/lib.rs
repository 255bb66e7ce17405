//! Python bindings for the `icot` crate.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use icot::dataset::{load_labeled_csv, LoadOptions};
use icot::oracle::{build_mio_model, check_feasibility, enumerate_optimal, write_lp};
use icot::report::{render_paths, render_table, run_methods, Method};
use icot::{Assignment, ClusterTree, Criterion, IcotError, SearchConfig, SyntheticShape};

fn to_py(err: IcotError) -> PyErr {
    match err {
        IcotError::Usage(_) | IcotError::Validation(_) | IcotError::Parse { .. } => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn criterion(name: &str) -> PyResult<Criterion> {
    name.parse().map_err(to_py)
}

/// Normalized, distance-indexed observations.
#[pyclass(name = "Dataset", module = "icot_py", frozen)]
pub struct PyDataset {
    inner: icot::Dataset,
    truth: Option<Vec<usize>>,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (rows, names=None))]
    fn new(rows: Vec<Vec<f64>>, names: Option<Vec<String>>) -> PyResult<Self> {
        let inner = match names {
            Some(names) => icot::Dataset::from_named_rows(names, &rows),
            None => icot::Dataset::from_rows(&rows),
        }
        .map_err(to_py)?;
        Ok(PyDataset { inner, truth: None })
    }

    /// Loads a CSV file; a `class` column (or `label_col`) becomes the truth labels.
    #[staticmethod]
    #[pyo3(signature = (path, label_col=None))]
    fn from_csv(path: &str, label_col: Option<String>) -> PyResult<Self> {
        let options = LoadOptions {
            label_column: label_col,
            ..LoadOptions::default()
        };
        let (inner, truth) = load_labeled_csv(path, &options).map_err(to_py)?;
        Ok(PyDataset { inner, truth })
    }

    /// Synthetic benchmark data with truth labels.
    #[staticmethod]
    #[pyo3(signature = (shape, n=400, seed=42))]
    fn generate(shape: &str, n: usize, seed: u64) -> PyResult<Self> {
        let shape: SyntheticShape = shape.parse().map_err(to_py)?;
        let labeled = icot::generate_synthetic(shape, n, seed).map_err(to_py)?;
        Ok(PyDataset {
            inner: labeled.data,
            truth: Some(labeled.truth),
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn truth(&self) -> Option<Vec<usize>> {
        self.truth.clone()
    }

    /// Encoded rows in [0, 1].
    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().to_vec()
    }

    /// Scores a labelling of the observations.
    fn score(&self, labels: Vec<usize>, criterion: &str) -> PyResult<f64> {
        let assignment = Assignment::from_labels(&labels).map_err(to_py)?;
        icot::evaluate_assignment(self::criterion(criterion)?, self.inner.distances(), &assignment)
            .map(|s| s.value)
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={})", self.inner.n(), self.inner.p())
    }
}

/// A clustering tree.
#[pyclass(name = "Tree", module = "icot_py", frozen)]
pub struct PyTree {
    inner: ClusterTree,
}

#[pymethods]
impl PyTree {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ClusterTree::from_json(text).map(|inner| PyTree { inner }).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json(None, None)
    }

    #[getter]
    fn leaf_count(&self) -> usize {
        self.inner.leaf_count()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    /// Cluster id of every observation.
    fn labels(&self, data: &PyDataset) -> PyResult<Vec<usize>> {
        self.inner.labels(&data.inner).map_err(to_py)
    }

    /// Cluster id of one encoded observation.
    fn route(&self, x: Vec<f64>) -> PyResult<usize> {
        self.inner.route(&x).map_err(to_py)
    }

    /// One line per leaf with its decision path in original units.
    fn describe(&self, data: &PyDataset) -> PyResult<String> {
        render_paths(&self.inner, &data.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Tree(leaves={}, depth={})", self.inner.leaf_count(), self.inner.depth())
    }
}

/// Result of [`fit`].
#[pyclass(name = "FitResult", module = "icot_py", frozen)]
pub struct PyFitResult {
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    labels: Vec<usize>,
    #[pyo3(get)]
    restart_objectives: Vec<f64>,
    tree: ClusterTree,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn tree(&self) -> PyTree {
        PyTree { inner: self.tree.clone() }
    }
}

/// Fits a clustering tree by multi-start local search.
#[pyfunction]
#[pyo3(signature = (data, criterion="silhouette", max_depth=4, min_bucket=2, restarts=10, seed=42))]
fn fit(
    py: Python<'_>,
    data: &PyDataset,
    criterion: &str,
    max_depth: usize,
    min_bucket: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<PyFitResult> {
    let config = SearchConfig {
        criterion: self::criterion(criterion)?,
        max_depth,
        min_bucket,
        restarts,
        seed,
        ..SearchConfig::default()
    };
    let result = py.detach(|| icot::fit(&data.inner, &config)).map_err(to_py)?;
    Ok(PyFitResult {
        objective: result.score.value,
        labels: result.assignment.cluster_of().to_vec(),
        restart_objectives: result.trace.restarts.iter().map(|r| r.final_objective).collect(),
        tree: result.tree,
    })
}

/// K-Means labels for `k` clusters.
#[pyfunction]
#[pyo3(signature = (data, k, seed=42))]
fn kmeans(py: Python<'_>, data: &PyDataset, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    let result = py
        .detach(|| icot::kmeans(&data.inner, &icot::KMeansConfig::new(k, seed)))
        .map_err(to_py)?;
    Ok(result.labels.cluster_of().to_vec())
}

/// Best tree by exhaustive enumeration; only for tiny instances.
#[pyfunction]
#[pyo3(signature = (data, criterion="silhouette", max_depth=2, min_bucket=1))]
fn enumerate_best(data: &PyDataset, criterion: &str, max_depth: usize, min_bucket: usize) -> PyResult<(PyTree, f64)> {
    let (tree, score) =
        enumerate_optimal(&data.inner, self::criterion(criterion)?, max_depth, min_bucket).map_err(to_py)?;
    Ok((PyTree { inner: tree }, score.value))
}

/// LP-format text of the mixed-integer model.
#[pyfunction]
#[pyo3(signature = (data, depth=2, min_bucket=1, big_m=None))]
fn mio_lp(data: &PyDataset, depth: usize, min_bucket: usize, big_m: Option<f64>) -> PyResult<String> {
    let model = build_mio_model(&data.inner, depth, min_bucket, big_m).map_err(to_py)?;
    Ok(write_lp(&model))
}

/// Number of model rows a tree violates, and whether the model's Silhouette
/// matches the metric.
#[pyfunction]
#[pyo3(signature = (data, tree, depth, min_bucket=1))]
fn check_tree(data: &PyDataset, tree: &PyTree, depth: usize, min_bucket: usize) -> PyResult<(usize, bool)> {
    let model = build_mio_model(&data.inner, depth, min_bucket, None).map_err(to_py)?;
    let report = check_feasibility(&model, &tree.inner, &data.inner).map_err(to_py)?;
    Ok((report.violations.len(), report.silhouette_agrees()))
}

/// Comparison table of ICOT, K-Means, the two-step tree and the truth labels.
#[pyfunction]
#[pyo3(signature = (data, criterion="silhouette", max_depth=4, min_bucket=2, restarts=10, seed=42))]
fn benchmark(
    py: Python<'_>,
    data: &PyDataset,
    criterion: &str,
    max_depth: usize,
    min_bucket: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<String> {
    let config = SearchConfig {
        criterion: self::criterion(criterion)?,
        max_depth,
        min_bucket,
        restarts,
        seed,
        ..SearchConfig::default()
    };
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| *m != Method::Truth || data.truth.is_some())
        .collect();
    let outcome = py
        .detach(|| run_methods(&data.inner, data.truth.as_deref(), &methods, &config))
        .map_err(to_py)?;
    Ok(render_table(&outcome.rows))
}

#[pymodule]
fn icot_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTree>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_best, m)?)?;
    m.add_function(wrap_pyfunction!(mio_lp, m)?)?;
    m.add_function(wrap_pyfunction!(check_tree, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    Ok(())
}
