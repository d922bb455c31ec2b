//! Python bindings: graphs, feature construction, the spectral and PageRank
//! solvers, GraphSAGE inference and whole benchmark trials.

use std::path::PathBuf;

use nodefeat::bench::{run_graph_trial, run_node_trial, Manifest, TrialConfig, TrialResult};
use nodefeat::datasets::{load_node_dataset, load_tudataset_full};
use nodefeat::features::{build_features, FeatureKind, FeatureSpec, NumericSettings};
use nodefeat::gnn::{Aggregator, ModelConfig, Pass, Readout, SageModel};
use nodefeat::numerics::{pagerank as pagerank_impl, top_k_eigs, EigenSettings, PageRankSettings};
use nodefeat::{DenseMatrix, Error, Graph, Rng};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

/// Undirected simple graph; self-loops are dropped and repeated edges merged.
#[pyclass(name = "Graph", module = "nodefeat", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (num_nodes, edges = Vec::new()))]
    fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        let inner = Graph::from_edge_list(num_nodes, &edges).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.degrees()
    }

    fn neighbors(&self, v: usize) -> PyResult<Vec<usize>> {
        Ok(self.inner.neighbors(v).map_err(to_py)?.to_vec())
    }

    /// Component id of every node, numbered in order of first appearance.
    fn components(&self) -> Vec<usize> {
        self.inner.components()
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn __len__(&self) -> usize {
        self.inner.num_nodes()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(num_nodes={}, num_edges={})",
            self.inner.num_nodes(),
            self.inner.num_edges()
        )
    }
}

/// Feature matrix of one artificial kind as a list of rows. `dim` is the
/// width of the width-parameterized kinds (`k` for eigen); `seed` only
/// affects `random` and `deepwalk`.
#[pyfunction]
#[pyo3(signature = (graph, kind, dim = 16, seed = 0))]
fn features(
    py: Python<'_>,
    graph: &PyGraph,
    kind: &str,
    dim: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let kind: FeatureKind = parse(kind)?;
    let spec = FeatureSpec::with_defaults(kind, dim).reseeded(seed);
    let g = &graph.inner;
    let m = py
        .detach(|| build_features(g, &spec, &NumericSettings::default()))
        .map_err(to_py)?;
    Ok(rows(&m.values))
}

#[pyfunction]
#[pyo3(signature = (graph, damping = 0.85, tol = 1e-10))]
fn pagerank(graph: &PyGraph, damping: f64, tol: f64) -> PyResult<Vec<f64>> {
    let settings = PageRankSettings {
        damping,
        tol,
        ..Default::default()
    };
    pagerank_impl(&graph.inner, settings).map_err(to_py)
}

/// Top `k` eigenpairs of the normalized adjacency: descending eigenvalues
/// and an `n x k` list of rows holding the eigenvectors as columns.
#[pyfunction]
fn eigenpairs(graph: &PyGraph, k: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let op = graph.inner.normalized_adjacency();
    let e = top_k_eigs(&op, k, EigenSettings::default()).map_err(to_py)?;
    Ok((e.values, rows(&e.vectors)))
}

/// Node dataset directory: graph, labels (`None` for unlabeled nodes) and
/// the optional real feature rows.
#[pyfunction]
fn load_node(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyDict>> {
    let ds = load_node_dataset(&path).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("name", &ds.name)?;
    d.set_item("num_classes", ds.labels.num_classes())?;
    d.set_item("labels", ds.labels.as_slice().to_vec())?;
    d.set_item(
        "features",
        ds.real_features.as_ref().map(|f| rows(&f.values)),
    )?;
    d.set_item("graph", PyGraph { inner: ds.graph })?;
    Ok(d.unbind())
}

/// TU dataset as `(graphs, labels)`; labels are remapped to `0..C`.
#[pyfunction]
fn load_tu(path: PathBuf, name: &str) -> PyResult<(Vec<PyGraph>, Vec<usize>)> {
    let ds = load_tudataset_full(&path, name).map_err(to_py)?;
    let labels = ds.collection.labels().to_vec();
    let graphs = ds
        .collection
        .graphs()
        .iter()
        .map(|g| PyGraph { inner: g.clone() })
        .collect();
    Ok((graphs, labels))
}

/// GraphSAGE classifier with freshly initialized weights.
#[pyclass(name = "SageModel", module = "nodefeat")]
struct PySageModel {
    inner: SageModel,
}

#[pymethods]
impl PySageModel {
    #[new]
    #[pyo3(signature = (in_dim, num_classes, aggregator = "mean", readout = "none", layers = 2, hidden = 64, seed = 0))]
    fn new(
        in_dim: usize,
        num_classes: usize,
        aggregator: &str,
        readout: &str,
        layers: usize,
        hidden: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let config = ModelConfig {
            aggregator: parse::<Aggregator>(aggregator)?,
            readout: parse::<Readout>(readout)?,
            num_layers: layers,
            hidden_dim: hidden,
            ..ModelConfig::node_defaults()
        };
        let inner =
            SageModel::new(in_dim, num_classes, config, &mut Rng::new(seed)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.inner.num_parameters()
    }

    /// Logits per node.
    fn forward_node(&self, graph: &PyGraph, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = DenseMatrix::from_rows(&x).map_err(to_py)?;
        let logits = self
            .inner
            .forward_node(&graph.inner, &x, Pass::Eval)
            .map_err(to_py)?;
        Ok(rows(&logits))
    }

    /// Logits of the whole graph; needs a mean or sum readout.
    fn forward_graph(&self, graph: &PyGraph, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = DenseMatrix::from_rows(&x).map_err(to_py)?;
        self.inner
            .forward_graph(&graph.inner, &x, Pass::Eval)
            .map_err(to_py)
    }
}

/// Settings use the CLI's `key = value` names, e.g. `{"kind": "eigen", "k": 32}`.
fn settings(raw: Option<&Bound<'_, PyDict>>) -> PyResult<Manifest> {
    let mut m = Manifest::new();
    if let Some(d) = raw {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            if !TrialConfig::KEYS.contains(&key.as_str()) {
                return Err(PyValueError::new_err(format!("unknown setting {key:?}")));
            }
            m.set(&key, v.str()?.to_str()?);
        }
    }
    Ok(m)
}

fn result_dict(py: Python<'_>, r: &TrialResult) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", r.mean)?;
    d.set_item("std", r.std)?;
    d.set_item("accuracies", r.accuracies.clone())?;
    d.set_item("val_accuracies", r.val_accuracies.clone())?;
    d.set_item("best_epochs", r.best_epochs.clone())?;
    d.set_item("diverged_runs", r.diverged_runs)?;
    d.set_item("cell", r.cell())?;
    Ok(d.unbind())
}

/// Node classification trial on a dataset directory. Accuracies are percent.
#[pyfunction]
#[pyo3(signature = (path, settings = None))]
fn node_trial(
    py: Python<'_>,
    path: PathBuf,
    settings: Option<&Bound<'_, PyDict>>,
) -> PyResult<Py<PyDict>> {
    let m = self::settings(settings)?;
    let base = TrialConfig::node_defaults(&path.to_string_lossy(), FeatureKind::Degree);
    let cfg = TrialConfig::from_manifest(&m, &base).map_err(to_py)?;
    let ds = load_node_dataset(&path).map_err(to_py)?;
    let r = py.detach(|| run_node_trial(&cfg, &ds)).map_err(to_py)?;
    result_dict(py, &r)
}

/// Graph classification trial with k-fold cross-validation on a TU dataset.
#[pyfunction]
#[pyo3(signature = (path, name, settings = None))]
fn graph_trial(
    py: Python<'_>,
    path: PathBuf,
    name: &str,
    settings: Option<&Bound<'_, PyDict>>,
) -> PyResult<Py<PyDict>> {
    let m = self::settings(settings)?;
    let cfg =
        TrialConfig::from_manifest(&m, &TrialConfig::graph_defaults(name, FeatureKind::Degree))
            .map_err(to_py)?;
    let ds = load_tudataset_full(&path, name).map_err(to_py)?;
    let r = py.detach(|| run_graph_trial(&cfg, &ds)).map_err(to_py)?;
    result_dict(py, &r)
}

#[pymodule]
#[pyo3(name = "nodefeat")]
fn nodefeat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PySageModel>()?;
    m.add_function(wrap_pyfunction!(features, m)?)?;
    m.add_function(wrap_pyfunction!(pagerank, m)?)?;
    m.add_function(wrap_pyfunction!(eigenpairs, m)?)?;
    m.add_function(wrap_pyfunction!(load_node, m)?)?;
    m.add_function(wrap_pyfunction!(load_tu, m)?)?;
    m.add_function(wrap_pyfunction!(node_trial, m)?)?;
    m.add_function(wrap_pyfunction!(graph_trial, m)?)?;
    m.add(
        "FEATURE_KINDS",
        FeatureKind::ALL
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>(),
    )?;
    Ok(())
}
