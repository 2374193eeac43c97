//! Python bindings: `import fairshare`.
//!
//! Matrices cross the boundary as lists of rows, allocations as small
//! read-only objects, and experiment configs and reports as JSON strings.

use std::collections::BTreeMap;

use fairshare_core as core;
use fairshare_core::generate::{generate, Family};
use fairshare_core::road_graph::Edge;
use fairshare_core::verify::{run_verification, VerifyConfig};
use fairshare_core::{AllocationFlag, CostModel, Error, Mode, Rule};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

create_exception!(fairshare, FairshareError, PyValueError, "Invalid input to the allocation engine.");
create_exception!(fairshare, CapacityError, FairshareError, "An instance exceeds a solver size cap.");

fn to_py(e: Error) -> PyErr {
    if e.is_capacity() {
        return CapacityError::new_err(e.to_string());
    }
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => FairshareError::new_err(e.to_string()),
    }
}

fn mode(name: &str) -> PyResult<Mode> {
    name.parse().map_err(to_py)
}

#[pyclass(name = "RoadGraph", module = "fairshare", frozen)]
struct PyRoadGraph {
    inner: core::RoadGraph,
}

#[pymethods]
impl PyRoadGraph {
    /// `edges` is a list of `(u, v, weight)` with weights in meters.
    #[new]
    #[pyo3(signature = (edges, vertices = Vec::new()))]
    fn new(edges: Vec<(u64, u64, f64)>, vertices: Vec<u64>) -> PyResult<Self> {
        let edges = edges.into_iter().map(|(u, v, weight)| Edge { u, v, weight });
        let inner = core::RoadGraph::new(vertices, edges).map_err(to_py)?;
        Ok(PyRoadGraph { inner })
    }

    /// Parses an edge-list CSV (`u,v,weight`).
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let inner = core::load_graph(text).map_err(to_py)?;
        Ok(PyRoadGraph { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = core::road_graph::load_graph_file(path).map_err(to_py)?;
        Ok(PyRoadGraph { inner })
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn vertices(&self) -> Vec<u64> {
        self.inner.vertices().to_vec()
    }

    fn edges(&self) -> Vec<(u64, u64, f64)> {
        self.inner.edges().iter().map(|e| (e.u, e.v, e.weight)).collect()
    }

    /// Shortest distances from `source` to every reachable vertex.
    fn shortest_distances(&self, source: u64) -> PyResult<BTreeMap<u64, f64>> {
        core::shortest_distances(&self.inner, source).map_err(to_py)
    }

    /// Keeps the `k` vertices closest to `origin`.
    fn crop(&self, origin: u64, k: usize) -> PyResult<Self> {
        let inner = core::crop_to_nearest(&self.inner, origin, k).map_err(to_py)?;
        Ok(PyRoadGraph { inner })
    }

    #[pyo3(signature = (depot, destinations, mode = "last-mile"))]
    fn distance_matrix(&self, depot: u64, destinations: Vec<u64>, mode: &str) -> PyResult<PyDistanceMatrix> {
        let inner = core::build_distance_matrix(&self.inner, depot, &destinations, self::mode(mode)?)
            .map_err(to_py)?;
        Ok(PyDistanceMatrix { inner })
    }

    fn to_csv(&self) -> String {
        self.inner.to_edge_list()
    }

    fn __repr__(&self) -> String {
        format!(
            "RoadGraph({} vertices, {} edges)",
            self.inner.num_vertices(),
            self.inner.num_edges()
        )
    }
}

#[pyclass(name = "DistanceMatrix", module = "fairshare", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDistanceMatrix {
    inner: core::DistanceMatrix,
}

#[pymethods]
impl PyDistanceMatrix {
    /// `rows` is the `(n+1) x (n+1)` block over the depot and destinations.
    #[new]
    #[pyo3(signature = (rows, mode = "last-mile", validate = false))]
    fn new(rows: Vec<Vec<f64>>, mode: &str, validate: bool) -> PyResult<Self> {
        let inner = core::DistanceMatrix::from_rows(&rows, self::mode(mode)?, validate).map_err(to_py)?;
        Ok(PyDistanceMatrix { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode().to_string()
    }

    /// Entry `(i, j)`; index `n + 1` is the dummy destination.
    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i > self.inner.dummy() || j > self.inner.dummy() {
            return Err(FairshareError::new_err(format!(
                "index ({i}, {j}) out of range for n={}",
                self.inner.n()
            )));
        }
        Ok(self.inner.get(i, j))
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.real_rows()
    }

    fn with_mode(&self, mode: &str) -> PyResult<Self> {
        Ok(PyDistanceMatrix {
            inner: self.inner.with_mode(self::mode(mode)?),
        })
    }

    /// Same stops, visited in `order` (a permutation of `1..=n`).
    fn reordered(&self, order: Vec<usize>) -> PyResult<Self> {
        let inner = self.inner.reordered(&order).map_err(to_py)?;
        Ok(PyDistanceMatrix { inner })
    }

    fn check_triangle_inequality(&self) -> PyResult<()> {
        self.inner.check_triangle_inequality().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("DistanceMatrix(n={}, mode={})", self.inner.n(), self.inner.mode())
    }
}

#[pyclass(name = "RideInstance", module = "fairshare", frozen)]
struct PyRideInstance {
    inner: core::RideInstance,
}

#[pymethods]
impl PyRideInstance {
    #[new]
    #[pyo3(signature = (matrix, price_per_km = 1.0))]
    fn new(matrix: PyRef<'_, PyDistanceMatrix>, price_per_km: f64) -> PyResult<Self> {
        let inner = core::RideInstance::new(matrix.inner.clone())
            .with_price_per_km(price_per_km)
            .map_err(to_py)?;
        Ok(PyRideInstance { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (rows, mode = "last-mile", price_per_km = 1.0))]
    fn from_rows(rows: Vec<Vec<f64>>, mode: &str, price_per_km: f64) -> PyResult<Self> {
        let inner = core::RideInstance::from_rows(&rows, self::mode(mode)?)
            .and_then(|r| r.with_price_per_km(price_per_km))
            .map_err(to_py)?;
        Ok(PyRideInstance { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode().to_string()
    }

    #[getter]
    fn price_per_km(&self) -> f64 {
        self.inner.price_per_km
    }

    #[getter]
    fn matrix(&self) -> PyDistanceMatrix {
        PyDistanceMatrix {
            inner: self.inner.matrix.clone(),
        }
    }

    /// Cost in currency of serving everyone in the given order.
    fn ride_cost(&self) -> f64 {
        self.inner
            .to_currency(core::chain_cost(&self.inner, self.inner.grand_coalition()))
    }

    /// `(meters, order)` of the cheapest drop-off order.
    fn optimal_order(&self) -> PyResult<(f64, Vec<usize>)> {
        core::optimal_order(&self.inner, self.inner.grand_coalition()).map_err(to_py)
    }

    fn with_mode(&self, mode: &str) -> PyResult<Self> {
        Ok(PyRideInstance {
            inner: self.inner.with_mode(self::mode(mode)?),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "RideInstance(n={}, mode={}, price_per_km={})",
            self.inner.n(),
            self.inner.mode(),
            self.inner.price_per_km
        )
    }
}

#[pyclass(name = "Allocation", module = "fairshare", frozen)]
struct PyAllocation {
    inner: core::Allocation,
}

fn wrap(inner: core::Allocation) -> PyAllocation {
    PyAllocation { inner }
}

fn flag_name(flag: &AllocationFlag) -> String {
    match flag {
        AllocationFlag::EqualSplitFallback => "equal-split-fallback",
        AllocationFlag::NegativeMargin => "negative-margin",
    }
    .to_owned()
}

#[pymethods]
impl PyAllocation {
    #[getter]
    fn rule(&self) -> &'static str {
        self.inner.rule.as_str()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// `payments[k]` belongs to passenger `k + 1`.
    #[getter]
    fn payments(&self) -> Vec<f64> {
        self.inner.payments.clone()
    }

    #[getter]
    fn total(&self) -> f64 {
        self.inner.total
    }

    #[getter]
    fn cost_model(&self) -> String {
        self.inner.cost_model.to_string()
    }

    #[getter]
    fn flags(&self) -> Vec<String> {
        self.inner.flags.iter().map(flag_name).collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.n
    }

    fn __repr__(&self) -> String {
        format!("Allocation(rule={}, payments={:?})", self.inner.rule, self.inner.payments)
    }
}

fn exact_model(inst: &core::RideInstance, prioritized: bool) -> CostModel {
    CostModel::new(prioritized, inst.mode())
}

/// Exact Shapley value of the prioritized or non-prioritized game.
#[pyfunction]
#[pyo3(signature = (instance, prioritized = false))]
fn shapley_exact(py: Python<'_>, instance: &PyRideInstance, prioritized: bool) -> PyResult<PyAllocation> {
    let model = exact_model(&instance.inner, prioritized);
    py.detach(|| core::allocate(&instance.inner, Rule::Exact, model))
        .map(wrap)
        .map_err(to_py)
}

/// Closed-form prioritized Shapley value; `routing_game` adds the return leg.
#[pyfunction]
#[pyo3(signature = (instance, routing_game = false))]
fn shapo(instance: &PyRideInstance, routing_game: bool) -> PyAllocation {
    let mode = if routing_game {
        Mode::RoutingGame
    } else {
        instance.inner.mode()
    };
    wrap(core::shapo_allocate(&instance.inner, mode))
}

#[pyfunction]
fn depot_distance(instance: &PyRideInstance) -> PyAllocation {
    wrap(core::proxies::depot_distance(&instance.inner))
}

#[pyfunction]
fn shortcut_distance(instance: &PyRideInstance) -> PyAllocation {
    wrap(core::proxies::shortcut_distance(&instance.inner))
}

#[pyfunction]
fn rerouted_margin(instance: &PyRideInstance) -> PyResult<PyAllocation> {
    core::proxies::rerouted_margin(&instance.inner)
        .map(wrap)
        .map_err(to_py)
}

/// Every rule by name: exact, shapo, shapo-routing, depot, shortcut, reroute.
#[pyfunction]
#[pyo3(signature = (instance, rule, prioritized = false))]
fn allocate(py: Python<'_>, instance: &PyRideInstance, rule: &str, prioritized: bool) -> PyResult<PyAllocation> {
    let rule: Rule = rule.parse().map_err(to_py)?;
    let model = exact_model(&instance.inner, prioritized);
    py.detach(|| core::allocate(&instance.inner, rule, model))
        .map(wrap)
        .map_err(to_py)
}

/// Weight of `d(p, q)` in passenger `i`'s closed-form payment.
#[pyfunction]
#[pyo3(signature = (i, p, q, n, mode = "last-mile"))]
fn beta(i: usize, p: usize, q: usize, n: usize, mode: &str) -> PyResult<f64> {
    core::beta(i, p, q, n, self::mode(mode)?).map_err(to_py)
}

/// The same weight as an exact `(numerator, denominator)` pair.
#[pyfunction]
#[pyo3(signature = (i, p, q, n, mode = "last-mile"))]
fn beta_ratio(i: usize, p: usize, q: usize, n: usize, mode: &str) -> PyResult<(i64, i64)> {
    let r = core::beta_ratio(i, p, q, n, self::mode(mode)?).map_err(to_py)?;
    Ok((*r.numer(), *r.denom()))
}

/// Error measures of `estimate` against `truth`; `percent` is a fraction.
#[pyfunction]
fn metrics(estimate: &PyAllocation, truth: &PyAllocation) -> PyResult<BTreeMap<&'static str, f64>> {
    let m = core::metrics(&estimate.inner, &truth.inner).map_err(to_py)?;
    Ok(BTreeMap::from([
        ("percent", m.percent),
        ("mae", m.mae),
        ("mse", m.mse),
        ("rmse", m.rmse),
        ("max_error", m.max_error),
        ("percent_skipped", m.percent_skipped as f64),
    ]))
}

/// Runs an experiment config (JSON) and returns the report as JSON. A
/// relative graph file resolves against the working directory; pass `graph`
/// to benchmark on an already loaded network instead.
#[pyfunction]
#[pyo3(signature = (config_json = "{}", graph = None))]
fn run_experiment(py: Python<'_>, config_json: &str, graph: Option<&PyRoadGraph>) -> PyResult<String> {
    let cfg = core::ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let report = py.detach(|| match graph {
        Some(g) => cfg
            .validate()
            .and_then(|_| core::eval_harness::run_experiment_on(&cfg, &g.inner)),
        None => core::run_experiment(&cfg),
    });
    report.map(|r| r.to_json()).map_err(to_py)
}

/// Checks the closed form and solvers against their oracles; returns the
/// report as JSON.
#[pyfunction]
#[pyo3(signature = (n_max = 8, trials = 200, seed = 0))]
fn verify(py: Python<'_>, n_max: usize, trials: usize, seed: u64) -> String {
    let report = py.detach(|| run_verification(&VerifyConfig { n_max, trials, seed }));
    serde_json::to_string(&report).expect("report serializes")
}

/// Synthetic road network: `line`, `grid` or `euclidean`.
#[pyfunction]
#[pyo3(signature = (family, size, seed = 0))]
fn generate_graph(family: &str, size: usize, seed: u64) -> PyResult<PyRoadGraph> {
    let family: Family = family.parse().map_err(to_py)?;
    let inner = generate(family, size, seed).map_err(to_py)?;
    Ok(PyRoadGraph { inner })
}

#[pymodule]
fn fairshare(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("FairshareError", py.get_type::<FairshareError>())?;
    m.add("CapacityError", py.get_type::<CapacityError>())?;
    m.add("TSP_CAP", core::cost_model::TSP_CAP)?;
    m.add("PRIORITIZED_CAP", core::cost_model::PRIORITIZED_CAP)?;
    m.add_class::<PyRoadGraph>()?;
    m.add_class::<PyDistanceMatrix>()?;
    m.add_class::<PyRideInstance>()?;
    m.add_class::<PyAllocation>()?;
    m.add_function(wrap_pyfunction!(shapley_exact, m)?)?;
    m.add_function(wrap_pyfunction!(shapo, m)?)?;
    m.add_function(wrap_pyfunction!(depot_distance, m)?)?;
    m.add_function(wrap_pyfunction!(shortcut_distance, m)?)?;
    m.add_function(wrap_pyfunction!(rerouted_margin, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(beta_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(generate_graph, m)?)?;
    Ok(())
}
