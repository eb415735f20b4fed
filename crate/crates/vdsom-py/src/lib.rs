//! Python bindings for the map trainer: grids, the objective/gradient
//! pair, optimizer steps, the DSOM baseline, observation streams, metrics
//! and the experiment drivers.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vdsom::config::{config_from_kv, AlgorithmKind};
use vdsom::gradcheck as gradcheck_suite;
use vdsom::{
    build_grid, distortion as distortion_rs, organization_score, AdamState, DsomState, GridSpec,
    MapState, ObservationStream, SplitMix64, StreamSpec, Topology, VdsomConfig, VdsomError,
};

fn to_py_err(e: VdsomError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A fixed lattice with cached pairwise squared latent distances.
#[pyclass(name = "Grid")]
struct PyGrid {
    inner: vdsom::Grid,
}

#[pymethods]
impl PyGrid {
    /// Build a rows x cols lattice. `topology` is "planar" or "toroidal";
    /// `lo`/`hi` set the planar coordinate range.
    #[new]
    #[pyo3(signature = (rows, cols, topology="planar", lo=-1.0, hi=1.0))]
    fn new(rows: usize, cols: usize, topology: &str, lo: f64, hi: f64) -> PyResult<Self> {
        let topology: Topology = topology.parse().map_err(to_py_err)?;
        let spec = GridSpec {
            rows,
            cols,
            topology,
            coord_range: (lo, hi),
        };
        Ok(PyGrid {
            inner: build_grid(&spec).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn point(&self, i: usize) -> PyResult<(f64, f64)> {
        if i >= self.inner.n() {
            return Err(PyValueError::new_err(format!("node {i} out of range")));
        }
        let p = self.inner.point(i);
        Ok((p[0], p[1]))
    }

    fn dist2(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.n() || j >= self.inner.n() {
            return Err(PyValueError::new_err("node index out of range"));
        }
        Ok(self.inner.dist2(i, j))
    }

    fn neighbors(&self, i: usize) -> PyResult<Vec<usize>> {
        self.inner.neighbors(i).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid({}x{}, {})",
            self.inner.rows(),
            self.inner.cols(),
            self.inner.topology()
        )
    }
}

/// Map parameters: weight vectors plus the shared bandwidth.
#[pyclass(name = "MapState")]
struct PyMapState {
    inner: MapState,
}

#[pymethods]
impl PyMapState {
    #[new]
    fn new(weights: Vec<Vec<f64>>, sigma: f64) -> Self {
        PyMapState {
            inner: MapState::new(weights, sigma),
        }
    }

    /// Standard-normal initial weights, seeded.
    #[staticmethod]
    fn random(nodes: usize, dim: usize, sigma: f64, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let weights = (0..nodes)
            .map(|_| (0..dim).map(|_| rng.normal()).collect())
            .collect();
        PyMapState {
            inner: MapState::new(weights, sigma),
        }
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.weights.clone()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    fn __repr__(&self) -> String {
        format!(
            "MapState(n={}, dim={}, sigma={:.6})",
            self.inner.n(),
            self.inner.dim(),
            self.inner.sigma
        )
    }
}

/// One gradient evaluation with its diagnostics.
#[pyclass(name = "Gradient")]
struct PyGradient {
    #[pyo3(get)]
    g_sigma: f64,
    #[pyo3(get)]
    g_weights: Vec<Vec<f64>>,
    #[pyo3(get)]
    winner: usize,
    #[pyo3(get)]
    responsibilities: Vec<f64>,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    d_star: f64,
}

fn vdsom_config(eta: f64, sigma_min: f64, paper_exact_gsigma: bool) -> VdsomConfig {
    VdsomConfig {
        eta,
        sigma_min,
        paper_exact_gsigma,
    }
}

/// Softmax responsibilities of every node given the winner.
#[pyfunction]
#[pyo3(signature = (grid, winner, sigma, eta=1.0))]
fn responsibilities(grid: &PyGrid, winner: usize, sigma: f64, eta: f64) -> PyResult<Vec<f64>> {
    vdsom::responsibilities(&grid.inner, winner, sigma, eta).map_err(to_py_err)
}

/// Per-sample objective value and winner index.
#[pyfunction]
#[pyo3(signature = (grid, state, x, eta=1.0, sigma_min=1e-4, paper_exact_gsigma=false))]
fn per_sample_objective(
    grid: &PyGrid,
    state: &PyMapState,
    x: Vec<f64>,
    eta: f64,
    sigma_min: f64,
    paper_exact_gsigma: bool,
) -> PyResult<(f64, usize)> {
    let cfg = vdsom_config(eta, sigma_min, paper_exact_gsigma);
    vdsom::per_sample_objective(&grid.inner, &state.inner, &cfg, &x).map_err(to_py_err)
}

/// Stochastic gradient of the per-sample objective.
#[pyfunction]
#[pyo3(signature = (grid, state, x, eta=1.0, sigma_min=1e-4, paper_exact_gsigma=false))]
fn gradient(
    grid: &PyGrid,
    state: &PyMapState,
    x: Vec<f64>,
    eta: f64,
    sigma_min: f64,
    paper_exact_gsigma: bool,
) -> PyResult<PyGradient> {
    let cfg = vdsom_config(eta, sigma_min, paper_exact_gsigma);
    let g = vdsom::gradient(&grid.inner, &state.inner, &cfg, &x).map_err(to_py_err)?;
    Ok(PyGradient {
        g_sigma: g.g_sigma,
        g_weights: g.g_weights,
        winner: g.winner,
        responsibilities: g.responsibilities,
        objective: g.objective,
        d_star: g.d_star,
    })
}

/// Adam accumulators over the map parameters.
#[pyclass(name = "Adam")]
struct PyAdam {
    inner: AdamState,
}

#[pymethods]
impl PyAdam {
    #[new]
    #[pyo3(signature = (nodes, dim, alpha=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8))]
    fn new(nodes: usize, dim: usize, alpha: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        PyAdam {
            inner: AdamState::with_hyperparameters(nodes, dim, alpha, beta1, beta2, epsilon),
        }
    }

    /// Applies one Adam update in place on `state`.
    #[pyo3(signature = (state, grad, sigma_min=1e-4))]
    fn step(&mut self, state: &mut PyMapState, grad: &PyGradient, sigma_min: f64) -> PyResult<()> {
        let g = vdsom::VdsomGradient {
            g_sigma: grad.g_sigma,
            g_weights: grad.g_weights.clone(),
            winner: grad.winner,
            responsibilities: grad.responsibilities.clone(),
            objective: grad.objective,
            d_star: grad.d_star,
        };
        vdsom::adam_step(&mut self.inner, &mut state.inner, &g, sigma_min).map_err(to_py_err)
    }

    #[getter]
    fn step_count(&self) -> u64 {
        self.inner.step_count
    }
}

/// One plain SGD update in place on `state`.
#[pyfunction]
#[pyo3(signature = (state, grad, lr, sigma_min=1e-4))]
fn sgd_step(state: &mut PyMapState, grad: &PyGradient, lr: f64, sigma_min: f64) -> PyResult<()> {
    let g = vdsom::VdsomGradient {
        g_sigma: grad.g_sigma,
        g_weights: grad.g_weights.clone(),
        winner: grad.winner,
        responsibilities: grad.responsibilities.clone(),
        objective: grad.objective,
        d_star: grad.d_star,
    };
    vdsom::sgd_step(&mut state.inner, &g, lr, sigma_min).map_err(to_py_err)
}

/// The elasticity-controlled baseline map.
#[pyclass(name = "Dsom")]
struct PyDsom {
    inner: DsomState,
}

#[pymethods]
impl PyDsom {
    #[new]
    #[pyo3(signature = (weights, eta=1.0, lr=1e-3))]
    fn new(weights: Vec<Vec<f64>>, eta: f64, lr: f64) -> PyResult<Self> {
        Ok(PyDsom {
            inner: DsomState::new(weights, eta, lr).map_err(to_py_err)?,
        })
    }

    /// One online update; returns the winner index.
    fn step(&mut self, grid: &PyGrid, x: Vec<f64>) -> PyResult<usize> {
        vdsom::dsom_step(&mut self.inner, &grid.inner, &x).map_err(to_py_err)
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.weights.clone()
    }
}

/// A seeded observation source.
#[pyclass(name = "Stream")]
struct PyStream {
    spec: StreamSpec,
    inner: ObservationStream,
}

impl PyStream {
    fn build(spec: StreamSpec) -> PyResult<Self> {
        Ok(PyStream {
            inner: ObservationStream::from_spec(&spec).map_err(to_py_err)?,
            spec,
        })
    }
}

#[pymethods]
impl PyStream {
    #[staticmethod]
    #[pyo3(signature = (seed, noise_std=0.05))]
    fn moons(seed: u64, noise_std: f64) -> PyResult<Self> {
        Self::build(StreamSpec::moons(noise_std, seed))
    }

    #[staticmethod]
    #[pyo3(signature = (seed, noise_std=0.05, inner_factor=0.5))]
    fn circles(seed: u64, noise_std: f64, inner_factor: f64) -> PyResult<Self> {
        Self::build(StreamSpec::circles(noise_std, inner_factor, seed))
    }

    #[staticmethod]
    fn idx_file(path: String, seed: u64) -> PyResult<Self> {
        Self::build(StreamSpec::idx_file(path, seed))
    }

    /// First child for steps 1..=switch_step, then the second child.
    #[staticmethod]
    fn mutate(first: &PyStream, second: &PyStream, switch_step: u64) -> PyResult<Self> {
        Self::build(StreamSpec::mutate(
            first.spec.clone(),
            second.spec.clone(),
            switch_step,
        ))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Next observation.
    fn next(&mut self) -> Vec<f64> {
        self.inner.next_observation()
    }

    /// Next `n` observations.
    fn batch(&mut self, n: usize) -> Vec<Vec<f64>> {
        self.inner.take_batch(n)
    }
}

/// Mean over samples of the min squared distance to any weight.
#[pyfunction]
fn distortion(weights: Vec<Vec<f64>>, samples: Vec<Vec<f64>>) -> PyResult<f64> {
    distortion_rs(&weights, &samples).map_err(to_py_err)
}

/// (adjacent_mean, random_mean) observation-space distances over lattice
/// edges vs seeded random node pairs.
#[pyfunction]
#[pyo3(signature = (grid, weights, seed=0))]
fn organization(grid: &PyGrid, weights: Vec<Vec<f64>>, seed: u64) -> PyResult<(f64, f64)> {
    let mut rng = SplitMix64::new(seed);
    organization_score(&grid.inner, &weights, &mut rng).map_err(to_py_err)
}

/// Load an IDX unsigned-byte image tensor: returns (count, dim, images).
#[pyfunction]
fn load_idx_images(path: String) -> PyResult<(usize, usize, Vec<Vec<f64>>)> {
    let images = vdsom::data::load_idx_images(path).map_err(to_py_err)?;
    let list = (0..images.count).map(|i| images.image(i).to_vec()).collect();
    Ok((images.count, images.dim(), list))
}

/// Run a full training configuration. `options` holds the same keys as the
/// CLI configuration file (strings); files are emitted to `output_dir`.
/// Returns a summary dict.
#[pyfunction]
fn run_train(py: Python<'_>, options: &Bound<'_, PyDict>) -> PyResult<Py<PyDict>> {
    let mut kv = BTreeMap::new();
    for (key, value) in options.iter() {
        kv.insert(key.extract::<String>()?, value.str()?.to_string());
    }
    let config = config_from_kv(kv).map_err(to_py_err)?;
    let outcome = vdsom::run_train(&config).map_err(to_py_err)?;

    let summary = PyDict::new(py);
    summary.set_item("final_sigma", outcome.final_sigma)?;
    summary.set_item("final_distortion", outcome.final_distortion)?;
    summary.set_item("organization", outcome.organization)?;
    summary.set_item("final_weights", outcome.final_weights)?;
    summary.set_item(
        "emitted",
        outcome
            .emitted
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    )?;
    summary.set_item(
        "log",
        outcome
            .log
            .records
            .iter()
            .map(|r| (r.step, r.sigma, r.distortion, r.objective))
            .collect::<Vec<_>>(),
    )?;
    Ok(summary.into())
}

/// Sweep elasticities over both algorithms; returns rows of
/// (algorithm, eta, distortion).
#[pyfunction]
#[pyo3(signature = (options, etas, algorithms=vec!["vdsom".to_string(), "dsom".to_string()]))]
fn run_sweep(
    options: &Bound<'_, PyDict>,
    etas: Vec<f64>,
    algorithms: Vec<String>,
) -> PyResult<Vec<(String, f64, f64)>> {
    let mut kv = BTreeMap::new();
    for (key, value) in options.iter() {
        kv.insert(key.extract::<String>()?, value.str()?.to_string());
    }
    let config = config_from_kv(kv).map_err(to_py_err)?;
    let algorithms: Vec<AlgorithmKind> = algorithms
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()
        .map_err(to_py_err)?;
    let outcome = vdsom::run_sweep(&config, &etas, &algorithms).map_err(to_py_err)?;
    if let Some((alg, eta, message)) = outcome.failures.first() {
        return Err(PyValueError::new_err(format!(
            "run ({alg}, eta {eta}) failed: {message}"
        )));
    }
    Ok(outcome
        .rows
        .iter()
        .map(|r| (r.algorithm.to_string(), r.eta, r.distortion))
        .collect())
}

/// Finite-difference verification of the analytic gradients. Returns
/// (passed, max_rel_error, max_abs_error).
#[pyfunction]
#[pyo3(signature = (trials=120, seed=42, paper_exact=false))]
fn gradcheck(trials: usize, seed: u64, paper_exact: bool) -> PyResult<(bool, f64, f64)> {
    let report = gradcheck_suite::run_suite(trials, seed, paper_exact).map_err(to_py_err)?;
    Ok((report.passed(), report.max_rel_error, report.max_abs_error))
}

#[pymodule]
fn vdsom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyMapState>()?;
    m.add_class::<PyGradient>()?;
    m.add_class::<PyAdam>()?;
    m.add_class::<PyDsom>()?;
    m.add_class::<PyStream>()?;
    m.add_function(wrap_pyfunction!(responsibilities, m)?)?;
    m.add_function(wrap_pyfunction!(per_sample_objective, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(sgd_step, m)?)?;
    m.add_function(wrap_pyfunction!(distortion, m)?)?;
    m.add_function(wrap_pyfunction!(organization, m)?)?;
    m.add_function(wrap_pyfunction!(load_idx_images, m)?)?;
    m.add_function(wrap_pyfunction!(run_train, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}
