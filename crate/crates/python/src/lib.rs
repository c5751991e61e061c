//! Python bindings. Pattern sets cross the boundary as lists of patterns,
//! each a list of floats.

use std::path::PathBuf;

use kernmem::dynamics::{self, RecallTrace, UpdateRule};
use kernmem::experiments::{self, ExperimentReport};
use kernmem::io::{self, PatternRefs};
use kernmem::training::{self, BiasMode, LearningRule, NetworkMode, SolverConfig, TrainedNetwork};
use kernmem::{kernels, patterns, theory, Error, Geometry, KernelSpec};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(patterns: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = patterns.first().map_or(0, Vec::len);
    if n == 0 || patterns.iter().any(|p| p.len() != n) {
        return Err(PyValueError::new_err("patterns must be a non-empty list of equal-length, non-empty lists"));
    }
    Ok(DMatrix::from_fn(n, patterns.len(), |i, mu| patterns[mu][i]))
}

fn columns(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn parse_kernel(spec: &str) -> PyResult<KernelSpec> {
    spec.parse().map_err(to_py)
}

/// A kernel parsed from `linear`, `poly:p`, `ipoly:p`, `exp`, `expbeta:r:beta`,
/// `sdm-cube:nin:r` or `sdm-sphere:nin:b[:approx]`.
#[pyclass(module = "kernmem_py", name = "Kernel", frozen)]
struct PyKernel {
    spec: KernelSpec,
}

#[pymethods]
impl PyKernel {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyKernel { spec: parse_kernel(spec)? })
    }

    fn __call__(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        kernels::kernel_eval(&self.spec, &x, &y).map_err(to_py)
    }

    /// Gram matrix of the given patterns.
    fn gram(&self, patterns: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let k = kernels::kernel_matrix(&self.spec, &matrix(&patterns)?).map_err(to_py)?;
        Ok(columns(&k))
    }

    fn is_inner_product(&self) -> bool {
        self.spec.is_inner_product()
    }

    fn __str__(&self) -> String {
        self.spec.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Kernel('{}')", self.spec)
    }
}

/// Trajectory of a recall run.
#[pyclass(module = "kernmem_py", name = "Trace", frozen, get_all)]
struct PyTrace {
    states: Vec<Vec<f64>>,
    terminal: Vec<f64>,
    converged: bool,
    cycle: bool,
    steps: usize,
    ties: usize,
}

impl From<RecallTrace> for PyTrace {
    fn from(t: RecallTrace) -> Self {
        PyTrace {
            states: t.states,
            terminal: t.terminal,
            converged: t.converged,
            cycle: t.cycle,
            steps: t.steps,
            ties: t.ties,
        }
    }
}

#[pymethods]
impl PyTrace {
    fn __repr__(&self) -> String {
        format!("Trace(converged={}, steps={}, cycle={})", self.converged, self.steps, self.cycle)
    }
}

fn parse_mode(mode: &str) -> PyResult<NetworkMode> {
    Ok(match mode {
        "hetero" => NetworkMode::Hetero,
        "auto-with-self" => NetworkMode::AutoWithSelf,
        "auto-noself" => NetworkMode::AutoNoSelf,
        "continuous" => NetworkMode::ContinuousInterp,
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    })
}

fn parse_rule(rule: &str, lr: Option<f64>, sbp_iters: usize) -> PyResult<LearningRule> {
    Ok(match rule {
        "hard-margin" => LearningRule::HardMarginDual,
        "adatron" => LearningRule::KernelAdatron { lr },
        "sbp" => LearningRule::StochasticBatchPerceptron {
            lr: lr.unwrap_or(1e-3),
            iters: sbp_iters,
            batch: training::DEFAULT_SBP_BATCH,
        },
        "hebbian" => LearningRule::HebbianOneShot,
        "pinv" => LearningRule::Pseudoinverse,
        "gpinv" => LearningRule::GeneralizedPseudoinverse,
        other => return Err(PyValueError::new_err(format!("unknown rule '{other}'"))),
    })
}

/// A trained hetero- or auto-associative network.
#[pyclass(module = "kernmem_py", name = "Network", frozen)]
struct PyNetwork {
    net: TrainedNetwork,
}

#[pymethods]
impl PyNetwork {
    /// Train on `patterns`; hetero networks also need `targets`.
    #[staticmethod]
    #[pyo3(signature = (patterns, mode = "auto-noself", kernel = "linear", rule = "hard-margin", targets = None, trained_bias = false, tol = training::DEFAULT_TOLERANCE, lr = None, sbp_iters = 100_000, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        patterns: Vec<Vec<f64>>,
        mode: &str,
        kernel: &str,
        rule: &str,
        targets: Option<Vec<Vec<f64>>>,
        trained_bias: bool,
        tol: f64,
        lr: Option<f64>,
        sbp_iters: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let mode = parse_mode(mode)?;
        let x_in = matrix(&patterns)?;
        let x_out = match targets {
            Some(t) => matrix(&t)?,
            None => x_in.clone(),
        };
        let bias = if trained_bias { BiasMode::Trained } else { BiasMode::FixedZero };
        let cfg = SolverConfig::new(parse_rule(rule, lr, sbp_iters)?)
            .with_bias(bias)
            .with_tolerance(tol)
            .with_seed(seed);
        let spec = parse_kernel(kernel)?;
        let net = py
            .detach(|| training::train_network(&x_in, &x_out, mode, spec.into(), &cfg))
            .map_err(to_py)?;
        Ok(PyNetwork { net })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyNetwork {
            net: io::read_network(&path).map_err(to_py)?,
        })
    }

    /// Write the network JSON; pattern files are referenced, not written.
    #[pyo3(signature = (path, inputs, targets = None))]
    fn save(&self, path: PathBuf, inputs: PathBuf, targets: Option<PathBuf>) -> PyResult<()> {
        io::write_network(&path, &self.net, &PatternRefs { inputs, targets }).map_err(to_py)
    }

    #[getter]
    fn mode(&self) -> String {
        match self.net.mode {
            NetworkMode::Hetero => "hetero",
            NetworkMode::AutoWithSelf => "auto-with-self",
            NetworkMode::AutoNoSelf => "auto-noself",
            NetworkMode::ContinuousInterp => "continuous",
        }
        .to_string()
    }

    #[getter]
    fn kernel(&self) -> String {
        match &self.net.similarity {
            training::Similarity::Kernel(k) => k.to_string(),
            training::Similarity::Feature(f) => format!("{f:?}"),
        }
    }

    /// Margin of every output neuron.
    #[getter]
    fn margins(&self) -> Vec<f64> {
        self.net.solver.margins.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.net.all_converged()
    }

    /// Coefficients, one list per output neuron.
    #[getter]
    fn alphas(&self) -> Vec<Vec<f64>> {
        columns(&self.net.alphas)
    }

    #[getter]
    fn thetas(&self) -> Vec<f64> {
        self.net.thetas.iter().copied().collect()
    }

    /// Run recall dynamics from `query`. `update` is one of `default`, `sync`,
    /// `async`, `expbeta` (needs `radius`) or `softmax` (zero temperature
    /// unless `beta` is given).
    #[pyo3(signature = (query, update = "default", max_steps = 100, seed = 0, radius = None, beta = None))]
    fn recall(
        &self,
        py: Python<'_>,
        query: Vec<f64>,
        update: &str,
        max_steps: usize,
        seed: u64,
        radius: Option<f64>,
        beta: Option<f64>,
    ) -> PyResult<PyTrace> {
        let net = &self.net;
        if net.mode == NetworkMode::Hetero && update == "default" {
            return Ok(dynamics::hetero_trace(net, &query).map_err(to_py)?.into());
        }
        let rule = match update {
            "default" => match net.mode {
                NetworkMode::Hetero => unreachable!("handled above"),
                NetworkMode::AutoWithSelf | NetworkMode::AutoNoSelf => UpdateRule::AutoSync(net),
                NetworkMode::ContinuousInterp => UpdateRule::InterpSync(net),
            },
            "sync" => UpdateRule::AutoSync(net),
            "async" => UpdateRule::AutoAsync { net, seed },
            "expbeta" => UpdateRule::ExpBetaZeroTemp {
                x: &net.x_in,
                r: radius.ok_or_else(|| PyValueError::new_err("expbeta recall needs a radius"))?,
            },
            "softmax" => match beta {
                Some(beta) => UpdateRule::SoftmaxFinite { x: &net.x_in, beta },
                None => UpdateRule::SoftmaxZeroTemp { x: &net.x_in },
            },
            other => return Err(PyValueError::new_err(format!("unknown update '{other}'"))),
        };
        let trace = py.detach(|| dynamics::run_to_fixed_point(&rule, &query, max_steps)).map_err(to_py)?;
        Ok(trace.into())
    }

    fn __repr__(&self) -> String {
        format!("Network(mode='{}', kernel='{}', m={}, n_out={})", self.mode(), self.kernel(), self.net.m(), self.net.n_out())
    }
}

fn parse_geometry(geometry: &str, f: f64) -> PyResult<Geometry> {
    Ok(match geometry {
        "bipolar" => Geometry::Bipolar { f },
        "gaussian" => Geometry::Gaussian,
        "sphere" => Geometry::Hypersphere,
        other => return Err(PyValueError::new_err(format!("unknown geometry '{other}'"))),
    })
}

/// `m` random distinct patterns of dimension `n`.
#[pyfunction]
#[pyo3(signature = (geometry, n, m, seed = 0, f = 0.5))]
fn gen_patterns(geometry: &str, n: usize, m: usize, seed: u64, f: f64) -> PyResult<Vec<Vec<f64>>> {
    let set = patterns::gen_patterns(parse_geometry(geometry, f)?, n, m, seed).map_err(to_py)?;
    Ok(columns(set.data()))
}

#[pyfunction]
fn sdm_cube_kernel(n_in: usize, r: usize, delta: usize) -> PyResult<f64> {
    kernels::sdm_cube_kernel(n_in, r, delta).map_err(to_py)
}

#[pyfunction]
fn sdm_sphere_kernel(n_in: usize, b: f64, angle: f64) -> PyResult<f64> {
    kernels::sdm_sphere_kernel_exact(n_in, b, angle.cos()).map_err(to_py)
}

#[pyfunction]
fn sdm_sphere_kernel_approx(n_in: usize, b: f64, angle: f64) -> PyResult<f64> {
    kernels::sdm_sphere_kernel_approx(n_in, b, (0.5 * angle).sin()).map_err(to_py)
}

/// Zero-temperature `Exp_β` update over `patterns`.
#[pyfunction]
fn expbeta_step(patterns: Vec<Vec<f64>>, r: f64, state: Vec<f64>) -> PyResult<Vec<f64>> {
    let out = dynamics::expbeta_zero_temp_step(&matrix(&patterns)?, r, &state).map_err(to_py)?;
    Ok(out.iter().copied().collect())
}

/// Softmax update over `patterns`; `beta = None` takes the best match.
#[pyfunction]
#[pyo3(signature = (patterns, state, beta = None))]
fn softmax_step(patterns: Vec<Vec<f64>>, state: Vec<f64>, beta: Option<f64>) -> PyResult<Vec<f64>> {
    let (out, _) = dynamics::softmax_step(&matrix(&patterns)?, beta, &state).map_err(to_py)?;
    Ok(out.iter().copied().collect())
}

/// Lower bound on the number of Gaussian patterns storable at noise variance `sigma_sq`.
#[pyfunction]
fn capacity_bound_gaussian(n: usize, sigma_sq: f64) -> PyResult<f64> {
    Ok(theory::capacity_bound_gaussian(n, sigma_sq).map_err(to_py)?.value())
}

/// Load at which every pattern stops being a support vector.
#[pyfunction]
fn svp_capacity(n: usize) -> PyResult<f64> {
    theory::svp_capacity(n).map_err(to_py)
}

/// Run a named experiment from a JSON config; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (name, config, jobs = None))]
fn run_experiment(py: Python<'_>, name: &str, config: &str, jobs: Option<usize>) -> PyResult<String> {
    let bad = |e: serde_json::Error| PyValueError::new_err(format!("invalid {name} config: {e}"));
    let run = || -> PyResult<ExperimentReport> {
        let report = match name {
            "margin" => experiments::exp_margin_vs_load(&serde_json::from_str(config).map_err(bad)?, jobs),
            "capacity-gaussian" => experiments::exp_capacity_gaussian(&serde_json::from_str(config).map_err(bad)?, jobs),
            "noise" => experiments::exp_noise_recovery(&serde_json::from_str(config).map_err(bad)?, jobs),
            "sdm-kernel" => experiments::exp_sdm_kernel_scan(&serde_json::from_str(config).map_err(bad)?, jobs),
            "hopfield" => experiments::exp_hopfield_capacity(&serde_json::from_str(config).map_err(bad)?, jobs),
            "svp" => experiments::exp_svp_fraction(&serde_json::from_str(config).map_err(bad)?, jobs),
            other => return Err(PyValueError::new_err(format!("unknown experiment '{other}'"))),
        };
        report.map_err(to_py)
    };
    let report = py.detach(run)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn kernmem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(gen_patterns, m)?)?;
    m.add_function(wrap_pyfunction!(sdm_cube_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(sdm_sphere_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(sdm_sphere_kernel_approx, m)?)?;
    m.add_function(wrap_pyfunction!(expbeta_step, m)?)?;
    m.add_function(wrap_pyfunction!(softmax_step, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_bound_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(svp_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
