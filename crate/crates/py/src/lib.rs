//! Python module `pyrwfront`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rwfront::io_cli::{load_config, RunConfig};
use rwfront::observables::{compare, ensemble_stats};
use rwfront::reference::{solve_reference, transform_problem};
use rwfront::rng::{RandomStream, WalkerDraws};
use rwfront::rwm::{self, validate_timestep, Numerics};
use rwfront::trace::SolutionTrace;

fn runtime(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A validated run configuration.
#[pyclass(name = "Config", module = "pyrwfront", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[getter]
    fn path(&self) -> PathBuf {
        self.inner.path.clone()
    }

    /// Walkers per unit concentration.
    #[getter]
    fn n(&self) -> u64 {
        self.inner.numerics.n
    }

    #[setter]
    fn set_n(&mut self, n: u64) -> PyResult<()> {
        if n == 0 {
            return Err(PyValueError::new_err("n must be >= 1"));
        }
        self.inner.numerics.n = n;
        Ok(())
    }

    /// Dimensionless random-walk time step.
    #[getter]
    fn dtau(&self) -> f64 {
        self.inner.numerics.dtau
    }

    #[setter]
    fn set_dtau(&mut self, dtau: f64) {
        self.inner.numerics.dtau = dtau;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.numerics.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.numerics.seed = seed;
    }

    #[getter]
    fn final_time(&self) -> f64 {
        self.inner.problem.final_time
    }

    #[getter]
    fn snapshot_times(&self) -> Vec<f64> {
        self.inner.numerics.snapshot_times.clone()
    }

    /// The dimensionless problem as a dict of its scalar parameters.
    fn problem<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = &self.inner.problem;
        let d = PyDict::new(py);
        d.set_item("bi", p.bi)?;
        d.set_item("a0", p.a0)?;
        d.set_item("henry", p.henry)?;
        d.set_item("h0", p.h0)?;
        d.set_item("length", p.length)?;
        d.set_item("final_time", p.final_time)?;
        d.set_item("dimensional", self.inner.physical.is_some())?;
        Ok(d)
    }

    fn sigma_tilde(&self, h: f64) -> f64 {
        self.inner.problem.sigma_tilde(h)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(path={:?}, n={}, dtau={:e}, seed={})",
            self.inner.path, self.inner.numerics.n, self.inner.numerics.dtau, self.inner.numerics.seed
        )
    }
}

/// Output of either solver, in dimensionless units.
#[pyclass(name = "Trace", module = "pyrwfront")]
struct PyTrace {
    inner: SolutionTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn solver(&self) -> &'static str {
        self.inner.solver.as_str()
    }
    #[getter]
    fn tau(&self) -> Vec<f64> {
        self.inner.tau.clone()
    }
    #[getter]
    fn front(&self) -> Vec<f64> {
        self.inner.front.clone()
    }
    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.inner.mass.clone()
    }
    #[getter]
    fn left(&self) -> Vec<f64> {
        self.inner.left.clone()
    }
    #[getter]
    fn final_front(&self) -> f64 {
        self.inner.final_front()
    }
    #[getter]
    fn violators(&self) -> u64 {
        self.inner.diagnostics.violators
    }
    #[getter]
    fn pb_max(&self) -> f64 {
        self.inner.diagnostics.pb.max
    }
    #[getter]
    fn wall_time(&self) -> f64 {
        self.inner.wall_time
    }

    /// List of `(tau, h, z, u)` tuples.
    fn snapshots(&self) -> Vec<(f64, f64, Vec<f64>, Vec<f64>)> {
        self.inner
            .snapshots
            .iter()
            .map(|s| (s.tau, s.h, s.z.clone(), s.u.clone()))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(solver={}, steps={}, h(T)={})",
            self.inner.solver.as_str(),
            self.inner.diagnostics.steps,
            self.inner.final_front()
        )
    }
}

/// Seedable xoshiro256++ stream.
#[pyclass(name = "RandomStream", module = "pyrwfront")]
struct PyRandomStream {
    inner: RandomStream,
}

#[pymethods]
impl PyRandomStream {
    #[new]
    #[pyo3(signature = (seed, member = 0))]
    fn new(seed: u64, member: u64) -> Self {
        PyRandomStream {
            inner: RandomStream::for_member(seed, member),
        }
    }
    fn draw_step(&mut self) -> i32 {
        self.inner.draw_step()
    }
    fn draw_uniform(&mut self) -> f64 {
        self.inner.draw_uniform()
    }
}

#[pyfunction(name = "load_config")]
fn py_load_config(path: PathBuf) -> PyResult<PyConfig> {
    load_config(path)
        .map(|inner| PyConfig { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
#[pyo3(signature = (config, seed = None, member = 0))]
fn run_rwm(py: Python<'_>, config: &PyConfig, seed: Option<u64>, member: u64) -> PyResult<PyTrace> {
    let cfg = &config.inner;
    let numerics = Numerics {
        seed: seed.unwrap_or(cfg.numerics.seed),
        member,
        ..cfg.numerics.clone()
    };
    py.detach(|| rwm::run(&cfg.problem, &numerics, &cfg.left))
        .map(|inner| PyTrace { inner })
        .map_err(runtime)
}

#[pyfunction]
fn run_reference(py: Python<'_>, config: &PyConfig) -> PyResult<PyTrace> {
    let cfg = &config.inner;
    py.detach(|| solve_reference(&transform_problem(&cfg.problem, &cfg.left), &cfg.reference))
        .map(|inner| PyTrace { inner })
        .map_err(runtime)
}

/// Error measures of a random-walk trace against a reference trace.
#[pyfunction(name = "compare")]
#[pyo3(signature = (rwm, reference, times = Vec::new()))]
fn py_compare<'py>(
    py: Python<'py>,
    rwm: &PyTrace,
    reference: &PyTrace,
    times: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = compare(&rwm.inner, &reference.inner, &times).map_err(runtime)?;
    let d = PyDict::new(py);
    d.set_item("front_rel_error_at_t", r.front_rel_error_at_t)?;
    d.set_item("mass_rel_error_at_t", r.mass_rel_error_at_t)?;
    d.set_item("left_rel_error_mean", r.left_rel_error_mean)?;
    let profiles: Vec<(f64, f64, f64, f64)> = r
        .profiles
        .iter()
        .map(|p| (p.tau, p.l2, p.linf, p.reference_max))
        .collect();
    d.set_item("profiles", profiles)?;
    Ok(d)
}

/// Mean and sample standard deviation of `h(T)` over `members` streams.
#[pyfunction]
fn ensemble_front(py: Python<'_>, config: &PyConfig, members: u64) -> PyResult<(f64, f64)> {
    let cfg = &config.inner;
    let traces = py
        .detach(|| {
            (0..members)
                .map(|m| {
                    let numerics = Numerics {
                        member: m,
                        ..cfg.numerics.clone()
                    };
                    rwm::run(&cfg.problem, &numerics, &cfg.left)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(runtime)?;
    let stats = ensemble_stats(&traces).map_err(runtime)?;
    let last = stats.tau.len() - 1;
    Ok((stats.mean_front[last], stats.std_front[last]))
}

/// `(ok, report)` for the random-walk time-step condition.
#[pyfunction(name = "validate_timestep")]
fn py_validate_timestep(n: u64, a0: f64, u_max: f64, dtau: f64) -> (bool, String) {
    let r = validate_timestep(n, a0, u_max, dtau);
    (r.ok(), r.to_string())
}

#[pymodule]
fn pyrwfront(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyRandomStream>()?;
    m.add_function(wrap_pyfunction!(py_load_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_rwm, m)?)?;
    m.add_function(wrap_pyfunction!(run_reference, m)?)?;
    m.add_function(wrap_pyfunction!(py_compare, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_front, m)?)?;
    m.add_function(wrap_pyfunction!(py_validate_timestep, m)?)?;
    m.add("__version__", rwfront::io_cli::VERSION)?;
    Ok(())
}
