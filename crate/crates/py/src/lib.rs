//! Python bindings: laws in their text form, perpetuity sampling, the BRW
//! martingale, the spine identity and the scenario runner.

use perpetua::brwsim::{martingale_trajectory as brw_trajectory, BrwCaps};
use perpetua::law::{classify_regime, induced_mq_law, parse_law, Law, MqLaw, PpLaw, TiltMode, CATALOGUE};
use perpetua::perpsim::{expected_sigma_x, simulate_zinf as zinf_once, zinf_mean as zinf_mean_core, ZinfPolicy};
use perpetua::spinesim::{simulate_what, verify_spine_identity, SpineResiduals};
use perpetua::stats::{dp_exact_zn, EstimateReport};
use perpetua::Stream;
use perpetua_cli::scenario::{Scenario, ScenarioFile};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A law given by its canonical text form, e.g. `const:m=0.5,q=1`.
#[pyclass(name = "Law", frozen, skip_from_py_object, module = "perpetua")]
#[derive(Clone)]
pub struct PyLaw {
    inner: Law,
}

impl PyLaw {
    fn mq(&self) -> perpetua::Result<MqLaw> {
        match &self.inner {
            Law::Mq(l) => Ok(l.clone()),
            Law::Pp(pp) => induced_mq_law(pp),
        }
    }

    fn pp(&self) -> PyResult<&PpLaw> {
        match &self.inner {
            Law::Pp(pp) => Ok(pp),
            Law::Mq(l) => Err(PyValueError::new_err(format!("`{}` is not a point-process law", l.id))),
        }
    }
}

#[pymethods]
impl PyLaw {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        parse_law(spec).map(|inner| PyLaw { inner }).map_err(value_error)
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id().to_string()
    }

    /// `"mq"` for perpetuity drivers, `"pp"` for point processes.
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            Law::Mq(_) => "mq",
            Law::Pp(_) => "pp",
        }
    }

    /// Regime of the (induced) `(M, Q)` law: `C1`, `C2` or `Divergent`.
    #[pyo3(signature = (seed = 1))]
    fn regime(&self, seed: u64) -> PyResult<String> {
        let law = self.mq().map_err(value_error)?;
        let r = classify_regime(&law, 1_000_000, &mut Stream::new(seed)).map_err(value_error)?;
        Ok(format!("{:?}", r.case))
    }

    fn __repr__(&self) -> String {
        format!("Law('{}')", self.inner.id())
    }
}

/// A Monte Carlo mean with its standard error and confidence interval.
#[pyclass(name = "Estimate", frozen, get_all, skip_from_py_object, module = "perpetua")]
#[derive(Clone)]
pub struct PyEstimate {
    estimate: f64,
    stderr: f64,
    n: u64,
    ci: (f64, f64),
}

impl From<EstimateReport> for PyEstimate {
    fn from(e: EstimateReport) -> Self {
        PyEstimate {
            estimate: e.estimate,
            stderr: e.stderr,
            n: e.n,
            ci: e.ci,
        }
    }
}

#[pymethods]
impl PyEstimate {
    fn contains(&self, value: f64) -> bool {
        self.ci.0 <= value && value <= self.ci.1
    }

    #[pyo3(signature = (target, k = 3.0))]
    fn within_sigmas(&self, target: f64, k: f64) -> bool {
        (self.estimate - target).abs() <= k * self.stderr
    }

    fn __repr__(&self) -> String {
        format!("Estimate({} +- {}, n={})", self.estimate, self.stderr, self.n)
    }
}

fn policy(eps: f64, nmax: u64) -> ZinfPolicy {
    ZinfPolicy {
        eps,
        nmax,
        ..ZinfPolicy::default()
    }
}

/// One draw of the truncated perpetuity `Z_inf`.
#[pyfunction]
#[pyo3(signature = (law, seed = 1, eps = 1e-12, nmax = 1_000_000))]
fn simulate_zinf(law: PyRef<'_, PyLaw>, seed: u64, eps: f64, nmax: u64) -> PyResult<f64> {
    let mq = law.mq().map_err(value_error)?;
    zinf_once(&mq, policy(eps, nmax), &mut Stream::new(seed))
        .map(|o| o.value)
        .map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (law, reps = 10_000, seed = 1, confidence = 0.99, eps = 1e-12, nmax = 1_000_000))]
fn zinf_mean(py: Python<'_>, law: PyRef<'_, PyLaw>, reps: usize, seed: u64, confidence: f64, eps: f64, nmax: u64) -> PyResult<PyEstimate> {
    let mq = law.mq().map_err(value_error)?;
    py.detach(|| zinf_mean_core(&mq, policy(eps, nmax), reps, seed, confidence))
        .map(PyEstimate::from)
        .map_err(value_error)
}

/// `E sigma(x)`, the mean first time `|Pi_n| < x`.
#[pyfunction]
#[pyo3(signature = (law, x, reps = 10_000, seed = 1, confidence = 0.99, nmax = 1_000_000))]
fn expected_sigma(py: Python<'_>, law: PyRef<'_, PyLaw>, x: f64, reps: usize, seed: u64, confidence: f64, nmax: usize) -> PyResult<PyEstimate> {
    let mq = law.mq().map_err(value_error)?;
    py.detach(|| expected_sigma_x(&mq, x, nmax, reps, seed, confidence))
        .map(PyEstimate::from)
        .map_err(value_error)
}

/// Exact law of `Z_n` for a finitely supported driver, as `(value, mass)` atoms.
#[pyfunction]
fn exact_zn(law: PyRef<'_, PyLaw>, n: usize) -> PyResult<Vec<(f64, f64)>> {
    let mq = law.mq().map_err(value_error)?;
    let support = mq
        .support()
        .ok_or_else(|| PyValueError::new_err(format!("`{}` has no finite support", mq.id)))?;
    let (z, _) = dp_exact_zn(&support, n).map_err(value_error)?;
    Ok(z.atoms().to_vec())
}

/// `W_0, ..., W_n` along one simulated tree.
#[pyfunction]
#[pyo3(signature = (law, n, seed = 1))]
fn martingale_trajectory(law: PyRef<'_, PyLaw>, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let pp = law.pp()?;
    brw_trajectory(pp, n, &Stream::new(seed), BrwCaps::default())
        .map(|t| t.w)
        .map_err(value_error)
}

/// `W^_0, ..., W^_n` along one size-biased tree.
#[pyfunction]
#[pyo3(signature = (law, n, seed = 1))]
fn what_trajectory(law: PyRef<'_, PyLaw>, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let pp = law.pp()?;
    simulate_what(pp, n, TiltMode::Exact, &Stream::new(seed), BrwCaps::default())
        .map(|p| p.what_trajectory())
        .map_err(value_error)
}

fn residuals_dict<'py>(py: Python<'py>, what: f64, r: &SpineResiduals) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("what", what)?;
    d.set_item("decomposition", r.decomposition)?;
    d.set_item("closed_form", r.closed_form)?;
    d.set_item("uncorrected", r.uncorrected)?;
    d.set_item("uncorrected_discrepancy", r.uncorrected_discrepancy)?;
    d.set_item("logweight_defect", r.logweight_defect)?;
    d.set_item("q_defect", r.q_defect)?;
    Ok(d)
}

/// Residuals of the spine decomposition of `W^_n` on one path.
#[pyfunction]
#[pyo3(signature = (law, n, seed = 1))]
fn spine_identity<'py>(py: Python<'py>, law: PyRef<'_, PyLaw>, n: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let pp = law.pp()?;
    let path = simulate_what(pp, n, TiltMode::Exact, &Stream::new(seed), BrwCaps::default()).map_err(value_error)?;
    residuals_dict(py, path.what, &verify_spine_identity(&path))
}

/// Runs an experiment the way `perpetua run` does and returns its JSONL.
#[pyfunction]
#[pyo3(signature = (law, experiment, seed = 1, reps = 10_000, horizon = None, threads = 0))]
fn run_experiment(py: Python<'_>, law: &str, experiment: &str, seed: u64, reps: usize, horizon: Option<usize>, threads: usize) -> PyResult<String> {
    let file = ScenarioFile {
        law: Some(law.to_string()),
        experiment: Some(experiment.to_string()),
        seed: Some(seed),
        replicates: Some(reps),
        horizon,
        threads: Some(threads),
        ..Default::default()
    };
    let sc = Scenario::resolve(file, false).map_err(value_error)?;
    let records = py.detach(|| perpetua_cli::experiments::run(&sc)).map_err(value_error)?;
    Ok(records.iter().map(|r| r.to_line() + "\n").collect())
}

/// `(spec, description)` for every law family.
#[pyfunction]
fn laws() -> Vec<(&'static str, &'static str)> {
    CATALOGUE.to_vec()
}

#[pymodule]
#[pyo3(name = "perpetua")]
fn perpetua_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyLaw>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(simulate_zinf, m)?)?;
    m.add_function(wrap_pyfunction!(zinf_mean, m)?)?;
    m.add_function(wrap_pyfunction!(expected_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(exact_zn, m)?)?;
    m.add_function(wrap_pyfunction!(martingale_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(what_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(spine_identity, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(laws, m)?)?;
    Ok(())
}
