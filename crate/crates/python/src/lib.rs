//! Python bindings: parameter points, closed forms, region classification
//! and the Monte-Carlo purity estimator.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gravdec::closedform;
use gravdec::mcpurity::{self, Budget, McConfig, McError, DEFAULT_N_CAP, DEFAULT_TARGET_SE};
use gravdec::units::{self, MassSpec, SigmaSpec};

create_exception!(gravdec_py, RegionError, PyValueError, "Point outside Region II or time beyond t_F.");

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mc_err(e: McError) -> PyErr {
    match e {
        McError::RegionRefused { .. } | McError::BeyondWindow { .. } => RegionError::new_err(e.to_string()),
        McError::InvalidConfig(_) | McError::InvalidTime(_) | McError::InvalidGrid | McError::Param(_) => value_err(e),
        McError::ClosedForm(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A point (L_C, m, σ) in Planck units.
#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyModelParams {
    inner: units::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(l_c: f64, mass: f64, sigma: f64) -> PyResult<Self> {
        Ok(Self { inner: units::ModelParams::new(l_c, mass, sigma).map_err(value_err)? })
    }

    /// Build from suffixed strings, e.g. `ModelParams.parse(1.0, "0.5mc", "30sb")`.
    #[staticmethod]
    fn parse(l_c: f64, mass: &str, sigma: &str) -> PyResult<Self> {
        let mass = mass.parse::<MassSpec>().and_then(|m| m.resolve(l_c)).map_err(value_err)?;
        let spec = sigma.parse::<SigmaSpec>().map_err(value_err)?;
        let sigma = units::resolve_sigma(&spec, l_c, mass).map_err(value_err)?;
        Self::new(l_c, mass, sigma)
    }

    #[getter]
    fn l_c(&self) -> f64 {
        self.inner.l_c
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn lambda_bar(&self) -> f64 {
        self.inner.lambda_bar()
    }

    /// m/M_C.
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[getter]
    fn sigma_b(&self) -> f64 {
        closedform::sigma_b(&self.inner)
    }

    fn region(&self) -> &'static str {
        closedform::classify_region(&self.inner).as_str()
    }

    fn t_f(&self) -> PyResult<f64> {
        closedform::t_f(&self.inner).map_err(value_err)
    }

    fn msq_momentum(&self, t: f64) -> f64 {
        closedform::msq_momentum(t, &self.inner)
    }

    fn kinetic_over_potential(&self, t: f64) -> f64 {
        closedform::kinetic_over_potential(t, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(l_c={}, mass={}, sigma={})", self.inner.l_c, self.inner.mass, self.inner.sigma)
    }
}

#[pyclass(name = "PurityEstimate", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyPurityEstimate {
    inner: mcpurity::PurityEstimate,
}

#[pymethods]
impl PyPurityEstimate {
    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn std_error(&self) -> f64 {
        self.inner.std_error
    }

    #[getter]
    fn one_minus_eta(&self) -> f64 {
        self.inner.one_minus_eta
    }

    #[getter]
    fn n(&self) -> u64 {
        self.inner.n
    }

    #[getter]
    fn imag_part(&self) -> f64 {
        self.inner.imag_part
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    fn __repr__(&self) -> String {
        format!("PurityEstimate(t={}, eta={} ± {}, n={})", self.inner.t, self.inner.eta, self.inner.std_error, self.inner.n)
    }
}

fn config(seed: u64, samples: Option<u64>, target_se: f64, n_cap: u64, workers: usize, force: bool) -> McConfig {
    let budget = match samples {
        Some(n) => Budget::Fixed { n_samples: n },
        None => Budget::Target { target_se, n_cap },
    };
    McConfig {
        seed,
        budget,
        workers,
        allow_outside_region: force,
        allow_beyond_tf: force,
        ..McConfig::default()
    }
}

/// η(t) by Monte Carlo; `t=None` means t_F.
#[pyfunction]
#[pyo3(signature = (params, t=None, *, seed=0, samples=None, target_se=DEFAULT_TARGET_SE, n_cap=DEFAULT_N_CAP, workers=0, force=false))]
#[allow(clippy::too_many_arguments)]
fn estimate_purity(
    py: Python<'_>,
    params: PyRef<'_, PyModelParams>,
    t: Option<f64>,
    seed: u64,
    samples: Option<u64>,
    target_se: f64,
    n_cap: u64,
    workers: usize,
    force: bool,
) -> PyResult<PyPurityEstimate> {
    let p = params.inner;
    let cfg = config(seed, samples, target_se, n_cap, workers, force);
    let t = match t {
        Some(t) => t,
        None => closedform::t_f(&p).map_err(|e| RegionError::new_err(e.to_string()))?,
    };
    let est = py.detach(move || mcpurity::estimate_purity(t, &p, &cfg)).map_err(mc_err)?;
    Ok(PyPurityEstimate { inner: est })
}

/// η_F = η(t_F).
#[pyfunction]
#[pyo3(signature = (params, *, seed=0, samples=None, target_se=DEFAULT_TARGET_SE, n_cap=DEFAULT_N_CAP, workers=0))]
fn final_purity(
    py: Python<'_>,
    params: PyRef<'_, PyModelParams>,
    seed: u64,
    samples: Option<u64>,
    target_se: f64,
    n_cap: u64,
    workers: usize,
) -> PyResult<PyPurityEstimate> {
    let p = params.inner;
    let cfg = config(seed, samples, target_se, n_cap, workers, false);
    let est = py.detach(move || mcpurity::final_purity(&p, &cfg)).map_err(mc_err)?;
    Ok(PyPurityEstimate { inner: est })
}

#[pyfunction]
fn classify_region(params: PyRef<'_, PyModelParams>) -> &'static str {
    closedform::classify_region(&params.inner).as_str()
}

#[pyfunction]
fn bracket_b(sigma_tilde: f64) -> PyResult<f64> {
    closedform::bracket_b(sigma_tilde).map_err(value_err)
}

#[pyfunction]
fn sigma_b_for_mass(mass: f64) -> f64 {
    closedform::sigma_b_for_mass(mass)
}

#[pyfunction]
fn t_f(params: PyRef<'_, PyModelParams>) -> PyResult<f64> {
    closedform::t_f(&params.inner).map_err(value_err)
}

#[pyfunction]
fn erfcx(x: f64) -> f64 {
    gravdec::erfcx(x)
}

#[pymodule]
fn gravdec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyPurityEstimate>()?;
    m.add_function(wrap_pyfunction!(estimate_purity, m)?)?;
    m.add_function(wrap_pyfunction!(final_purity, m)?)?;
    m.add_function(wrap_pyfunction!(classify_region, m)?)?;
    m.add_function(wrap_pyfunction!(bracket_b, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_b_for_mass, m)?)?;
    m.add_function(wrap_pyfunction!(t_f, m)?)?;
    m.add_function(wrap_pyfunction!(erfcx, m)?)?;
    m.add("RegionError", m.py().get_type::<RegionError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
