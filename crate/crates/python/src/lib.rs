//! Python bindings: `import pygausscap`.

use gausscap::asymptotic::{self, EnvKind, SpectralSolution, DEFAULT_QUAD_PANELS};
use gausscap::kkt::{self, KktSolution};
use gausscap::memoryless::{self, OneUseSolution, DEFAULT_S_MAX};
use gausscap::oracle::{self, OracleReport};
use gausscap::{bessel, channel, entropy, verify, Algorithm, ApproxOrder, Error, QuadratureSpectrum};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pygausscap, SolverError, PyRuntimeError, "A solver did not converge or hit an inconsistent stage.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain { .. } | Error::InvalidParameter { .. } | Error::LengthMismatch { .. } | Error::InfeasibleStart { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => SolverError::new_err(other.to_string()),
    }
}

fn order(s: &str) -> PyResult<ApproxOrder> {
    s.parse().map_err(PyValueError::new_err)
}

fn spectrum(q: Vec<f64>, p: Vec<f64>) -> PyResult<QuadratureSpectrum> {
    QuadratureSpectrum::new(q, p).map_err(to_py)
}

#[pyclass(name = "ChannelParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyChannelParams(channel::ChannelParams);

#[pymethods]
impl PyChannelParams {
    #[new]
    fn new(eta: f64, n_photons: f64, n_modes: usize) -> PyResult<Self> {
        channel::ChannelParams::new(eta, n_photons, n_modes).map(Self).map_err(to_py)
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta
    }

    #[getter]
    fn n_photons(&self) -> f64 {
        self.0.n_photons
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.0.n_modes
    }

    fn energy_budget(&self) -> f64 {
        self.0.energy_budget()
    }

    fn __repr__(&self) -> String {
        format!("ChannelParams(eta={}, n_photons={}, n_modes={})", self.0.eta, self.0.n_photons, self.0.n_modes)
    }
}

#[pyclass(name = "EnvironmentSpectrum", frozen, from_py_object)]
#[derive(Clone)]
struct PyEnvironment(channel::EnvironmentSpectrum);

#[pymethods]
impl PyEnvironment {
    #[staticmethod]
    fn memoryless(n_env: f64, s: f64, n: usize) -> PyResult<Self> {
        channel::EnvironmentSpectrum::memoryless(n_env, s, n).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn nearest_neighbor(n_env: f64, s: f64, n: usize) -> PyResult<Self> {
        channel::EnvironmentSpectrum::nearest_neighbor(n_env, s, n).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn custom(q: Vec<f64>, p: Vec<f64>) -> PyResult<Self> {
        channel::EnvironmentSpectrum::custom(spectrum(q, p)?).map(Self).map_err(to_py)
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.0.spectrum.q.clone()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.0.spectrum.p.clone()
    }

    fn mean_photons(&self) -> f64 {
        channel::mean_env_photons(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "KktSolution", frozen)]
struct PyKkt(KktSolution);

#[pymethods]
impl PyKkt {
    #[getter]
    fn input_q(&self) -> Vec<f64> {
        self.0.input.q.clone()
    }

    #[getter]
    fn input_p(&self) -> Vec<f64> {
        self.0.input.p.clone()
    }

    #[getter]
    fn classical_q(&self) -> Vec<f64> {
        self.0.classical.q.clone()
    }

    #[getter]
    fn classical_p(&self) -> Vec<f64> {
        self.0.classical.p.clone()
    }

    /// Stage label of every mode: "first", "second" or "third".
    #[getter]
    fn stages(&self) -> Vec<&'static str> {
        self.0.stages.stages.iter().map(|s| s.as_str()).collect()
    }

    #[getter]
    fn x(&self) -> f64 {
        self.0.x
    }

    #[getter]
    fn lagrange_lambda(&self) -> f64 {
        self.0.lagrange_lambda
    }

    #[getter]
    fn capacity_per_use(&self) -> f64 {
        self.0.capacity_per_use
    }

    #[getter]
    fn order(&self) -> &'static str {
        self.0.order.as_str()
    }

    fn __repr__(&self) -> String {
        let (n1, n2, n3) = self.0.stages.counts();
        format!("KktSolution(capacity_per_use={:.9}, stages={n1}/{n2}/{n3}, x={:.6})", self.0.capacity_per_use, self.0.x)
    }
}

#[pyclass(name = "OneUseSolution", frozen)]
struct PyOneUse(OneUseSolution);

#[pymethods]
impl PyOneUse {
    #[getter]
    fn capacity(&self) -> f64 {
        self.0.capacity
    }

    #[getter]
    fn stage(&self) -> &'static str {
        self.0.stage.as_str()
    }

    #[getter]
    fn i_q(&self) -> f64 {
        self.0.i_q
    }

    #[getter]
    fn i_p(&self) -> f64 {
        self.0.i_p
    }

    #[getter]
    fn c_q(&self) -> f64 {
        self.0.c_q
    }

    #[getter]
    fn c_p(&self) -> f64 {
        self.0.c_p
    }

    #[getter]
    fn r_opt(&self) -> f64 {
        self.0.r_opt
    }

    #[getter]
    fn order(&self) -> &'static str {
        self.0.order.as_str()
    }

    fn __repr__(&self) -> String {
        format!("OneUseSolution(capacity={:.9}, stage={}, r_opt={:.6})", self.0.capacity, self.0.stage.as_str(), self.0.r_opt)
    }
}

#[pyclass(name = "SpectralSolution", frozen)]
struct PySpectral(SpectralSolution);

#[pymethods]
impl PySpectral {
    #[getter]
    fn distribution(&self) -> &'static str {
        self.0.distribution.as_str()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau
    }

    #[getter]
    fn x(&self) -> f64 {
        self.0.x
    }

    #[getter]
    fn capacity(&self) -> f64 {
        self.0.capacity
    }

    #[getter]
    fn n2_threshold(&self) -> f64 {
        self.0.n2_threshold
    }

    #[getter]
    fn w(&self) -> f64 {
        self.0.w
    }

    /// Mode densities at angle `xi` in `[0, pi]`, as a dict.
    fn densities<'py>(&self, py: Python<'py>, xi: f64) -> PyResult<Bound<'py, PyDict>> {
        let d = self.0.densities(xi).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("xi", d.xi)?;
        out.set_item("stage", d.stage.as_str())?;
        for (k, v) in [
            ("e_q", d.e_q),
            ("e_p", d.e_p),
            ("i_q", d.i_q),
            ("i_p", d.i_p),
            ("c_q", d.c_q),
            ("c_p", d.c_p),
            ("o_q", d.o_q),
            ("o_p", d.o_p),
            ("a_q", d.a_q),
            ("a_p", d.a_p),
            ("nu", d.nu),
            ("nu_bar", d.nu_bar),
        ] {
            out.set_item(k, v)?;
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralSolution(capacity={:.9}, distribution={}, tau={:.6})",
            self.0.capacity,
            self.0.distribution.as_str(),
            self.0.tau
        )
    }
}

#[pyclass(name = "OracleReport", frozen)]
struct PyOracle(OracleReport);

#[pymethods]
impl PyOracle {
    /// Best total chi in bits (not per use).
    #[getter]
    fn chi_best(&self) -> f64 {
        self.0.chi_best
    }

    #[getter]
    fn spread(&self) -> f64 {
        self.0.spread
    }

    #[getter]
    fn gradient_norm(&self) -> f64 {
        self.0.gradient_norm
    }

    #[getter]
    fn starts(&self) -> usize {
        self.0.starts
    }

    #[getter]
    fn input_q(&self) -> Vec<f64> {
        self.0.input.q.clone()
    }

    #[getter]
    fn input_p(&self) -> Vec<f64> {
        self.0.input.p.clone()
    }

    #[getter]
    fn classical_q(&self) -> Vec<f64> {
        self.0.classical.q.clone()
    }

    #[getter]
    fn classical_p(&self) -> Vec<f64> {
        self.0.classical.p.clone()
    }

    #[getter]
    fn chi_per_start(&self) -> Vec<f64> {
        self.0.chi_per_start.clone()
    }
}

/// `g(nu - 1/2)` in bits.
#[pyfunction]
fn g_entropy(nu: f64) -> PyResult<f64> {
    entropy::g_entropy(nu).map_err(to_py)
}

/// Truncated large-`nu` series of the entropy.
#[pyfunction]
fn g_series(nu: f64, terms: usize) -> PyResult<f64> {
    entropy::g_series(nu, terms).map_err(to_py)
}

#[pyfunction]
fn bessel_i0(z: f64) -> f64 {
    bessel::bessel_i0(z)
}

#[pyfunction]
fn holevo_chi(
    input_q: Vec<f64>,
    input_p: Vec<f64>,
    classical_q: Vec<f64>,
    classical_p: Vec<f64>,
    env: &PyEnvironment,
    eta: f64,
) -> PyResult<f64> {
    let input = spectrum(input_q, input_p)?;
    let classical = spectrum(classical_q, classical_p)?;
    channel::holevo_chi(&input, &classical, &env.0, eta).map_err(to_py)
}

#[pyfunction]
fn capacity_all_third(params: &PyChannelParams, env: &PyEnvironment) -> PyResult<f64> {
    kkt::capacity_all_third(&params.0, &env.0).map_err(to_py)
}

/// Water-filling solution of an `n`-use block.
#[pyfunction]
#[pyo3(signature = (params, env, order="exact", algorithm="dynamic"))]
fn solve_kkt(params: &PyChannelParams, env: &PyEnvironment, order: &str, algorithm: &str) -> PyResult<PyKkt> {
    let alg: Algorithm = algorithm.parse().map_err(PyValueError::new_err)?;
    kkt::solve(&params.0, &env.0, self::order(order)?, alg).map(PyKkt).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (eta, n_photons, n_env, s, order="exact"))]
fn solve_one_use(eta: f64, n_photons: f64, n_env: f64, s: f64, order: &str) -> PyResult<PyOneUse> {
    memoryless::solve_one_use(eta, n_photons, n_env, s, self::order(order)?).map(PyOneUse).map_err(to_py)
}

/// Optimal environment squeezing; `None` when it is infinite.
#[pyfunction]
#[pyo3(signature = (eta, n_photons, n_env, s_max=DEFAULT_S_MAX))]
fn optimal_env_squeezing(eta: f64, n_photons: f64, n_env: f64, s_max: f64) -> PyResult<Option<f64>> {
    memoryless::optimal_env_squeezing(eta, n_photons, n_env, s_max).map_err(to_py)
}

#[pyfunction]
fn critical_transmissivity(n_photons: f64, n_env: f64) -> PyResult<f64> {
    memoryless::critical_transmissivity(n_photons, n_env).map_err(to_py)
}

#[pyfunction]
fn w_parameter(eta: f64, n_photons: f64, n_env: f64, s: f64) -> f64 {
    asymptotic::w_parameter(eta, n_photons, n_env, s)
}

#[pyfunction]
#[pyo3(signature = (eta, n_env, s, order="exact", quad_points=DEFAULT_QUAD_PANELS))]
fn n2_threshold(eta: f64, n_env: f64, s: f64, order: &str, quad_points: usize) -> PyResult<f64> {
    asymptotic::n2_threshold(eta, n_env, s, self::order(order)?, quad_points).map_err(to_py)
}

/// Nearest-neighbor memory channel in the limit of infinitely many uses.
#[pyfunction]
#[pyo3(signature = (eta, n_photons, n_env, s, order="exact", quad_points=DEFAULT_QUAD_PANELS))]
fn solve_asymptotic(
    py: Python<'_>,
    eta: f64,
    n_photons: f64,
    n_env: f64,
    s: f64,
    order: &str,
    quad_points: usize,
) -> PyResult<PySpectral> {
    let order = self::order(order)?;
    py.detach(|| asymptotic::solve_asymptotic(eta, n_photons, n_env, s, order, quad_points))
        .map(PySpectral)
        .map_err(to_py)
}

/// Best capacity over environments with `m_env` mean photons; returns
/// `(capacity, s, n_env)`.
#[pyfunction]
#[pyo3(signature = (eta, n_photons, m_env, model="memoryless", order="exact", quad_points=DEFAULT_QUAD_PANELS))]
fn max_over_env(
    py: Python<'_>,
    eta: f64,
    n_photons: f64,
    m_env: f64,
    model: &str,
    order: &str,
    quad_points: usize,
) -> PyResult<(f64, f64, f64)> {
    let kind: EnvKind = model.parse().map_err(PyValueError::new_err)?;
    let order = self::order(order)?;
    let r = py
        .detach(|| asymptotic::max_over_env(eta, n_photons, m_env, kind, order, quad_points))
        .map_err(to_py)?;
    Ok((r.capacity, r.s, r.n_env))
}

/// Brute-force multi-start maximization of chi (n <= 8).
#[pyfunction]
#[pyo3(signature = (params, env, starts=8, iters=2000, seed=oracle::DEFAULT_SEED))]
fn maximize_chi(
    py: Python<'_>,
    params: &PyChannelParams,
    env: &PyEnvironment,
    starts: usize,
    iters: usize,
    seed: u64,
) -> PyResult<PyOracle> {
    let (p, e) = (params.0, env.0.clone());
    py.detach(|| oracle::maximize_chi_seeded(&p, &e, starts, iters, seed)).map(PyOracle).map_err(to_py)
}

/// Runs one acceptance criterion; returns `(passed, detail)`.
#[pyfunction]
fn run_criterion(py: Python<'_>, id: usize) -> (bool, String) {
    let r = py.detach(|| verify::run_criterion(id));
    (r.passed, r.detail)
}

#[pymodule]
fn pygausscap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_class::<PyChannelParams>()?;
    m.add_class::<PyEnvironment>()?;
    m.add_class::<PyKkt>()?;
    m.add_class::<PyOneUse>()?;
    m.add_class::<PySpectral>()?;
    m.add_class::<PyOracle>()?;
    m.add_function(wrap_pyfunction!(g_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(g_series, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_i0, m)?)?;
    m.add_function(wrap_pyfunction!(holevo_chi, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_all_third, m)?)?;
    m.add_function(wrap_pyfunction!(solve_kkt, m)?)?;
    m.add_function(wrap_pyfunction!(solve_one_use, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_env_squeezing, m)?)?;
    m.add_function(wrap_pyfunction!(critical_transmissivity, m)?)?;
    m.add_function(wrap_pyfunction!(w_parameter, m)?)?;
    m.add_function(wrap_pyfunction!(n2_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(solve_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(max_over_env, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_chi, m)?)?;
    m.add_function(wrap_pyfunction!(run_criterion, m)?)?;
    Ok(())
}
