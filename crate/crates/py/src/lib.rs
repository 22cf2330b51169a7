//! Python bindings for the `delayrate` toolkit.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use delayrate::bound::{build_youla_program, lower_bound_curve as curve, phi_at_order, RatePoint, YoulaOptions, YoulaProgram};
use delayrate::info::gaussian_directed_info_auto;
use delayrate::lqg;
use delayrate::lti::{TwoByTwoPlant, DEFAULT_GRID_SIZE};
use delayrate::sim::{empirical_entropy_rate, operational_rate_point, OperationalRatePoint};
use delayrate::sweep::{self, SweepConfig};
use delayrate::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Infeasible { .. } | Error::InvalidArgument(_) | Error::Config(_) | Error::InvalidPlant(_) | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_plant(plant: Option<&str>) -> PyResult<TwoByTwoPlant> {
    match plant {
        None => Ok(TwoByTwoPlant::unstable_example()),
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("plant: {e}"))),
    }
}

/// Lower-bound point returned to Python.
#[pyclass(name = "RatePoint", frozen, get_all)]
pub struct PyRatePoint {
    h: usize,
    d: f64,
    phi: f64,
    rate_lower_bits: f64,
    n_q: usize,
    sigma_eta_sq: f64,
    sigma_z_sq: f64,
    q: Vec<f64>,
    p: Vec<f64>,
}

impl From<&RatePoint> for PyRatePoint {
    fn from(r: &RatePoint) -> Self {
        Self {
            h: r.h,
            d: r.d,
            phi: r.phi,
            rate_lower_bits: r.rate_lower_bits,
            n_q: r.n_q,
            sigma_eta_sq: r.sigma_eta_sq,
            sigma_z_sq: r.sigma_z_sq,
            q: r.q.clone(),
            p: r.p.clone(),
        }
    }
}

#[pymethods]
impl PyRatePoint {
    fn __repr__(&self) -> String {
        format!("RatePoint(h={}, D={}, phi={}, rate_lower_bits={})", self.h, self.d, self.phi, self.rate_lower_bits)
    }
}

#[pyclass(name = "OperationalPoint", frozen, get_all)]
pub struct PyOperationalPoint {
    h: usize,
    d: f64,
    delta: f64,
    rate_bits: f64,
    ci_rate: f64,
    sigma_z_sq: f64,
    ci_var: f64,
    sigma_z_analytic: f64,
    steps: usize,
    seed: u64,
}

impl From<OperationalRatePoint> for PyOperationalPoint {
    fn from(o: OperationalRatePoint) -> Self {
        Self {
            h: o.h,
            d: o.d,
            delta: o.delta,
            rate_bits: o.rate_bits,
            ci_rate: o.ci_rate,
            sigma_z_sq: o.sigma_z_sq,
            ci_var: o.ci_var,
            sigma_z_analytic: o.sigma_z_analytic,
            steps: o.steps,
            seed: o.seed,
        }
    }
}

fn program(plant: &TwoByTwoPlant, h: usize, n_q: usize, grid_size: usize) -> Result<YoulaProgram, Error> {
    let floor = lqg::d_inf(plant, h)?;
    build_youla_program(plant, h, &floor.observer, YoulaOptions { grid_size, n_q, n_q_max: n_q })
}

/// Performance floor `D_inf(h)`.
#[pyfunction]
#[pyo3(signature = (h, plant=None))]
fn d_inf(py: Python<'_>, h: usize, plant: Option<&str>) -> PyResult<f64> {
    let plant = parse_plant(plant)?;
    py.detach(|| lqg::d_inf(&plant, h)).map(|f| f.value).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (h, d, plant=None, n_q=32, grid_size=DEFAULT_GRID_SIZE))]
fn lower_bound(py: Python<'_>, h: usize, d: f64, plant: Option<&str>, n_q: usize, grid_size: usize) -> PyResult<PyRatePoint> {
    let plant = parse_plant(plant)?;
    py.detach(|| {
        let prog = program(&plant, h, n_q, grid_size)?;
        phi_at_order(&prog, d, n_q)
    })
    .map(|p| PyRatePoint::from(&p))
    .map_err(to_py_err)
}

/// Bound at each `D` in `ds`; infeasible levels come back as `None`.
#[pyfunction]
#[pyo3(signature = (h, ds, plant=None, n_q=32, grid_size=DEFAULT_GRID_SIZE))]
fn lower_bound_curve(
    py: Python<'_>,
    h: usize,
    ds: Vec<f64>,
    plant: Option<&str>,
    n_q: usize,
    grid_size: usize,
) -> PyResult<Vec<Option<PyRatePoint>>> {
    let plant = parse_plant(plant)?;
    let points = py.detach(|| -> Result<_, Error> {
        let prog = program(&plant, h, n_q, grid_size)?;
        Ok(curve(&prog, &ds))
    });
    Ok(points.map_err(to_py_err)?.iter().map(|p| p.as_ref().ok().map(PyRatePoint::from)).collect())
}

/// Dithered-quantizer simulation of the optimal design at `D`.
#[pyfunction]
#[pyo3(signature = (h, d, steps=1_000_000, seed=1, markov_order=1, plant=None, n_q=32))]
fn operational_rate(
    py: Python<'_>,
    h: usize,
    d: f64,
    steps: usize,
    seed: u64,
    markov_order: usize,
    plant: Option<&str>,
    n_q: usize,
) -> PyResult<PyOperationalPoint> {
    let plant = parse_plant(plant)?;
    py.detach(|| {
        let prog = program(&plant, h, n_q, DEFAULT_GRID_SIZE)?;
        let point = phi_at_order(&prog, d, n_q)?;
        operational_rate_point(&prog, &point, steps, seed, markov_order)
    })
    .map(PyOperationalPoint::from)
    .map_err(to_py_err)
}

/// Order-`m` conditional entropy of a symbol stream, bits per symbol.
#[pyfunction]
fn entropy_rate(symbols: Vec<i64>, m: usize) -> PyResult<f64> {
    empirical_entropy_rate(&symbols, m).map_err(to_py_err)
}

/// Gaussian estimate of the directed information rate from `y` to `u` with delay `h`, in bits.
#[pyfunction]
fn directed_info(py: Python<'_>, y: Vec<f64>, u: Vec<f64>, h: usize) -> PyResult<f64> {
    py.detach(|| gaussian_directed_info_auto(&y, &u, h)).map(|e| e.bits()).map_err(to_py_err)
}

/// Runs a sweep from a JSON configuration and returns the CSV text; also
/// writes the output files when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir=None))]
fn run_sweep(py: Python<'_>, config_json: &str, out_dir: Option<PathBuf>) -> PyResult<String> {
    let cfg = SweepConfig::from_json(config_json).map_err(to_py_err)?;
    py.detach(|| {
        let result = sweep::run_sweep(&cfg)?;
        if let Some(dir) = &out_dir {
            sweep::emit_outputs(&result, dir)?;
        }
        sweep::csv_string(&result)
    })
    .map_err(to_py_err)
}

#[pymodule]
fn delayrate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRatePoint>()?;
    m.add_class::<PyOperationalPoint>()?;
    m.add_function(wrap_pyfunction!(d_inf, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_curve, m)?)?;
    m.add_function(wrap_pyfunction!(operational_rate, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_rate, m)?)?;
    m.add_function(wrap_pyfunction!(directed_info, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add("CSV_HEADER", sweep::CSV_HEADER)?;
    Ok(())
}
