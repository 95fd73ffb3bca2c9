//! Python module `floqmem_py`.
//!
//! Structured results are returned as JSON strings; `json.loads` them on the
//! Python side.

use floqmem::analysis::{sweep_point, SweepSettings};
use floqmem::floquet::{
    auto_n_max, find_crossings, floquet_solve, fourier_coefficients, CrossingSearch,
};
use floqmem::qubit::from_basis;
use floqmem::{heom, BathModel, BlochVector, DriveSpec, Error, HeomSettings, RunConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidState(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn drive(amplitude: f64, omega: f64, omega0: f64) -> PyResult<DriveSpec> {
    let d = DriveSpec {
        omega0,
        omega,
        amplitude,
    };
    d.validate().map_err(py_err)?;
    Ok(d)
}

fn bath(alpha: f64, omega_c: f64, beta: f64) -> PyResult<BathModel> {
    BathModel::new(alpha, omega_c, beta).map_err(py_err)
}

#[pyfunction]
fn version() -> &'static str {
    floqmem::VERSION
}

/// Quasienergies `(eps1, eps2)` in `[-omega/2, omega/2)`.
#[pyfunction]
#[pyo3(signature = (amplitude, omega=1.0, omega0=1.0, n_t=512))]
fn quasienergies(amplitude: f64, omega: f64, omega0: f64, n_t: usize) -> PyResult<(f64, f64)> {
    let sol = floquet_solve(&drive(amplitude, omega, omega0)?, n_t).map_err(py_err)?;
    Ok((sol.quasienergies[0], sol.quasienergies[1]))
}

/// Fourier coefficient `c^n_ij` of `σ_x` in the Floquet basis, as `(re, im)`.
#[pyfunction]
#[pyo3(signature = (amplitude, n, i, j, omega=1.0, omega0=1.0, n_t=512))]
fn coefficient(
    amplitude: f64,
    n: i32,
    i: usize,
    j: usize,
    omega: f64,
    omega0: f64,
    n_t: usize,
) -> PyResult<(f64, f64)> {
    if i > 1 || j > 1 {
        return Err(PyValueError::new_err("i and j must be 0 or 1"));
    }
    let d = drive(amplitude, omega, omega0)?;
    let sol = floquet_solve(&d, n_t).map_err(py_err)?;
    let table = fourier_coefficients(&sol, auto_n_max(&d).max(n.abs())).map_err(py_err)?;
    let c = table.get(n, i, j);
    Ok((c.re, c.im))
}

/// Refined quasienergy crossings in `[start, stop]`.
#[pyfunction]
#[pyo3(signature = (start, stop, omega=1.0, step=0.01))]
fn crossings(start: f64, stop: f64, omega: f64, step: f64) -> PyResult<Vec<f64>> {
    let mut search = CrossingSearch::new(omega, start, stop);
    search.step = step;
    find_crossings(&search).map_err(py_err)
}

/// Bath transition rate `J(w)(1 + N(w))`.
#[pyfunction]
#[pyo3(signature = (w, alpha=0.1, omega_c=1.0, beta=1.0))]
fn rate(w: f64, alpha: f64, omega_c: f64, beta: f64) -> PyResult<f64> {
    Ok(bath(alpha, omega_c, beta)?.rate(w))
}

/// HEOM trajectory from a Floquet-basis Bloch vector. Returns
/// `(times, lab Bloch vectors)`.
#[pyfunction]
#[pyo3(signature = (amplitude, bloch, t_end, dt=0.05, alpha=0.1, omega_c=1.0, beta=1.0, tier=6, pade_terms=2))]
#[allow(clippy::too_many_arguments)]
fn heom_evolve(
    amplitude: f64,
    bloch: [f64; 3],
    t_end: f64,
    dt: f64,
    alpha: f64,
    omega_c: f64,
    beta: f64,
    tier: usize,
    pade_terms: usize,
) -> PyResult<(Vec<f64>, Vec<[f64; 3]>)> {
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(PyValueError::new_err("dt and t_end must be positive"));
    }
    let d = drive(amplitude, 1.0, 1.0)?;
    let b = bath(alpha, omega_c, beta)?;
    let sol = floquet_solve(&d, 512).map_err(py_err)?;
    let [x, y, z] = bloch;
    let rho0 = from_basis(&BlochVector::new(x, y, z).to_matrix(), &sol.basis());
    let settings = HeomSettings {
        tier,
        pade_terms: Some(pade_terms),
        ..HeomSettings::default()
    };
    let steps = (t_end / dt).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let (traj, _) = heom::heom_evolve(&d, &b, &rho0, &settings, &grid, None).map_err(py_err)?;
    let states = traj
        .states()
        .iter()
        .map(|m| BlochVector::from_matrix(m).to_array())
        .collect();
    Ok((traj.times, states))
}

/// One sweep point (non-Markovianity, relaxation fit) as JSON.
#[pyfunction]
#[pyo3(signature = (amplitude, alpha=0.1, n_pairs=1000, seed=0))]
fn analyse_point(amplitude: f64, alpha: f64, n_pairs: usize, seed: u64) -> PyResult<String> {
    let d = drive(amplitude, 1.0, 1.0)?;
    let b = bath(alpha, 1.0, 1.0)?;
    let settings = SweepSettings {
        n_pairs,
        seed,
        ..SweepSettings::default()
    };
    settings.validate().map_err(py_err)?;
    let mut p = sweep_point(&d, &b, &settings, 0).map_err(py_err)?;
    p.curve.times.clear();
    p.curve.values.clear();
    serde_json::to_string(&p).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Validates a JSON run configuration and returns it with defaults filled.
#[pyfunction]
fn resolve_config(text: &str) -> PyResult<String> {
    Ok(RunConfig::from_json(text).map_err(py_err)?.to_json())
}

#[pymodule]
fn floqmem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(quasienergies, m)?)?;
    m.add_function(wrap_pyfunction!(coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(crossings, m)?)?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(heom_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(analyse_point, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_config, m)?)?;
    Ok(())
}
