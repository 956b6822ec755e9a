use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hillnls::classical::solve_fundamental;
use hillnls::config::{RunConfig, SigmaSection};
use hillnls::run::{execute, output_root};
use hillnls::scenario::{find, presets};
use hillnls::Error;

fn config_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn numerical_err(e: Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// `(name, description)` for every preset.
#[pyfunction]
fn scenarios() -> Vec<(String, String)> {
    presets().into_iter().map(|s| (s.name.to_string(), s.description.to_string())).collect()
}

/// Runs a preset, or a TOML configuration given as text, and returns the run
/// directory and the summary as a JSON string.
#[pyfunction]
#[pyo3(signature = (scenario=None, config=None, overrides=Vec::new(), out=None, strict_fp=false))]
fn run(
    scenario: Option<&str>,
    config: Option<&str>,
    overrides: Vec<String>,
    out: Option<PathBuf>,
    strict_fp: bool,
) -> PyResult<(String, String)> {
    let base = match (scenario, config) {
        (Some(name), None) => find(name).map_err(config_err)?.config,
        (None, Some(text)) => RunConfig::from_toml_str(text).map_err(config_err)?,
        _ => return Err(PyValueError::new_err("pass exactly one of scenario= or config=")),
    };
    let cfg = base.with_overrides(&overrides).map_err(config_err)?;
    cfg.resolve().map_err(config_err)?;
    let root = output_root(out.as_deref());
    let record = execute(&cfg, &root, strict_fp).map_err(numerical_err)?;
    let json = serde_json::to_string(&record.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((record.dir.display().to_string(), json))
}

/// Fundamental solutions `(t, ζ₁, ζ₁′, ζ₂, ζ₂′)` at the requested times.
#[pyfunction]
#[pyo3(signature = (model, times, value=None, k=None, tol=1e-12))]
fn classical(model: &str, times: Vec<f64>, value: Option<f64>, k: Option<f64>, tol: f64) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
    let section = SigmaSection { model: model.into(), value, k, regularization: None, table: None };
    let sigma = section.model().map_err(config_err)?;
    let t_max = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let sol = solve_fundamental(&sigma, t_max.max(1e-9), tol).map_err(numerical_err)?;
    times
        .iter()
        .map(|&t| {
            let s = sol.state(t).map_err(numerical_err)?;
            Ok((t, s.zeta1, s.zeta1p, s.zeta2, s.zeta2p))
        })
        .collect()
}

/// Reads a field CSV as `(n, N, L, scale, representation, samples)`.
#[pyfunction]
fn read_field(path: PathBuf) -> PyResult<(usize, usize, f64, f64, String, Vec<Complex64>)> {
    let f = hillnls::io::read_field(&path).map_err(config_err)?;
    let g = *f.grid();
    Ok((g.dim(), g.points(), g.half_width(), f.scale(), f.representation().name().to_string(), f.samples().to_vec()))
}

#[pymodule]
fn hillnls_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(classical, m)?)?;
    m.add_function(wrap_pyfunction!(read_field, m)?)?;
    Ok(())
}
