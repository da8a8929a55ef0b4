//! Python bindings for the `bidir_mmse` simulator.

use std::collections::BTreeMap;

use bidir_mmse::analysis::{analytical_curve as curve, sinr_db as quotient_db};
use bidir_mmse::fading::{clarke_autocorrelation as clarke, generate_fading, FadingConfig};
use bidir_mmse::harness::config::parse_pairs;
use bidir_mmse::harness::run::{
    analytical_variant, channel_stats, moments_for, run_analysis_comparison, run_ber_curve, run_sinr_vs_fading,
};
use bidir_mmse::harness::{write_channel_stats, write_csv, ExperimentConfig, KEYS};
use bidir_mmse::receivers::{cg_solve as cg, mmse_oracle};
use bidir_mmse::special::bessel_j0 as j0;
use bidir_mmse::{CMatrix, CVector};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyTuple};

create_exception!(bidir_mmse_py, SimulationError, PyValueError);

fn err(e: bidir_mmse::Error) -> PyErr {
    SimulationError::new_err(e.to_string())
}

/// Python value to the config-file spelling: bools lower-case, sequences comma-joined.
fn config_value(v: &Bound<'_, PyAny>) -> PyResult<String> {
    if v.is_instance_of::<PyBool>() {
        return Ok(if v.extract::<bool>()? { "true" } else { "false" }.into());
    }
    if v.is_instance_of::<PyList>() || v.is_instance_of::<PyTuple>() {
        let parts: PyResult<Vec<String>> = v.try_iter()?.map(|x| config_value(&x?)).collect();
        return Ok(parts?.join(", "));
    }
    Ok(v.str()?.to_string())
}

fn config_pairs(text: &str, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<BTreeMap<String, String>> {
    let mut pairs: BTreeMap<String, String> = parse_pairs(text).map_err(err)?;
    if let Some(d) = overrides {
        for (k, v) in d.iter() {
            pairs.insert(k.extract::<String>()?, config_value(&v)?);
        }
    }
    Ok(pairs)
}

fn build_config(text: &str, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_pairs(&config_pairs(text, overrides)?).map_err(err)
}

enum Output {
    Metrics(Vec<bidir_mmse::harness::records::MetricsRecord>),
    Channel(Vec<bidir_mmse::harness::records::ChannelStatRecord>),
}

fn execute(py: Python<'_>, subcommand: &str, cfg: &ExperimentConfig, threads: Option<usize>) -> PyResult<Output> {
    let job = || -> bidir_mmse::Result<Output> {
        Ok(match subcommand {
            "ber" => Output::Metrics(run_ber_curve(cfg)?),
            "sinr-vs-fading" => Output::Metrics(run_sinr_vs_fading(cfg)?),
            "analyze" => Output::Metrics(run_analysis_comparison(cfg)?),
            "channel-stats" => Output::Channel(channel_stats(cfg)?),
            other => return Err(bidir_mmse::Error::InvalidConfig(format!("unknown subcommand {other:?}"))),
        })
    };
    py.detach(|| match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| bidir_mmse::Error::InvalidConfig(e.to_string()))?
            .install(job),
        None => job(),
    })
    .map_err(err)
}

/// Runs a subcommand and returns the CSV text the command-line tool would write.
#[pyfunction]
#[pyo3(signature = (subcommand, config = "", overrides = None, threads = None))]
fn run(
    py: Python<'_>,
    subcommand: &str,
    config: &str,
    overrides: Option<&Bound<'_, PyDict>>,
    threads: Option<usize>,
) -> PyResult<String> {
    let cfg = build_config(config, overrides)?;
    let mut buf = Vec::new();
    match execute(py, subcommand, &cfg, threads)? {
        Output::Metrics(r) => write_csv(&r, &mut buf).map_err(err)?,
        Output::Channel(r) => write_channel_stats(&r, &mut buf).map_err(err)?,
    }
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Same as `run`, as a list of dicts keyed by CSV column.
#[pyfunction]
#[pyo3(signature = (subcommand, config = "", overrides = None, threads = None))]
fn records<'py>(
    py: Python<'py>,
    subcommand: &str,
    config: &str,
    overrides: Option<&Bound<'py, PyDict>>,
    threads: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = build_config(config, overrides)?;
    let mut out = Vec::new();
    match execute(py, subcommand, &cfg, threads)? {
        Output::Metrics(rs) => {
            for r in rs {
                let d = PyDict::new(py);
                d.set_item("experiment", r.experiment)?;
                d.set_item("algorithm", r.algorithm)?;
                d.set_item("sweep", r.sweep)?;
                d.set_item("symbol", r.symbol)?;
                d.set_item("ber", r.ber)?;
                d.set_item("sinr_db", r.sinr_db)?;
                d.set_item("ci", r.ci)?;
                d.set_item("seed", r.seed)?;
                out.push(d);
            }
        }
        Output::Channel(rs) => {
            for r in rs {
                let d = PyDict::new(py);
                d.set_item("fading_rate", r.fading_rate)?;
                d.set_item("lag", r.lag)?;
                d.set_item("empirical", r.empirical)?;
                d.set_item("theoretical", r.theoretical)?;
                d.set_item("seed", r.seed)?;
                out.push(d);
            }
        }
    }
    Ok(out)
}

/// `(key, default, description)` for every config key.
#[pyfunction]
fn config_keys() -> Vec<(&'static str, &'static str, &'static str)> {
    KEYS.to_vec()
}

/// Analytical SINR learning curve (dB) of an NLMS receiver under the config's ensemble moments.
#[pyfunction]
#[pyo3(signature = (algorithm, config = "", overrides = None, length = None))]
fn analytical_curve(
    py: Python<'_>,
    algorithm: &str,
    config: &str,
    overrides: Option<&Bound<'_, PyDict>>,
    length: Option<usize>,
) -> PyResult<Vec<f64>> {
    let mut pairs = config_pairs(config, overrides)?;
    pairs.insert("algorithms".into(), algorithm.into());
    let cfg = ExperimentConfig::from_pairs(&pairs).map_err(err)?;
    let spec = cfg.algorithms[0].clone();
    let len = length.unwrap_or(cfg.packet_len);
    py.detach(|| {
        let m = moments_for(&cfg)?;
        let (variant, step) = analytical_variant(&spec, &m).ok_or_else(|| {
            bidir_mmse::Error::InvalidConfig(format!("no analytical recursion for {}", spec.label))
        })?;
        curve(&m, variant, step, cfg.g0, len)
    })
    .map_err(err)
}

#[pyfunction]
fn bessel_j0(x: f64) -> f64 {
    j0(x)
}

/// `J₀(2π f m)`.
#[pyfunction]
fn clarke_autocorrelation(normalized_doppler: f64, lag: usize) -> f64 {
    clarke(normalized_doppler, lag)
}

/// Path gains `[path][symbol]` of a Clarke channel with a uniform power profile.
#[pyfunction]
#[pyo3(signature = (normalized_doppler, paths, length, seed = 1))]
fn fading(normalized_doppler: f64, paths: usize, length: usize, seed: u64) -> PyResult<Vec<Vec<Complex64>>> {
    let seq = generate_fading(&FadingConfig::uniform(normalized_doppler, paths, seed), length).map_err(err)?;
    Ok((0..seq.num_paths()).map(|l| seq.path(l).to_vec()).collect())
}

fn matrix(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn vector(v: Vec<Complex64>) -> CVector {
    CVector::from_vec(v)
}

/// Up to `j_max` conjugate-gradient iterations on `R w = t` from `w0` (zero by default).
#[pyfunction]
#[pyo3(signature = (r, t, j_max, w0 = None))]
fn cg_solve(r: Vec<Vec<Complex64>>, t: Vec<Complex64>, j_max: usize, w0: Option<Vec<Complex64>>) -> PyResult<Vec<Complex64>> {
    let r = matrix(r)?;
    let t = vector(t);
    let w0 = w0.map(vector).unwrap_or_else(|| CVector::zeros(t.len()));
    Ok(cg(&r, &t, &w0, j_max).map_err(err)?.iter().copied().collect())
}

/// `R⁻¹ p` by direct solve.
#[pyfunction]
fn mmse_filter(r: Vec<Vec<Complex64>>, p: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    Ok(mmse_oracle(&matrix(r)?, &vector(p)).map_err(err)?.iter().copied().collect())
}

/// `wᴴ R_S w / wᴴ R_I w` in dB.
#[pyfunction]
fn sinr_db(w: Vec<Complex64>, signal: Vec<Vec<Complex64>>, interference: Vec<Vec<Complex64>>) -> PyResult<f64> {
    quotient_db(&vector(w), &matrix(signal)?, &matrix(interference)?).map_err(err)
}

#[pymodule]
fn bidir_mmse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(records, m)?)?;
    m.add_function(wrap_pyfunction!(config_keys, m)?)?;
    m.add_function(wrap_pyfunction!(analytical_curve, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j0, m)?)?;
    m.add_function(wrap_pyfunction!(clarke_autocorrelation, m)?)?;
    m.add_function(wrap_pyfunction!(fading, m)?)?;
    m.add_function(wrap_pyfunction!(cg_solve, m)?)?;
    m.add_function(wrap_pyfunction!(mmse_filter, m)?)?;
    m.add_function(wrap_pyfunction!(sinr_db, m)?)?;
    Ok(())
}
