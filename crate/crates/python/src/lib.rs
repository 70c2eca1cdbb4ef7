//! Python bindings, imported as `stbc_mud`.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stbc_mud::analysis;
use stbc_mud::cxmat::{AlamoutiBlock, ComplexMat};
use stbc_mud::detect::{CancelOptions, DEFAULT_SEARCH_CAP};
use stbc_mud::fading::{self, ChannelRealization, NoiseMode, NoiseModel};
use stbc_mud::harness::{self, DetectorKind, ExportFormat, Suite};
use stbc_mud::stcodes::{self, Constellation};
use stbc_mud::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config { field, msg } => PyValueError::new_err(format!("{field}: {msg}")),
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn detector_from(name: &str) -> PyResult<DetectorKind> {
    serde_json::from_value(serde_json::Value::String(name.into())).map_err(|_| {
        PyValueError::new_err(format!(
            "unknown detector `{name}`; use ml, ap or ap_whitened_ml"
        ))
    })
}

fn detector_name(d: DetectorKind) -> String {
    serde_json::to_value(d)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn rows(m: &ComplexMat) -> Vec<Vec<Complex64>> {
    m.to_rows()
}

fn matrix(rows: Vec<Vec<Complex64>>) -> PyResult<ComplexMat> {
    ComplexMat::from_rows(&rows).map_err(to_py)
}

fn blocks(pairs: Vec<(Complex64, Complex64)>) -> Vec<AlamoutiBlock> {
    pairs
        .into_iter()
        .map(|(a, b)| AlamoutiBlock::new(a, b))
        .collect()
}

/// Simulation configuration. Attribute names follow the JSON fields.
#[pyclass(name = "SimConfig", from_py_object)]
#[derive(Clone)]
pub struct PySimConfig {
    inner: harness::SimConfig,
}

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (users, tx_antennas, rx_antennas, detector, snr_grid_db, seed=0, min_errors=100, max_trials=10_000_000))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        users: usize,
        tx_antennas: usize,
        rx_antennas: usize,
        detector: &str,
        snr_grid_db: Vec<f64>,
        seed: u64,
        min_errors: u64,
        max_trials: u64,
    ) -> PyResult<Self> {
        let mut inner = harness::SimConfig::new(
            users,
            tx_antennas,
            rx_antennas,
            detector_from(detector)?,
            snr_grid_db,
        );
        inner.seed = seed;
        inner.min_errors = min_errors;
        inner.max_trials = max_trials;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        harness::SimConfig::from_json(text)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| to_py(e.into()))
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn users(&self) -> usize {
        self.inner.users
    }
    #[getter]
    fn tx_antennas(&self) -> usize {
        self.inner.tx_antennas
    }
    #[getter]
    fn rx_antennas(&self) -> usize {
        self.inner.rx_antennas
    }
    #[getter]
    fn detector(&self) -> String {
        detector_name(self.inner.detector)
    }
    #[getter]
    fn snr_grid_db(&self) -> Vec<f64> {
        self.inner.snr_grid_db.clone()
    }
    #[setter]
    fn set_snr_grid_db(&mut self, v: Vec<f64>) {
        self.inner.snr_grid_db = v;
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }
    #[getter]
    fn min_errors(&self) -> u64 {
        self.inner.min_errors
    }
    #[setter]
    fn set_min_errors(&mut self, v: u64) {
        self.inner.min_errors = v;
    }
    #[getter]
    fn max_trials(&self) -> u64 {
        self.inner.max_trials
    }
    #[setter]
    fn set_max_trials(&mut self, v: u64) {
        self.inner.max_trials = v;
    }
    #[getter]
    fn threads(&self) -> Option<usize> {
        self.inner.threads
    }
    #[setter]
    fn set_threads(&mut self, v: Option<usize>) {
        self.inner.threads = v;
    }
    #[getter]
    fn noiseless(&self) -> bool {
        self.inner.noiseless
    }
    #[setter]
    fn set_noiseless(&mut self, v: bool) {
        self.inner.noiseless = v;
    }
    #[getter]
    fn target_user(&self) -> usize {
        self.inner.target_user
    }
    #[setter]
    fn set_target_user(&mut self, v: usize) {
        self.inner.target_user = v;
    }
    #[getter]
    fn eps_grid(&self) -> Vec<f64> {
        self.inner.eps_grid.clone()
    }
    #[setter]
    fn set_eps_grid(&mut self, v: Vec<f64>) {
        self.inner.eps_grid = v;
    }
    #[getter]
    fn outage_samples(&self) -> u64 {
        self.inner.outage_samples
    }
    #[setter]
    fn set_outage_samples(&mut self, v: u64) {
        self.inner.outage_samples = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "SimConfig(users={}, tx_antennas={}, rx_antennas={}, detector='{}', snr_grid_db={:?}, seed={})",
            self.inner.users,
            self.inner.tx_antennas,
            self.inner.rx_antennas,
            detector_name(self.inner.detector),
            self.inner.snr_grid_db,
            self.inner.seed
        )
    }
}

/// Result of a BER or outage run.
#[pyclass(name = "RunRecord", from_py_object)]
#[derive(Clone)]
pub struct PyRunRecord {
    inner: harness::RunRecord,
}

#[pymethods]
impl PyRunRecord {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| Self { inner })
            .map_err(|e| to_py(e.into()))
    }

    fn to_json(&self) -> PyResult<String> {
        harness::render(&self.inner, ExportFormat::Json).map_err(to_py)
    }

    fn to_csv(&self) -> PyResult<String> {
        harness::render(&self.inner, ExportFormat::Csv).map_err(to_py)
    }

    /// `(x, y, trials, errors, low_confidence)` per point.
    #[getter]
    fn points(&self) -> Vec<(f64, f64, u64, u64, bool)> {
        self.inner
            .result
            .points
            .iter()
            .map(|p| (p.x, p.y, p.trials, p.errors, p.low_confidence))
            .collect()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.result.label.clone()
    }

    #[getter]
    fn slope(&self) -> Option<f64> {
        self.inner.slope
    }

    #[getter]
    fn wall_time_s(&self) -> f64 {
        self.inner.wall_time_s
    }

    #[getter]
    fn config(&self) -> PySimConfig {
        PySimConfig {
            inner: self.inner.config.clone(),
        }
    }

    /// Negative log-log slope over `[lo, hi]` dB, using points with at
    /// least `min_errors` errors.
    #[pyo3(signature = (lo, hi, min_errors=100))]
    fn diversity(&self, lo: f64, hi: f64, min_errors: u64) -> PyResult<f64> {
        analysis::ber_diversity_estimate(&self.inner.result, (lo, hi), min_errors).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.result.points.len()
    }
}

#[pyfunction]
fn run_ber(py: Python<'_>, config: &PySimConfig) -> PyResult<PyRunRecord> {
    let cfg = config.inner.clone();
    py.detach(|| harness::run_ber(&cfg))
        .map(|inner| PyRunRecord { inner })
        .map_err(to_py)
}

#[pyfunction]
fn run_outage(py: Python<'_>, config: &PySimConfig) -> PyResult<PyRunRecord> {
    let cfg = config.inner.clone();
    py.detach(|| harness::run_outage(&cfg))
        .map(|inner| PyRunRecord { inner })
        .map_err(to_py)
}

/// Runs a property suite; returns `(passed, [(check, value, threshold, passed)])`.
#[pyfunction]
#[pyo3(signature = (suite, seed=1, threads=None))]
#[allow(clippy::type_complexity)]
fn verify(
    py: Python<'_>,
    suite: &str,
    seed: u64,
    threads: Option<usize>,
) -> PyResult<(bool, Vec<(String, f64, f64, bool)>)> {
    let suite = Suite::from_name(suite).map_err(to_py)?;
    let report = py
        .detach(|| harness::run_verify(suite, seed, threads))
        .map_err(to_py)?;
    Ok((
        report.passed,
        report
            .checks
            .into_iter()
            .map(|c| (c.name, c.value, c.threshold, c.passed))
            .collect(),
    ))
}

#[pyfunction]
fn alamouti_encode(symbols: Vec<Complex64>) -> PyResult<Vec<Vec<Complex64>>> {
    stcodes::alamouti_encode(&symbols)
        .map(|m| rows(&m))
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (symbols, rotation=FRAC_PI_4))]
fn qostbc_encode(symbols: Vec<Complex64>, rotation: f64) -> PyResult<Vec<Vec<Complex64>>> {
    stcodes::qostbc_encode(&symbols, rotation)
        .map(|m| rows(&m))
        .map_err(to_py)
}

/// Channel tensor `[user][tx][rx]` of i.i.d. CN(0,1) draws.
#[pyfunction]
#[pyo3(signature = (users, tx, rx, seed, trial=0))]
fn sample_channel(
    users: usize,
    tx: usize,
    rx: usize,
    seed: u64,
    trial: u64,
) -> Vec<Vec<Vec<Complex64>>> {
    let ch = fading::sample_channel(users, tx, rx, &mut fading::trial_rng(seed, 0, trial));
    (0..users).map(|j| ch.user_coeffs(j)).collect()
}

/// Received block `[slot][rx]`; noise is off when `snr_db` is None.
#[pyfunction]
#[pyo3(signature = (codewords, channel, snr_db=None, seed=0))]
fn transmit(
    codewords: Vec<Vec<Vec<Complex64>>>,
    channel: Vec<Vec<Vec<Complex64>>>,
    snr_db: Option<f64>,
    seed: u64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let xs = codewords
        .into_iter()
        .map(matrix)
        .collect::<PyResult<Vec<_>>>()?;
    let ch = ChannelRealization::from_nested(&channel).map_err(to_py)?;
    let noise = match snr_db {
        Some(db) => NoiseMode::Awgn(NoiseModel::from_db(db).map_err(to_py)?),
        None => NoiseMode::Off,
    };
    fading::transmit(&xs, &ch, noise, &mut fading::trial_rng(seed, 1, 0))
        .map(|m| rows(&m))
        .map_err(to_py)
}

/// Constellation indices decided for `target`.
#[pyfunction]
#[pyo3(signature = (received, channel, detector, target=0, noise_var=1.0, constellation="qpsk", rotation=FRAC_PI_4))]
fn detect(
    received: Vec<Vec<Complex64>>,
    channel: Vec<Vec<Vec<Complex64>>>,
    detector: &str,
    target: usize,
    noise_var: f64,
    constellation: &str,
    rotation: f64,
) -> PyResult<Vec<usize>> {
    let ch = ChannelRealization::from_nested(&channel).map_err(to_py)?;
    if target >= ch.users {
        return Err(PyValueError::new_err(format!(
            "target {target} out of range"
        )));
    }
    let q = Constellation::from_name(constellation, rotation).map_err(to_py)?;
    harness::detect_user(
        &matrix(received)?,
        &ch,
        detector_from(detector)?,
        target,
        noise_var,
        &q,
        &CancelOptions::default(),
        DEFAULT_SEARCH_CAP,
    )
    .map_err(to_py)
}

/// Constellation points as complex numbers.
#[pyfunction]
#[pyo3(signature = (name="qpsk"))]
fn constellation_points(name: &str) -> PyResult<Vec<Complex64>> {
    Constellation::from_name(name, 0.0)
        .map(|q| q.points.clone())
        .map_err(to_py)
}

/// `(||H||^2 ||G||^2 - ||H^H G||^2) / ||G||^2` for per-antenna `(a, b)` blocks.
#[pyfunction]
fn chi_square_statistic(
    h: Vec<(Complex64, Complex64)>,
    g: Vec<(Complex64, Complex64)>,
) -> PyResult<f64> {
    analysis::chi_square_statistic(&blocks(h), &blocks(g)).map_err(to_py)
}

#[pyfunction]
fn effective_snr_ap(
    h: Vec<(Complex64, Complex64)>,
    g: Vec<(Complex64, Complex64)>,
    sigma_sq: f64,
) -> PyResult<f64> {
    analysis::effective_snr_ap(&blocks(h), &blocks(g), sigma_sq)
        .map(|b| b.snr_ap)
        .map_err(to_py)
}

#[pyfunction]
fn lemma3_roots(betas: Vec<f64>) -> PyResult<Vec<f64>> {
    analysis::lemma3_roots(&betas).map_err(to_py)
}

#[pyfunction]
fn det_c_closed_form(b: Vec<f64>) -> PyResult<f64> {
    analysis::det_c_closed_form(&b, 3).map_err(to_py)
}

/// `C` (size 4(M-1)) for the real vector `b` of length 4M, as rows.
#[pyfunction]
fn channel_correlation(b: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    if !b.len().is_multiple_of(4) {
        return Err(PyValueError::new_err("length of b must be a multiple of 4"));
    }
    let c = analysis::channel_correlation_c(&b, b.len() / 4).map_err(to_py)?;
    Ok(c.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|z| z.re).collect())
        .collect())
}

#[pymodule(name = "stbc_mud")]
fn stbc_mud_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySimConfig>()?;
    m.add_class::<PyRunRecord>()?;
    m.add_function(wrap_pyfunction!(run_ber, m)?)?;
    m.add_function(wrap_pyfunction!(run_outage, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(alamouti_encode, m)?)?;
    m.add_function(wrap_pyfunction!(qostbc_encode, m)?)?;
    m.add_function(wrap_pyfunction!(sample_channel, m)?)?;
    m.add_function(wrap_pyfunction!(transmit, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(constellation_points, m)?)?;
    m.add_function(wrap_pyfunction!(chi_square_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(effective_snr_ap, m)?)?;
    m.add_function(wrap_pyfunction!(lemma3_roots, m)?)?;
    m.add_function(wrap_pyfunction!(det_c_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(channel_correlation, m)?)?;
    Ok(())
}
