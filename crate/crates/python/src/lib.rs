//! Python extension exposing sdrkit losses, decomposition and metrics.
//!
//! Every call holds the interpreter lock for its whole duration; long
//! signals block the calling thread.

use numpy::{PyArray1, PyReadonlyArray1};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sdrkit::decomp::{self, DbClamp, RatioKind};
use sdrkit::loss::{self, LossConfig, LossId, SirSource};
use sdrkit::metrics::{self, FwConfig, MetricConfig};
use sdrkit::phoneme;
use sdrkit::signal::StftConfig;

create_exception!(sdrkit, SdrkitError, PyValueError, "Error raised by the sdrkit core.");

fn py_err(e: sdrkit::Error) -> PyErr {
    match e {
        sdrkit::Error::FileNotFound(_) | sdrkit::Error::Io(_) => PyOSError::new_err(e.to_string()),
        other => SdrkitError::new_err(other.to_string()),
    }
}

/// A 1-D float array in either precision.
#[derive(FromPyObject)]
pub enum Signal<'py> {
    F64(PyReadonlyArray1<'py, f64>),
    F32(PyReadonlyArray1<'py, f32>),
}

impl Signal<'_> {
    fn is_f32(&self) -> bool {
        matches!(self, Signal::F32(_))
    }

    fn to_f64(&self, name: &str) -> PyResult<Vec<f64>> {
        let contiguous = |e| PyValueError::new_err(format!("{name}: {e}"));
        match self {
            Signal::F64(a) => Ok(a.as_slice().map_err(contiguous)?.to_vec()),
            Signal::F32(a) => Ok(a.as_slice().map_err(contiguous)?.iter().map(|&v| v as f64).collect()),
        }
    }
}

fn triple(est: &Signal, clean: &Signal, noise: &Signal) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let t = (est.to_f64("est")?, clean.to_f64("clean")?, noise.to_f64("noise")?);
    if t.0.is_empty() {
        return Err(SdrkitError::new_err("est is empty"));
    }
    if t.0.len() != t.1.len() || t.0.len() != t.2.len() {
        return Err(SdrkitError::new_err(format!(
            "shape mismatch: est {}, clean {}, noise {}",
            t.0.len(),
            t.1.len(),
            t.2.len()
        )));
    }
    Ok(t)
}

fn ratio_kind(s: &str) -> PyResult<RatioKind> {
    match s.to_ascii_lowercase().as_str() {
        "sdr" => Ok(RatioKind::Sdr),
        "sir" => Ok(RatioKind::Sir),
        "sar" => Ok(RatioKind::Sar),
        _ => Err(PyValueError::new_err(format!("unknown ratio {s:?}"))),
    }
}

/// An immutable loss configuration with forward and backward passes.
#[pyclass(name = "BoundLoss", module = "sdrkit", frozen)]
pub struct BoundLoss {
    inner: loss::Loss,
}

#[pymethods]
impl BoundLoss {
    #[new]
    #[pyo3(signature = (id, *, sample_rate=16000, stft_size=512, hop=256, mel_bands=18, gamma=0.2, clamp=None, oracle_sir=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        id: &str,
        sample_rate: u32,
        stft_size: usize,
        hop: usize,
        mel_bands: usize,
        gamma: f64,
        clamp: Option<(f64, f64)>,
        oracle_sir: bool,
    ) -> PyResult<Self> {
        let id: LossId = id.parse().map_err(py_err)?;
        let clamp = match clamp {
            Some((lo, hi)) => DbClamp::new(lo, hi).map_err(py_err)?,
            None => DbClamp::LOSS,
        };
        let cfg = LossConfig {
            stft: StftConfig::new(stft_size, hop).map_err(py_err)?,
            sample_rate,
            mel_bands,
            gamma,
            clamp,
            sir_source: if oracle_sir { SirSource::Oracle } else { SirSource::Estimate },
            ..LossConfig::new(id)
        };
        Ok(Self { inner: loss::Loss::new(cfg).map_err(py_err)? })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.config().id.to_string()
    }

    /// Loss value for one utterance.
    fn forward(&self, est: Signal, clean: Signal, noise: Signal) -> PyResult<f64> {
        let (e, c, n) = triple(&est, &clean, &noise)?;
        Ok(self.inner.eval(&e, &c, &n).map_err(py_err)?.value)
    }

    /// Gradient with respect to `est`, in the precision of `est`.
    fn backward<'py>(&self, py: Python<'py>, est: Signal, clean: Signal, noise: Signal) -> PyResult<Bound<'py, PyAny>> {
        let (e, c, n) = triple(&est, &clean, &noise)?;
        let g = self.inner.grad(&e, &c, &n).map_err(py_err)?;
        Ok(gradient_array(py, g, est.is_f32()))
    }

    /// `(value, gradient)` from one shared weight computation.
    fn value_and_grad<'py>(
        &self,
        py: Python<'py>,
        est: Signal,
        clean: Signal,
        noise: Signal,
    ) -> PyResult<(f64, Bound<'py, PyAny>)> {
        let (e, c, n) = triple(&est, &clean, &noise)?;
        let (v, g) = self.inner.value_and_grad(&e, &c, &n).map_err(py_err)?;
        Ok((v.value, gradient_array(py, g, est.is_f32())))
    }

    /// Per-bin diagnostics: `sdr_map` for unweighted heads, `weights` for
    /// weighted ones, as lists of rows (bands by frames).
    fn diagnostics<'py>(&self, py: Python<'py>, est: Signal, clean: Signal, noise: Signal) -> PyResult<Bound<'py, PyDict>> {
        let (e, c, n) = triple(&est, &clean, &noise)?;
        let v = self.inner.eval(&e, &c, &n).map_err(py_err)?;
        let rows = |a: &numpy::ndarray::Array2<f64>| -> Vec<Vec<f64>> { a.rows().into_iter().map(|r| r.to_vec()).collect() };
        let d = PyDict::new(py);
        d.set_item("value", v.value)?;
        d.set_item("sdr_map", v.sdr_map.as_ref().map(rows))?;
        d.set_item("weights", v.weights.as_ref().map(|w| rows(&w.w)))?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("BoundLoss({:?})", self.id())
    }
}

fn gradient_array(py: Python<'_>, g: Vec<f64>, f32_out: bool) -> Bound<'_, PyAny> {
    if f32_out {
        PyArray1::from_vec(py, g.into_iter().map(|v| v as f32).collect()).into_any()
    } else {
        PyArray1::from_vec(py, g).into_any()
    }
}

/// Target projection, interference and artifact components of `est`.
#[pyfunction]
fn decompose<'py>(py: Python<'py>, est: Signal, clean: Signal, noise: Signal) -> PyResult<Bound<'py, PyDict>> {
    let (e, c, n) = triple(&est, &clean, &noise)?;
    let d = decomp::decompose(&e, &c, &n).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("s_proj", PyArray1::from_vec(py, d.s_proj))?;
    out.set_item("e_interf", PyArray1::from_vec(py, d.e_interf))?;
    out.set_item("e_artif", PyArray1::from_vec(py, d.e_artif))?;
    Ok(out)
}

/// Time-domain SDR, SIR and SAR in dB.
#[pyfunction]
fn time_ratios<'py>(py: Python<'py>, est: Signal, clean: Signal, noise: Signal) -> PyResult<Bound<'py, PyDict>> {
    let (e, c, n) = triple(&est, &clean, &noise)?;
    let r = decomp::time_ratios(&decomp::decompose(&e, &c, &n).map_err(py_err)?);
    let out = PyDict::new(py);
    out.set_item("sdr", r.sdr_db)?;
    out.set_item("sir", r.sir_db)?;
    out.set_item("sar", r.sar_db)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (est, clean, noise, which="sdr", sample_rate=16000))]
fn fw_ratio(est: Signal, clean: Signal, noise: Signal, which: &str, sample_rate: u32) -> PyResult<f64> {
    let (e, c, n) = triple(&est, &clean, &noise)?;
    let cfg = FwConfig { sample_rate, ..FwConfig::default() };
    metrics::fw_ratio(&e, &c, &n, ratio_kind(which)?, &cfg).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (clean, est, sample_rate=16000))]
fn stoi(clean: Signal, est: Signal, sample_rate: u32) -> PyResult<f64> {
    metrics::stoi(&clean.to_f64("clean")?, &est.to_f64("est")?, sample_rate).map_err(py_err)
}

/// Input and output metric report for single-channel signals.
#[pyfunction]
#[pyo3(signature = (mixture, est, clean, noise, sample_rate=16000, with_stoi=true))]
fn report<'py>(
    py: Python<'py>,
    mixture: Signal,
    est: Signal,
    clean: Signal,
    noise: Signal,
    sample_rate: u32,
    with_stoi: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let (e, c, n) = triple(&est, &clean, &noise)?;
    let m = mixture.to_f64("mixture")?;
    let cfg = MetricConfig {
        fw: FwConfig { sample_rate, ..FwConfig::default() },
        stoi: with_stoi,
        ..MetricConfig::default()
    };
    let r = metrics::report_signals(&m, &e, &c, &n, sample_rate, &cfg).map_err(py_err)?;
    let out = PyDict::new(py);
    for (k, v) in [
        ("sir_in", r.sir_in),
        ("sir_out", r.sir_out),
        ("sar_out", r.sar_out),
        ("sdr_out", r.sdr_out),
        ("fw_sir_in", r.fw_sir_in),
        ("fw_sir_out", r.fw_sir_out),
        ("fw_sar_out", r.fw_sar_out),
        ("fw_sdr_out", r.fw_sdr_out),
    ] {
        out.set_item(k, v)?;
    }
    out.set_item("stoi_in", r.stoi_in)?;
    out.set_item("stoi_out", r.stoi_out)?;
    Ok(out)
}

/// Broad phonetic category of an ARPAbet label.
#[pyfunction]
fn categorize(phone: &str) -> &'static str {
    phoneme::categorize(phone).label()
}

/// Worst relative finite-difference error over `trials` random instances.
#[pyfunction]
#[pyo3(signature = (id, trials=10, length=1024, seed=0))]
fn grad_check(id: &str, trials: usize, length: usize, seed: u64) -> PyResult<f64> {
    let id: LossId = id.parse().map_err(py_err)?;
    Ok(loss::grad_check(&LossConfig::new(id), trials, length, seed).map_err(py_err)?.max_rel_err)
}

#[pyfunction]
fn loss_ids() -> Vec<String> {
    LossId::ALL.iter().map(|id| id.to_string()).collect()
}

#[pymodule]
#[pyo3(name = "sdrkit")]
pub fn sdrkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SdrkitError", m.py().get_type::<SdrkitError>())?;
    m.add_class::<BoundLoss>()?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(time_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(fw_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(stoi, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(categorize, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(loss_ids, m)?)?;
    Ok(())
}
