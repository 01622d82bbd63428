//! Short-time Fourier analysis with an exact adjoint.
//!
//! Frames are taken every `hop` samples from the (optionally zero-padded)
//! signal, multiplied by a periodic window and transformed with a one-sided
//! DFT. The adjoint maps a gradient on the complex bins back to the signal
//! and is what the loss gradients are built on.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const COLA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / N)`.
    #[default]
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: Window,
    /// Zero-pad `fft_size / 2` samples on both ends so frames are centred.
    pub center: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            hop: 256,
            window: Window::Hann,
            center: true,
        }
    }
}

impl StftConfig {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self> {
        let cfg = Self {
            fft_size,
            hop,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || !self.fft_size.is_multiple_of(2) {
            return Err(Error::InvalidStft(format!(
                "fft_size must be even and at least 2, got {}",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(Error::InvalidStft(format!(
                "hop must satisfy 0 < hop <= fft_size, got hop {} for fft_size {}",
                self.hop, self.fft_size
            )));
        }
        Ok(())
    }

    pub fn freq_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    fn pad(&self) -> usize {
        if self.center {
            self.fft_size / 2
        } else {
            0
        }
    }

    pub fn num_frames(&self, signal_len: usize) -> Result<usize> {
        let padded = signal_len + 2 * self.pad();
        if padded < self.fft_size {
            return Err(Error::SignalTooShort {
                len: signal_len,
                fft_size: self.fft_size,
            });
        }
        Ok((padded - self.fft_size) / self.hop + 1)
    }

    /// Steady-state sum of `f(w)` over all frames overlapping one sample, if
    /// it is the same for every phase of the hop.
    fn overlap_sum(&self, f: impl Fn(f64) -> f64) -> Option<f64> {
        let w = self.window.coefficients(self.fft_size);
        let sums: Vec<f64> = (0..self.hop)
            .map(|phase| w.iter().skip(phase).step_by(self.hop).map(|&v| f(v)).sum())
            .collect();
        let first = sums[0];
        let constant = sums
            .iter()
            .all(|s| (s - first).abs() <= COLA_TOL * first.abs().max(1.0));
        constant.then_some(first)
    }

    /// Constant-overlap-add check for the analysis window at this hop.
    pub fn is_cola(&self) -> bool {
        self.overlap_sum(|v| v).is_some_and(|s| s > 0.0)
    }

    /// `C` in `sum_{t,k} c_k |X(k,t)|^2 = C * sum_n x(n)^2`, where `c_k`
    /// doubles the non-DC, non-Nyquist bins. Only exists when the squared
    /// window overlap-adds to a constant (e.g. Hann at a quarter hop; not at
    /// a half hop).
    pub fn parseval_gain(&self) -> Option<f64> {
        self.overlap_sum(|v| v * v)
            .map(|s| s * self.fft_size as f64)
    }
}

/// Complex time-frequency matrix `[freq_bins x frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub bins: Array2<Complex64>,
    pub config: StftConfig,
    pub sample_rate: u32,
    /// Length of the analysed signal, used to size the inverse.
    pub signal_len: usize,
}

impl Spectrogram {
    pub fn power(&self) -> Array2<f64> {
        self.bins.mapv(|c| c.norm_sqr())
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.bins.mapv(|c| c.norm())
    }

    pub fn num_frames(&self) -> usize {
        self.bins.ncols()
    }

    pub fn freq_bins(&self) -> usize {
        self.bins.nrows()
    }
}

/// Precomputed window and FFT plans for one configuration.
#[derive(Clone)]
pub struct StftPlan {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftPlan")
            .field("config", &self.config)
            .finish()
    }
}

impl StftPlan {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            config,
            window: config.window.coefficients(config.fft_size),
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn num_frames(&self, signal_len: usize) -> Result<usize> {
        self.config.num_frames(signal_len)
    }

    /// Analysis; returns the `[freq_bins x frames]` matrix.
    pub fn forward(&self, x: &[f64]) -> Result<Array2<Complex64>> {
        let n = self.config.fft_size;
        let hop = self.config.hop;
        let pad = self.config.pad();
        let frames = self.num_frames(x.len())?;
        let bins = self.config.freq_bins();
        let mut out = Array2::zeros((bins, frames));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            let start = t * hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                let idx = (start + i) as isize - pad as isize;
                let v = if idx >= 0 && (idx as usize) < x.len() {
                    x[idx as usize]
                } else {
                    0.0
                };
                *slot = Complex64::new(v * self.window[i], 0.0);
            }
            self.forward.process(&mut buf);
            for k in 0..bins {
                out[[k, t]] = buf[k];
            }
        }
        Ok(out)
    }

    /// Adjoint of [`forward`](Self::forward) viewed as a real-linear map
    /// from `R^len` to `C^{bins x frames}` with the real inner product
    /// `<A, B> = sum Re(A) Re(B) + Im(A) Im(B)`.
    ///
    /// `grad` holds `dL/dRe + i dL/dIm` per bin; the result is `dL/dx`.
    pub fn adjoint(&self, grad: &Array2<Complex64>, len: usize) -> Result<Vec<f64>> {
        let n = self.config.fft_size;
        let hop = self.config.hop;
        let pad = self.config.pad();
        let frames = self.num_frames(len)?;
        if grad.dim() != (self.config.freq_bins(), frames) {
            return Err(Error::DimensionMismatch(format!(
                "gradient is {:?}, expected {:?}",
                grad.dim(),
                (self.config.freq_bins(), frames)
            )));
        }
        let mut out = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for k in 0..self.config.freq_bins() {
                buf[k] = grad[[k, t]];
            }
            // Unnormalised inverse: sum_k G_k e^{+2 pi i k n / N}.
            self.inverse.process(&mut buf);
            let start = t * hop;
            for (i, c) in buf.iter().enumerate() {
                let idx = (start + i) as isize - pad as isize;
                if idx >= 0 && (idx as usize) < len {
                    out[idx as usize] += self.window[i] * c.re;
                }
            }
        }
        Ok(out)
    }

    /// Weighted overlap-add inverse.
    pub fn inverse(&self, bins: &Array2<Complex64>, len: usize) -> Result<Vec<f64>> {
        if !self.config.is_cola() {
            return Err(Error::InvalidStft(format!(
                "window does not overlap-add to a constant at hop {} / fft_size {}",
                self.config.hop, self.config.fft_size
            )));
        }
        let n = self.config.fft_size;
        let hop = self.config.hop;
        let pad = self.config.pad();
        let frames = bins.ncols();
        if bins.nrows() != self.config.freq_bins() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequency bins, expected {}",
                bins.nrows(),
                self.config.freq_bins()
            )));
        }
        let mut acc = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            for k in 0..n {
                buf[k] = if k <= n / 2 {
                    bins[[k, t]]
                } else {
                    bins[[n - k, t]].conj()
                };
            }
            // DC and Nyquist of a real frame are real.
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            self.inverse.process(&mut buf);
            let start = t * hop;
            for i in 0..n {
                let idx = (start + i) as isize - pad as isize;
                if idx >= 0 && (idx as usize) < len {
                    acc[idx as usize] += buf[i].re / n as f64;
                    norm[idx as usize] += self.window[i];
                }
            }
        }
        let floor = 1e-10 * norm.iter().cloned().fold(0.0, f64::max);
        Ok(acc
            .iter()
            .zip(&norm)
            .map(|(a, w)| if *w > floor { a / w } else { 0.0 })
            .collect())
    }
}

pub fn stft(x: &[f64], config: &StftConfig, sample_rate: u32) -> Result<Spectrogram> {
    let plan = StftPlan::new(*config)?;
    Ok(Spectrogram {
        bins: plan.forward(x)?,
        config: *config,
        sample_rate,
        signal_len: x.len(),
    })
}

pub fn istft(spec: &Spectrogram) -> Result<Vec<f64>> {
    StftPlan::new(spec.config)?.inverse(&spec.bins, spec.signal_len)
}

/// One-sided DFT of the whole signal (a single rectangular frame).
#[derive(Clone)]
pub struct FullDft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FullDft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf.truncate(self.bins());
        buf
    }

    /// Adjoint of [`forward`](Self::forward), same convention as
    /// [`StftPlan::adjoint`].
    pub fn adjoint(&self, grad: &[Complex64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        buf[..grad.len()].copy_from_slice(grad);
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Energy multiplicity of bin `k` in a one-sided spectrum of a real
    /// signal: 1 for DC (and Nyquist when the length is even), 2 otherwise.
    pub fn multiplicity(&self, k: usize) -> f64 {
        if k == 0 || (self.len.is_multiple_of(2) && k == self.len / 2) {
            1.0
        } else {
            2.0
        }
    }
}

/// `sum_k c_k |X_k|^2 / N`, equal to `sum_n x(n)^2` by Parseval.
pub fn onesided_energy(dft: &FullDft, spectrum: &[Complex64]) -> f64 {
    spectrum
        .iter()
        .enumerate()
        .map(|(k, c)| dft.multiplicity(k) * c.norm_sqr())
        .sum::<f64>()
        / dft.len as f64
}
