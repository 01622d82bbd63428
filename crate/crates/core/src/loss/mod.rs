//! The SDR loss catalog (time, frequency and time-frequency domains, linear
//! and mel scales, four weighting families) with exact analytic gradients.
//!
//! Every loss is `-(SDR-like value)`, so minimising it raises the ratio.
//! Estimates are split as `est = s_proj + e_dist` with `s_proj` the
//! projection on the clean reference; both parts are linear in `est`, which
//! is what makes the gradient a chain of adjoints:
//!
//! ```text
//! est -> (s_proj, e_dist) -> STFT -> |.|^2 -> band pooling -> head
//! ```
//!
//! Weight maps are treated as constants when differentiating.

mod check;
mod config;

pub use check::{grad_check, GradCheckReport};
pub use config::{Domain, LossConfig, LossId, SirSource, SpectralScale, WeightingKind};

use std::f64::consts::LN_10;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::decomp::{bin_ratio_db, decompose, ENERGY_FLOOR};
use crate::error::{Error, Result};
use crate::scales::{ansi_band_importance, band_pool, mel_filterbank, BandImportance, Filterbank};
use crate::signal::{dot, energy, FullDft, StftPlan};
use crate::weighting::{
    sir_db_to_linear, weights_ansi, weights_sir_softmax, weights_spectral_magnitude, SirSoftmax,
    WeightMap, SIR_CLAMP_DB,
};

/// Absolute floor on the weighted sums of the weighted head.
pub const WEIGHTED_SUM_FLOOR: f64 = 1e-12;

const DB_PER_NEPER: f64 = 10.0 / LN_10;

/// A loss value with optional per-bin diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Clamped per-bin SDR map for the unweighted heads.
    pub sdr_map: Option<Array2<f64>>,
    /// Weights used by the weighted head.
    pub weights: Option<WeightMap>,
}

/// A ready-to-evaluate loss: configuration plus precomputed STFT plan and
/// filterbank.
#[derive(Debug, Clone)]
pub struct Loss {
    cfg: LossConfig,
    plan: StftPlan,
    filterbank: Option<Filterbank>,
    importance: BandImportance,
}

/// Intermediate spectra of one forward pass, kept for the backward pass.
struct TfForward {
    sp: Array2<Complex64>,
    ed: Array2<Complex64>,
    qp: Array2<f64>,
    qd: Array2<f64>,
}

impl Loss {
    pub fn new(cfg: LossConfig) -> Result<Self> {
        cfg.clamp_check()?;
        let plan = StftPlan::new(cfg.stft)?;
        let filterbank = match cfg.scale() {
            SpectralScale::Mel => Some(mel_filterbank(
                cfg.stft.fft_size,
                cfg.sample_rate,
                cfg.mel_bands,
                cfg.mel_fmin,
                cfg.mel_fmax.min(cfg.sample_rate as f64 / 2.0),
            )?),
            _ => None,
        };
        Ok(Self {
            cfg,
            plan,
            filterbank,
            importance: ansi_band_importance(),
        })
    }

    /// Replaces the mel filterbank (mel-scale losses only).
    pub fn with_filterbank(mut self, fb: Filterbank) -> Result<Self> {
        if self.cfg.scale() != SpectralScale::Mel {
            return Err(Error::InvalidArgument(format!(
                "{} has no spectral pooling",
                self.cfg.id
            )));
        }
        if fb.num_bins() != self.cfg.stft.freq_bins() {
            return Err(Error::DimensionMismatch(format!(
                "filterbank has {} bins, STFT has {}",
                fb.num_bins(),
                self.cfg.stft.freq_bins()
            )));
        }
        self.filterbank = Some(fb);
        Ok(self)
    }

    pub fn config(&self) -> &LossConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> Option<&Filterbank> {
        self.filterbank.as_ref()
    }

    fn pool(&self, power: Array2<f64>) -> Result<Array2<f64>> {
        match &self.filterbank {
            Some(fb) => band_pool(&power, fb),
            None => Ok(power),
        }
    }

    fn power(&self, x: &[f64]) -> Result<Array2<f64>> {
        self.pool(self.plan.forward(x)?.mapv(|c| c.norm_sqr()))
    }

    fn check_inputs(est: &[f64], clean: &[f64], noise: &[f64]) -> Result<()> {
        if est.is_empty() {
            return Err(Error::InvalidArgument("empty signal".into()));
        }
        if est.len() != clean.len() || est.len() != noise.len() {
            return Err(Error::DimensionMismatch(format!(
                "est {}, clean {}, noise {} samples",
                est.len(),
                clean.len(),
                noise.len()
            )));
        }
        if [est, clean, noise].iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite input samples".into()));
        }
        Ok(())
    }

    /// Weight map for the current inputs, or `None` for unweighted losses.
    pub fn weights(&self, est: &[f64], clean: &[f64], noise: &[f64]) -> Result<Option<WeightMap>> {
        Self::check_inputs(est, clean, noise)?;
        let frames = || self.plan.num_frames(est.len());
        let sir_map = || -> Result<Array2<f64>> {
            let (num, den) = match self.cfg.sir_source {
                SirSource::Estimate => {
                    let d = decompose(est, clean, noise)?;
                    (self.power(&d.s_proj)?, self.power(&d.e_interf)?)
                }
                SirSource::Oracle => (self.power(clean)?, self.power(noise)?),
            };
            let mut out = num;
            out.zip_mut_with(&den, |n, &d| {
                *n = bin_ratio_db(*n, d).clamp(SIR_CLAMP_DB.0, SIR_CLAMP_DB.1)
            });
            Ok(out)
        };
        let w = match self.cfg.weighting() {
            WeightingKind::None => return Ok(None),
            WeightingKind::SpectralMagnitude => {
                weights_spectral_magnitude(&self.power(clean)?, self.cfg.gamma)?
            }
            WeightingKind::Ansi => {
                let bands = self.filterbank.as_ref().map_or(0, Filterbank::num_bands);
                weights_ansi(&self.importance, bands, frames()?)?
            }
            WeightingKind::NegSir => weights_sir_softmax(&sir_map()?, SirSoftmax::NegSir)?,
            WeightingKind::NegLogSir => weights_sir_softmax(
                &sir_map()?.mapv(sir_db_to_linear),
                SirSoftmax::NegLogSir,
            )?,
        };
        Ok(Some(w))
    }

    pub fn eval(&self, est: &[f64], clean: &[f64], noise: &[f64]) -> Result<LossValue> {
        let weights = self.weights(est, clean, noise)?;
        self.eval_with_weights(est, clean, noise, weights)
    }

    /// Evaluates with caller-supplied weights (ignored by unweighted losses).
    pub fn eval_with_weights(
        &self,
        est: &[f64],
        clean: &[f64],
        noise: &[f64],
        weights: Option<WeightMap>,
    ) -> Result<LossValue> {
        Self::check_inputs(est, clean, noise)?;
        let d = decompose(est, clean, noise)?;
        let e_dist = d.e_dist();
        match self.cfg.domain() {
            Domain::Time => {
                let (a, b) = (energy(&d.s_proj), energy(&e_dist));
                let db = self.cfg.clamp.apply(bin_ratio_db(a, b));
                Ok(LossValue {
                    value: -db,
                    sdr_map: Some(Array2::from_elem((1, 1), db)),
                    weights: None,
                })
            }
            Domain::Frequency => {
                let dft = FullDft::new(est.len());
                let qp = power_column(&dft.forward(&d.s_proj));
                let qd = power_column(&dft.forward(&e_dist));
                let map = self.clamped_map(&qp, &qd);
                Ok(LossValue {
                    value: -map.mean().unwrap_or(0.0),
                    sdr_map: Some(map),
                    weights: None,
                })
            }
            Domain::Tf => {
                let qp = self.power(&d.s_proj)?;
                let qd = self.power(&e_dist)?;
                match weights {
                    None if self.cfg.weighting() == WeightingKind::None => {
                        let map = self.clamped_map(&qp, &qd);
                        Ok(LossValue {
                            value: -map.mean().unwrap_or(0.0),
                            sdr_map: Some(map),
                            weights: None,
                        })
                    }
                    None => Err(Error::InvalidArgument(format!(
                        "{} requires a weight map",
                        self.cfg.id
                    ))),
                    Some(w) => {
                        check_weight_shape(&w, &qp)?;
                        let (num, den) = weighted_sums(&w, &qp, &qd);
                        Ok(LossValue {
                            value: -10.0 * (num / den).log10(),
                            sdr_map: None,
                            weights: Some(w),
                        })
                    }
                }
            }
        }
    }

    fn clamped_map(&self, qp: &Array2<f64>, qd: &Array2<f64>) -> Array2<f64> {
        crate::decomp::ratio_map(qp, qd, self.cfg.clamp)
    }

    /// Gradient of [`eval`](Self::eval) with respect to `est`, weights held
    /// constant at their value for the given inputs.
    pub fn grad(&self, est: &[f64], clean: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        let weights = self.weights(est, clean, noise)?;
        self.grad_with_weights(est, clean, noise, weights.as_ref())
    }

    pub fn value_and_grad(
        &self,
        est: &[f64],
        clean: &[f64],
        noise: &[f64],
    ) -> Result<(LossValue, Vec<f64>)> {
        let weights = self.weights(est, clean, noise)?;
        let g = self.grad_with_weights(est, clean, noise, weights.as_ref())?;
        let v = self.eval_with_weights(est, clean, noise, weights)?;
        Ok((v, g))
    }

    pub fn grad_with_weights(
        &self,
        est: &[f64],
        clean: &[f64],
        noise: &[f64],
        weights: Option<&WeightMap>,
    ) -> Result<Vec<f64>> {
        Self::check_inputs(est, clean, noise)?;
        let d = decompose(est, clean, noise)?;
        let e_dist = d.e_dist();
        let cc = energy(clean);
        // Gradients with respect to s_proj and e_dist.
        let (g_sp, g_ed) = match self.cfg.domain() {
            Domain::Time => {
                let (a, b) = (energy(&d.s_proj), energy(&e_dist));
                let (ga, gb) = self.bin_mean_grads_scalar(a, b);
                (
                    d.s_proj.iter().map(|v| 2.0 * ga * v).collect::<Vec<_>>(),
                    e_dist.iter().map(|v| 2.0 * gb * v).collect::<Vec<_>>(),
                )
            }
            Domain::Frequency => {
                let dft = FullDft::new(est.len());
                let sp = dft.forward(&d.s_proj);
                let ed = dft.forward(&e_dist);
                let (gqp, gqd) = self.bin_mean_grads(&power_column(&sp), &power_column(&ed));
                let back = |spec: &[Complex64], g: &Array2<f64>| {
                    let gs: Vec<Complex64> =
                        spec.iter().enumerate().map(|(k, c)| c * (2.0 * g[[k, 0]])).collect();
                    dft.adjoint(&gs)
                };
                (back(&sp, &gqp), back(&ed, &gqd))
            }
            Domain::Tf => {
                let fwd = self.tf_forward(&d.s_proj, &e_dist)?;
                let (gqp, gqd) = match weights {
                    None if self.cfg.weighting() == WeightingKind::None => {
                        self.bin_mean_grads(&fwd.qp, &fwd.qd)
                    }
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "{} requires a weight map",
                            self.cfg.id
                        )))
                    }
                    Some(w) => {
                        check_weight_shape(w, &fwd.qp)?;
                        weighted_grads(w, &fwd.qp, &fwd.qd)
                    }
                };
                (
                    self.tf_backward(&fwd.sp, &gqp, est.len())?,
                    self.tf_backward(&fwd.ed, &gqd, est.len())?,
                )
            }
        };
        // s_proj = P x and e_dist = (I - P) x with P the projection on
        // clean, so dL/dx = g_ed + P (g_sp - g_ed).
        let diff: Vec<f64> = g_sp.iter().zip(&g_ed).map(|(a, b)| a - b).collect();
        let coef = dot(&diff, clean) / cc;
        Ok(g_ed
            .iter()
            .zip(clean)
            .map(|(g, c)| g + coef * c)
            .collect())
    }

    fn tf_forward(&self, s_proj: &[f64], e_dist: &[f64]) -> Result<TfForward> {
        let sp = self.plan.forward(s_proj)?;
        let ed = self.plan.forward(e_dist)?;
        let qp = self.pool(sp.mapv(|c| c.norm_sqr()))?;
        let qd = self.pool(ed.mapv(|c| c.norm_sqr()))?;
        Ok(TfForward {
            sp,
            ed,
            qp,
            qd,
        })
    }

    /// Pulls a gradient on pooled power back to the complex spectrum and
    /// then to the signal.
    fn tf_backward(
        &self,
        spec: &Array2<Complex64>,
        g_pooled: &Array2<f64>,
        len: usize,
    ) -> Result<Vec<f64>> {
        let g_power = match &self.filterbank {
            Some(fb) => fb.weights().t().dot(g_pooled),
            None => g_pooled.clone(),
        };
        let mut g_spec = spec.clone();
        g_spec.zip_mut_with(&g_power, |c, &g| *c *= 2.0 * g);
        self.plan.adjoint(&g_spec, len)
    }

    /// Scalar version of [`bin_mean_grads`](Self::bin_mean_grads) for a
    /// single bin.
    fn bin_mean_grads_scalar(&self, a: f64, b: f64) -> (f64, f64) {
        let qp = Array2::from_elem((1, 1), a);
        let qd = Array2::from_elem((1, 1), b);
        let (gp, gd) = self.bin_mean_grads(&qp, &qd);
        (gp[[0, 0]], gd[[0, 0]])
    }

    /// Gradients of `-mean(clamp(10 log10(qp / qd)))` with respect to both
    /// power maps. Clamped bins and bins on the energy floor are constant
    /// and contribute nothing.
    fn bin_mean_grads(&self, qp: &Array2<f64>, qd: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let scale = -DB_PER_NEPER / qp.len() as f64;
        let mut gqp = Array2::zeros(qp.dim());
        let mut gqd = Array2::zeros(qd.dim());
        for ((idx, &p), &d) in qp.indexed_iter().zip(qd.iter()) {
            if d <= ENERGY_FLOOR * p || p <= 0.0 {
                continue;
            }
            if self.cfg.clamp.is_active(10.0 * (p / d).log10()) {
                continue;
            }
            gqp[idx] = scale / p;
            gqd[idx] = -scale / d;
        }
        (gqp, gqd)
    }
}

impl LossConfig {
    fn clamp_check(&self) -> Result<()> {
        crate::decomp::DbClamp::new(self.clamp.lo, self.clamp.hi).map(|_| ())
    }
}

fn power_column(spec: &[Complex64]) -> Array2<f64> {
    Array2::from_shape_fn((spec.len(), 1), |(k, _)| spec[k].norm_sqr())
}

fn check_weight_shape(w: &WeightMap, q: &Array2<f64>) -> Result<()> {
    if w.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight map is {:?}, power map is {:?}",
            w.dim(),
            q.dim()
        )));
    }
    Ok(())
}

fn weighted_sums(w: &WeightMap, qp: &Array2<f64>, qd: &Array2<f64>) -> (f64, f64) {
    let num: f64 = w.w.iter().zip(qp.iter()).map(|(a, b)| a * b).sum();
    let den: f64 = w.w.iter().zip(qd.iter()).map(|(a, b)| a * b).sum();
    (num.max(WEIGHTED_SUM_FLOOR), den.max(WEIGHTED_SUM_FLOOR))
}

/// Gradients of `-10 log10(sum w qp / sum w qd)`.
fn weighted_grads(w: &WeightMap, qp: &Array2<f64>, qd: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let num: f64 = w.w.iter().zip(qp.iter()).map(|(a, b)| a * b).sum();
    let den: f64 = w.w.iter().zip(qd.iter()).map(|(a, b)| a * b).sum();
    let gp = if num > WEIGHTED_SUM_FLOOR {
        w.w.mapv(|v| -DB_PER_NEPER * v / num)
    } else {
        Array2::zeros(w.dim())
    };
    let gd = if den > WEIGHTED_SUM_FLOOR {
        w.w.mapv(|v| DB_PER_NEPER * v / den)
    } else {
        Array2::zeros(w.dim())
    };
    (gp, gd)
}

pub fn loss_eval(cfg: &LossConfig, est: &[f64], clean: &[f64], noise: &[f64]) -> Result<LossValue> {
    Loss::new(cfg.clone())?.eval(est, clean, noise)
}

pub fn loss_grad(cfg: &LossConfig, est: &[f64], clean: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    Loss::new(cfg.clone())?.grad(est, clean, noise)
}

/// One utterance of a batch: `(est, clean, noise)`.
pub type Triple<'a> = (&'a [f64], &'a [f64], &'a [f64]);

/// Mean of per-utterance losses, evaluated in parallel and reduced in input
/// order.
pub fn batch_loss(loss: &Loss, batch: &[Triple<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let values: Vec<f64> = batch
        .par_iter()
        .map(|(e, c, n)| loss.eval(e, c, n).map(|v| v.value))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
