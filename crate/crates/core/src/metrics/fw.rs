//! Frequency-weighted SDR/SIR/SAR with fixed clean-magnitude weights.

use ndarray::Array2;

use crate::decomp::{bin_ratio_db, decompose, DbClamp, Decomposition, RatioKind};
use crate::error::{Error, Result};
use crate::scales::{band_pool, mel_filterbank, Filterbank, DEFAULT_MEL_BANDS, DEFAULT_MEL_FMAX, DEFAULT_MEL_FMIN};
use crate::signal::{StftConfig, StftPlan};
use crate::weighting::{weights_spectral_magnitude, DEFAULT_GAMMA};

/// Per-band clamp of the frequency-weighted metrics.
pub const FW_CLAMP: DbClamp = DbClamp { lo: -10.0, hi: 35.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct FwConfig {
    pub stft: StftConfig,
    pub sample_rate: u32,
    pub mel_bands: usize,
    pub mel_fmin: f64,
    pub mel_fmax: f64,
    pub gamma: f64,
    pub clamp: DbClamp,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            sample_rate: 16000,
            mel_bands: DEFAULT_MEL_BANDS,
            mel_fmin: DEFAULT_MEL_FMIN,
            mel_fmax: DEFAULT_MEL_FMAX,
            gamma: DEFAULT_GAMMA,
            clamp: FW_CLAMP,
        }
    }
}

/// Frequency-weighted metric evaluator with a precomputed plan and
/// filterbank.
#[derive(Debug, Clone)]
pub struct FwMetric {
    cfg: FwConfig,
    plan: StftPlan,
    fb: Filterbank,
}

impl FwMetric {
    pub fn new(cfg: FwConfig) -> Result<Self> {
        let plan = StftPlan::new(cfg.stft)?;
        let fb = mel_filterbank(
            cfg.stft.fft_size,
            cfg.sample_rate,
            cfg.mel_bands,
            cfg.mel_fmin,
            cfg.mel_fmax.min(cfg.sample_rate as f64 / 2.0),
        )?;
        Ok(Self { cfg, plan, fb })
    }

    pub fn config(&self) -> &FwConfig {
        &self.cfg
    }

    fn pooled_power(&self, x: &[f64]) -> Result<Array2<f64>> {
        band_pool(&self.plan.forward(x)?.mapv(|c| c.norm_sqr()), &self.fb)
    }

    /// Weights `W(b, t)` from the clean reference.
    pub fn weights(&self, clean: &[f64]) -> Result<Array2<f64>> {
        Ok(weights_spectral_magnitude(&self.pooled_power(clean)?, self.cfg.gamma)?.w)
    }

    /// Clamped per-(band, frame) dB map for one ratio.
    pub fn ratio_map(&self, d: &Decomposition, which: RatioKind) -> Result<Array2<f64>> {
        let (num, den) = d.pair(which);
        let pn = self.pooled_power(&num)?;
        let pd = self.pooled_power(&den)?;
        let mut out = pn;
        out.zip_mut_with(&pd, |n, &dv| *n = self.cfg.clamp.apply(bin_ratio_db(*n, dv)));
        Ok(out)
    }

    pub fn ratio_from_decomposition(
        &self,
        d: &Decomposition,
        clean: &[f64],
        which: RatioKind,
    ) -> Result<f64> {
        weighted_frame_mean(&self.ratio_map(d, which)?, &self.weights(clean)?)
    }

    pub fn ratio(&self, est: &[f64], clean: &[f64], noise: &[f64], which: RatioKind) -> Result<f64> {
        let d = decompose(est, clean, noise)?;
        self.ratio_from_decomposition(&d, clean, which)
    }
}

/// Mean over frames of the weight-normalised band average of `ratios`.
/// Frames whose weights are all zero are skipped.
pub fn weighted_frame_mean(ratios: &Array2<f64>, weights: &Array2<f64>) -> Result<f64> {
    if ratios.dim() != weights.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ratio map {:?} vs weights {:?}",
            ratios.dim(),
            weights.dim()
        )));
    }
    let mut sum = 0.0;
    let mut frames = 0usize;
    for (r, w) in ratios.columns().into_iter().zip(weights.columns()) {
        let wsum: f64 = w.sum();
        if wsum > 0.0 {
            sum += r.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>() / wsum;
            frames += 1;
        }
    }
    if frames == 0 {
        return Err(Error::SilentReference(
            "clean reference is silent in every frame".into(),
        ));
    }
    Ok(sum / frames as f64)
}

pub fn fw_ratio(est: &[f64], clean: &[f64], noise: &[f64], which: RatioKind, cfg: &FwConfig) -> Result<f64> {
    FwMetric::new(cfg.clone())?.ratio(est, clean, noise, which)
}
