//! Time-frequency weight maps: spectral-magnitude, band-importance, and the
//! softmax SIR schemes.

use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scales::BandImportance;

/// Bounds applied to SIR maps before they are turned into weights.
pub const SIR_CLAMP_DB: (f64, f64) = (-60.0, 60.0);
pub const SIR_LINEAR_FLOOR: f64 = 1e-6;
pub const SIR_LINEAR_CEIL: f64 = 1e6;

/// Exponent of the spectral-magnitude weights.
pub const DEFAULT_GAMMA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    None,
    /// Every column (frame) sums to one.
    PerFrame,
    /// The whole map sums to one.
    Global,
}

/// Nonnegative weights over `[bands_or_bins x frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub w: Array2<f64>,
    pub normalized: Normalization,
}

impl WeightMap {
    pub fn new(w: Array2<f64>, normalized: Normalization) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { w, normalized })
    }

    pub fn constant(shape: (usize, usize), value: f64) -> Result<Self> {
        Self::new(Array2::from_elem(shape, value), Normalization::None)
    }

    pub fn dim(&self) -> (usize, usize) {
        self.w.dim()
    }

    /// Writes `band,frame,weight` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["band", "frame", "weight"])?;
        for ((b, t), v) in self.w.indexed_iter() {
            w.write_record([b.to_string(), t.to_string(), crate::format::sig6(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `w = |S|^gamma` from a clean power map `|S|^2` (band-pooled power for
/// banded scales). Left unnormalised.
pub fn weights_spectral_magnitude(clean_power: &Array2<f64>, gamma: f64) -> Result<WeightMap> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    if clean_power.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidWeights(
            "power map has negative or NaN entries".into(),
        ));
    }
    WeightMap::new(clean_power.mapv(|p| p.powf(gamma / 2.0)), Normalization::None)
}

/// Band importance broadcast over `frames`, each frame summing to one.
pub fn weights_ansi(importance: &BandImportance, n_bands: usize, frames: usize) -> Result<WeightMap> {
    if importance.values.len() != n_bands {
        return Err(Error::InvalidWeights(format!(
            "{} importance values for a {n_bands}-band filterbank",
            importance.values.len()
        )));
    }
    let total: f64 = importance.values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidWeights("importance values sum to zero".into()));
    }
    let w = Array2::from_shape_fn((n_bands, frames), |(b, _)| importance.values[b] / total);
    WeightMap::new(w, Normalization::PerFrame)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SirSoftmax {
    /// Softmax of `-SIR` with SIR in dB.
    NegSir,
    /// Softmax of `-ln SIR` with SIR a linear power ratio, i.e. normalised
    /// reciprocal SIR.
    NegLogSir,
}

pub fn sir_db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Softmax SIR weights over all bins of `sir`; `sir` is in dB for
/// [`SirSoftmax::NegSir`] and linear for [`SirSoftmax::NegLogSir`].
pub fn weights_sir_softmax(sir: &Array2<f64>, variant: SirSoftmax) -> Result<WeightMap> {
    if sir.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidWeights("SIR map contains NaN".into()));
    }
    if sir.is_empty() {
        return Err(Error::InvalidWeights("SIR map is empty".into()));
    }
    let logits = match variant {
        SirSoftmax::NegSir => sir.mapv(|v| -v.clamp(SIR_CLAMP_DB.0, SIR_CLAMP_DB.1)),
        SirSoftmax::NegLogSir => {
            if sir.iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidWeights(
                    "linear SIR must be strictly positive".into(),
                ));
            }
            return normalize_global(sir.mapv(|v| 1.0 / v.clamp(SIR_LINEAR_FLOOR, SIR_LINEAR_CEIL)));
        }
    };
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    normalize_global(logits.mapv(|l| (l - max).exp()))
}

fn normalize_global(mut w: Array2<f64>) -> Result<WeightMap> {
    let total = w.sum();
    w.mapv_inplace(|v| v / total);
    WeightMap::new(w, Normalization::Global)
}
