//! Mel and one-third-octave filterbanks, and ANSI S3.5-1997 band importance.

use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterbankKind {
    Mel,
    ThirdOctave,
    /// One band per bin.
    Identity,
}

/// Nonnegative pooling matrix `[bands x freq_bins]`, rows in ascending
/// centre frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank {
    weights: Array2<f64>,
    band_centers: Vec<f64>,
    kind: FilterbankKind,
}

impl Filterbank {
    pub fn new(weights: Array2<f64>, band_centers: Vec<f64>, kind: FilterbankKind) -> Result<Self> {
        if weights.nrows() != band_centers.len() {
            return Err(Error::InvalidFilterbank(format!(
                "{} rows but {} centres",
                weights.nrows(),
                band_centers.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidFilterbank(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if let Some(b) = weights
            .rows()
            .into_iter()
            .position(|r| !r.iter().any(|&w| w > 0.0))
        {
            return Err(Error::BandTooNarrow { band: b });
        }
        if band_centers.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidFilterbank(
                "band centres must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            weights,
            band_centers,
            kind,
        })
    }

    /// Identity pooling over `n_bins` bins; centres are bin indices.
    pub fn identity(n_bins: usize) -> Self {
        Self {
            weights: Array2::eye(n_bins),
            band_centers: (0..n_bins).map(|k| k as f64).collect(),
            kind: FilterbankKind::Identity,
        }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn band_centers(&self) -> &[f64] {
        &self.band_centers
    }

    pub fn kind(&self) -> FilterbankKind {
        self.kind
    }

    pub fn num_bands(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.weights.ncols()
    }

    /// Writes nonzero entries as `band,bin,weight` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["band", "bin", "weight"])?;
        for ((b, k), &v) in self.weights.indexed_iter() {
            if v > 0.0 {
                w.write_record([b.to_string(), k.to_string(), crate::format::sig6(v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

pub const DEFAULT_MEL_BANDS: usize = 18;
pub const DEFAULT_MEL_FMIN: f64 = 50.0;
pub const DEFAULT_MEL_FMAX: f64 = 8000.0;

/// Triangular filters with centres equally spaced in mel, peak amplitude 1.
pub fn mel_filterbank(
    fft_size: usize,
    sample_rate: u32,
    n_bands: usize,
    f_min: f64,
    f_max: f64,
) -> Result<Filterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_bands == 0 {
        return Err(Error::InvalidFilterbank("n_bands must be at least 1".into()));
    }
    if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
        return Err(Error::InvalidFilterbank(format!(
            "need 0 <= f_min < f_max <= {nyquist} Hz, got [{f_min}, {f_max}]"
        )));
    }
    if fft_size < 2 {
        return Err(Error::InvalidFilterbank("fft_size must be at least 2".into()));
    }
    let m_lo = hz_to_mel(f_min);
    let step = (hz_to_mel(f_max) - m_lo) / (n_bands + 1) as f64;
    let edges: Vec<f64> = (0..n_bands + 2)
        .map(|i| mel_to_hz(m_lo + step * i as f64))
        .collect();
    let n_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let mut weights = Array2::zeros((n_bands, n_bins));
    for b in 0..n_bands {
        let (lo, c, hi) = (edges[b], edges[b + 1], edges[b + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > lo && f <= c {
                (f - lo) / (c - lo)
            } else if f > c && f < hi {
                (hi - f) / (hi - c)
            } else {
                0.0
            };
            weights[[b, k]] = w;
        }
    }
    Filterbank::new(weights, edges[1..=n_bands].to_vec(), FilterbankKind::Mel)
}

pub fn default_mel_filterbank(fft_size: usize, sample_rate: u32) -> Result<Filterbank> {
    mel_filterbank(
        fft_size,
        sample_rate,
        DEFAULT_MEL_BANDS,
        DEFAULT_MEL_FMIN,
        DEFAULT_MEL_FMAX.min(sample_rate as f64 / 2.0),
    )
}

/// Nominal one-third-octave centres from 160 Hz to 8 kHz.
pub const THIRD_OCTAVE_NOMINAL_HZ: [f64; 18] = [
    160.0, 200.0, 250.0, 315.0, 400.0, 500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0,
    2500.0, 3150.0, 4000.0, 5000.0, 6300.0, 8000.0,
];

/// Exact centre of the `i`-th (zero-based) band on the `1000 * 2^(k/3)`
/// ladder, with 1 kHz at index 8.
pub fn third_octave_center(i: usize) -> f64 {
    1000.0 * 2f64.powf((i as f64 - 8.0) / 3.0)
}

/// Band edges `centre * 2^(-1/6)` and `centre * 2^(1/6)`.
pub fn third_octave_edges(i: usize) -> (f64, f64) {
    let c = third_octave_center(i);
    (c * 2f64.powf(-1.0 / 6.0), c * 2f64.powf(1.0 / 6.0))
}

/// Eighteen boxcar bands; a bin belongs to the band whose `[lower, upper)`
/// interval contains its centre frequency.
pub fn third_octave_bands(fft_size: usize, sample_rate: u32) -> Result<Filterbank> {
    if sample_rate < 16000 {
        return Err(Error::SampleRateTooLow(sample_rate));
    }
    let n_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let mut weights = Array2::zeros((18, n_bins));
    for b in 0..18 {
        let (lo, hi) = third_octave_edges(b);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            if f >= lo && f < hi {
                weights[[b, k]] = 1.0;
            }
        }
    }
    Filterbank::new(
        weights,
        (0..18).map(third_octave_center).collect(),
        FilterbankKind::ThirdOctave,
    )
}

/// Per-band speech-intelligibility importance over the 18 one-third-octave
/// bands, normalised to sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BandImportance {
    pub values: Vec<f64>,
    pub band_centers: Vec<f64>,
}

/// ANSI S3.5-1997 Table 3 band importance for average speech, 160 Hz to 8 kHz.
const ANSI_1997_TABLE3: [f64; 18] = [
    0.0083, 0.0095, 0.0150, 0.0289, 0.0440, 0.0578, 0.0653, 0.0711, 0.0818, 0.0844, 0.0882,
    0.0898, 0.0868, 0.0844, 0.0771, 0.0527, 0.0364, 0.0185,
];

pub fn ansi_band_importance() -> BandImportance {
    let total: f64 = ANSI_1997_TABLE3.iter().sum();
    BandImportance {
        values: ANSI_1997_TABLE3.iter().map(|v| v / total).collect(),
        band_centers: THIRD_OCTAVE_NOMINAL_HZ.to_vec(),
    }
}

/// `out[b, t] = sum_f fb[b, f] * power[f, t]`.
pub fn band_pool(power: &Array2<f64>, fb: &Filterbank) -> Result<Array2<f64>> {
    if power.nrows() != fb.num_bins() {
        return Err(Error::DimensionMismatch(format!(
            "power map has {} bins, filterbank expects {}",
            power.nrows(),
            fb.num_bins()
        )));
    }
    Ok(fb.weights.dot(power))
}
