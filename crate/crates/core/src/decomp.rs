//! Projection-based decomposition of an estimate into target, interference
//! and artifact components, and the SDR/SIR/SAR family built on it.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scales::{band_pool, Filterbank};
use crate::signal::{dot, energy, onesided_energy, FullDft, StftPlan};

/// Relative energy floor: a denominator below `ENERGY_FLOOR * numerator`
/// counts as zero.
pub const ENERGY_FLOOR: f64 = 1e-12;

/// Gram-matrix condition number above which clean and noise are treated as
/// collinear.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Closed interval that per-bin dB values are clamped into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DbClamp {
    pub lo: f64,
    pub hi: f64,
}

impl DbClamp {
    pub const LOSS: DbClamp = DbClamp { lo: -60.0, hi: 60.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "clamp bounds must be finite with lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn apply(&self, db: f64) -> f64 {
        db.clamp(self.lo, self.hi)
    }

    pub fn is_active(&self, db: f64) -> bool {
        db <= self.lo || db >= self.hi
    }
}

impl Default for DbClamp {
    fn default() -> Self {
        Self::LOSS
    }
}

/// Scalar ratio in dB with infinite sentinels: `-inf` when the numerator is
/// zero, `+inf` when the denominator is below the energy floor.
pub fn scalar_ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        f64::NEG_INFINITY
    } else if den <= ENERGY_FLOOR * num {
        f64::INFINITY
    } else {
        10.0 * (num / den).log10()
    }
}

/// Per-bin ratio in dB before clamping. The denominator is floored at
/// `ENERGY_FLOOR * num`, so a bin with no distortion (including an all-zero
/// bin) sits at the floor ceiling of 120 dB.
pub fn bin_ratio_db(num: f64, den: f64) -> f64 {
    if den <= ENERGY_FLOOR * num {
        -10.0 * ENERGY_FLOOR.log10()
    } else {
        10.0 * (num / den).log10()
    }
}

/// Target projection, residual interference and artifacts of an estimate.
///
/// `s_proj + e_interf + e_artif` reconstructs the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub s_proj: Vec<f64>,
    pub e_interf: Vec<f64>,
    pub e_artif: Vec<f64>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.s_proj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_proj.is_empty()
    }

    pub fn e_dist(&self) -> Vec<f64> {
        self.e_interf
            .iter()
            .zip(&self.e_artif)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// `s_proj + e_interf`, the part of the estimate inside span{clean, noise}.
    pub fn target_plus_interf(&self) -> Vec<f64> {
        self.s_proj
            .iter()
            .zip(&self.e_interf)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        self.s_proj
            .iter()
            .zip(&self.e_interf)
            .zip(&self.e_artif)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }

    /// Component pairs `(numerator, denominator)` for each ratio.
    pub fn pair(&self, which: RatioKind) -> (Vec<f64>, Vec<f64>) {
        match which {
            RatioKind::Sdr => (self.s_proj.clone(), self.e_dist()),
            RatioKind::Sir => (self.s_proj.clone(), self.e_interf.clone()),
            RatioKind::Sar => (self.target_plus_interf(), self.e_artif.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioKind {
    Sdr,
    Sir,
    Sar,
}

impl RatioKind {
    pub const ALL: [RatioKind; 3] = [RatioKind::Sdr, RatioKind::Sir, RatioKind::Sar];
}

/// Condition number of the 2x2 Gram matrix `[[cc, cn], [cn, nn]]`.
fn gram_condition(cc: f64, cn: f64, nn: f64) -> f64 {
    let tr = cc + nn;
    let disc = ((cc - nn).powi(2) + 4.0 * cn * cn).sqrt();
    let hi = 0.5 * (tr + disc);
    // det / hi is the small eigenvalue without cancellation.
    let lo = (cc * nn - cn * cn) / hi;
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Splits `est` into its projection on `clean`, the further projection on
/// `noise`, and the remainder orthogonal to both.
///
/// The projection onto span{clean, noise} is computed by orthogonalising
/// `noise` against `clean`, so that an estimate equal to `clean` yields
/// exactly zero distortion.
pub fn decompose(est: &[f64], clean: &[f64], noise: &[f64]) -> Result<Decomposition> {
    if est.len() != clean.len() || est.len() != noise.len() {
        return Err(Error::DimensionMismatch(format!(
            "est {}, clean {}, noise {} samples",
            est.len(),
            clean.len(),
            noise.len()
        )));
    }
    let cc = energy(clean);
    if cc == 0.0 {
        return Err(Error::DegenerateDecomposition(
            "clean reference has zero energy".into(),
        ));
    }
    let cn = dot(clean, noise);
    let nn = energy(noise);
    let cond = gram_condition(cc, cn, nn);
    if !(cond <= MAX_GRAM_CONDITION) {
        return Err(Error::DegenerateDecomposition(format!(
            "clean and noise are collinear (Gram condition number {cond:e})"
        )));
    }

    let alpha = dot(est, clean) / cc;
    let s_proj: Vec<f64> = clean.iter().map(|c| alpha * c).collect();
    let residual: Vec<f64> = est.iter().zip(&s_proj).map(|(e, s)| e - s).collect();

    let mu = cn / cc;
    let noise_perp: Vec<f64> = noise.iter().zip(clean).map(|(n, c)| n - mu * c).collect();
    let beta = dot(&residual, &noise_perp) / energy(&noise_perp);
    let e_interf: Vec<f64> = noise_perp.iter().map(|n| beta * n).collect();
    let e_artif: Vec<f64> = residual
        .iter()
        .zip(&e_interf)
        .map(|(r, i)| r - i)
        .collect();

    Ok(Decomposition {
        s_proj,
        e_interf,
        e_artif,
    })
}

/// Time-domain ratios in dB; infinite values are sentinels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioReport {
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub sdr_db: f64,
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub sir_db: f64,
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub sar_db: f64,
}

impl RatioReport {
    pub fn get(&self, which: RatioKind) -> f64 {
        match which {
            RatioKind::Sdr => self.sdr_db,
            RatioKind::Sir => self.sir_db,
            RatioKind::Sar => self.sar_db,
        }
    }
}

pub fn time_ratios(d: &Decomposition) -> RatioReport {
    let ratio = |which| {
        let (num, den) = d.pair(which);
        scalar_ratio_db(energy(&num), energy(&den))
    };
    RatioReport {
        sdr_db: ratio(RatioKind::Sdr),
        sir_db: ratio(RatioKind::Sir),
        sar_db: ratio(RatioKind::Sar),
    }
}

/// SDR from full-signal one-sided spectra aggregated over all frequencies;
/// equal to the time-domain SDR by Parseval.
pub fn frequency_aggregated_sdr(d: &Decomposition) -> f64 {
    let dft = FullDft::new(d.len());
    let num = onesided_energy(&dft, &dft.forward(&d.s_proj));
    let den = onesided_energy(&dft, &dft.forward(&d.e_dist()));
    scalar_ratio_db(num, den)
}

/// Spectral pooling applied before per-bin ratios.
#[derive(Debug, Clone, Copy)]
pub enum Scale<'a> {
    Linear,
    Banded(&'a Filterbank),
}

/// Per-(band, frame) ratio maps after clamping, and their means.
#[derive(Debug, Clone, PartialEq)]
pub struct BinwiseRatios {
    pub sdr: Array2<f64>,
    pub sir: Array2<f64>,
    pub sar: Array2<f64>,
    pub mean_sdr: f64,
    pub mean_sir: f64,
    pub mean_sar: f64,
}

impl BinwiseRatios {
    pub fn map(&self, which: RatioKind) -> &Array2<f64> {
        match which {
            RatioKind::Sdr => &self.sdr,
            RatioKind::Sir => &self.sir,
            RatioKind::Sar => &self.sar,
        }
    }

    pub fn mean(&self, which: RatioKind) -> f64 {
        match which {
            RatioKind::Sdr => self.mean_sdr,
            RatioKind::Sir => self.mean_sir,
            RatioKind::Sar => self.mean_sar,
        }
    }
}

/// Clamped per-bin dB map of two power maps.
pub fn ratio_map(num: &Array2<f64>, den: &Array2<f64>, clamp: DbClamp) -> Array2<f64> {
    let mut out = num.clone();
    out.zip_mut_with(den, |n, &d| *n = clamp.apply(bin_ratio_db(*n, d)));
    out
}

fn pooled(power: Array2<f64>, scale: Scale<'_>) -> Result<Array2<f64>> {
    match scale {
        Scale::Linear => Ok(power),
        Scale::Banded(fb) => band_pool(&power, fb),
    }
}

fn assemble(maps: [Array2<f64>; 3]) -> BinwiseRatios {
    let [sdr, sir, sar] = maps;
    let mean = |m: &Array2<f64>| m.mean().unwrap_or(f64::NAN);
    BinwiseRatios {
        mean_sdr: mean(&sdr),
        mean_sir: mean(&sir),
        mean_sar: mean(&sar),
        sdr,
        sir,
        sar,
    }
}

/// Time-frequency ratios: each component's STFT power is pooled per
/// `scale`, ratios are taken per (band, frame), clamped, and averaged.
pub fn binwise_ratios(
    d: &Decomposition,
    plan: &StftPlan,
    scale: Scale<'_>,
    clamp: DbClamp,
) -> Result<BinwiseRatios> {
    if d.is_empty() {
        return Err(Error::InvalidArgument("empty decomposition".into()));
    }
    let power = |x: &[f64]| -> Result<Array2<f64>> {
        pooled(plan.forward(x)?.mapv(|c| c.norm_sqr()), scale)
    };
    let mut maps = Vec::with_capacity(3);
    for which in RatioKind::ALL {
        let (num, den) = d.pair(which);
        maps.push(ratio_map(&power(&num)?, &power(&den)?, clamp));
    }
    let maps: [Array2<f64>; 3] = maps.try_into().expect("three ratio maps");
    Ok(assemble(maps))
}

/// Frequency-domain ratios from the full-signal one-sided DFT of each
/// component (a single frame spanning the whole signal).
pub fn frequency_ratios(d: &Decomposition, clamp: DbClamp) -> Result<BinwiseRatios> {
    if d.is_empty() {
        return Err(Error::InvalidArgument("empty decomposition".into()));
    }
    let dft = FullDft::new(d.len());
    let power = |x: &[f64]| {
        let spec = dft.forward(x);
        Array2::from_shape_fn((spec.len(), 1), |(k, _)| spec[k].norm_sqr())
    };
    let maps = RatioKind::ALL.map(|which| {
        let (num, den) = d.pair(which);
        ratio_map(&power(&num), &power(&den), clamp)
    });
    Ok(assemble(maps))
}
