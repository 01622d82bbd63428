use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::decomp::DbClamp;
use crate::error::{Error, Result};
use crate::scales::{DEFAULT_MEL_BANDS, DEFAULT_MEL_FMAX, DEFAULT_MEL_FMIN};
use crate::signal::StftConfig;
use crate::weighting::DEFAULT_GAMMA;

/// Identifier of one of the eleven catalogued losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossId {
    L1,
    L2,
    L3,
    L4,
    L5,
    L6,
    L7,
    L8,
    L9,
    L10,
    L11,
}

impl LossId {
    pub const ALL: [LossId; 11] = [
        LossId::L1,
        LossId::L2,
        LossId::L3,
        LossId::L4,
        LossId::L5,
        LossId::L6,
        LossId::L7,
        LossId::L8,
        LossId::L9,
        LossId::L10,
        LossId::L11,
    ];

    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn domain(self) -> Domain {
        match self {
            LossId::L1 => Domain::Time,
            LossId::L2 => Domain::Frequency,
            _ => Domain::Tf,
        }
    }

    pub fn scale(self) -> SpectralScale {
        use LossId::*;
        match self {
            L1 | L2 => SpectralScale::None,
            L3 | L5 | L8 | L9 => SpectralScale::Linear,
            L4 | L6 | L7 | L10 | L11 => SpectralScale::Mel,
        }
    }

    pub fn weighting(self) -> WeightingKind {
        use LossId::*;
        match self {
            L1 | L2 | L3 | L4 => WeightingKind::None,
            L5 | L6 => WeightingKind::SpectralMagnitude,
            L7 => WeightingKind::Ansi,
            L8 | L10 => WeightingKind::NegSir,
            L9 | L11 => WeightingKind::NegLogSir,
        }
    }
}

impl fmt::Display for LossId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.index())
    }
}

impl FromStr for LossId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: usize = s
            .trim()
            .strip_prefix(['L', 'l'])
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss id {s:?}")))?;
        LossId::ALL
            .get(n.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss id {s:?}")))
    }
}

impl Serialize for LossId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Time,
    Frequency,
    Tf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralScale {
    /// Time and full-signal frequency domains have no TF scale.
    None,
    Linear,
    Mel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingKind {
    None,
    SpectralMagnitude,
    Ansi,
    NegSir,
    NegLogSir,
}

/// Where the SIR map driving the softmax weights comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SirSource {
    /// Decomposition of the current estimate: `s_proj` against `e_interf`.
    #[default]
    Estimate,
    /// Oracle mixture SIR: clean against noise.
    Oracle,
}

/// Full parameterisation of a catalogued loss. The (domain, scale,
/// weighting) triple is fixed by `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub id: LossId,
    pub stft: StftConfig,
    pub sample_rate: u32,
    pub mel_bands: usize,
    pub mel_fmin: f64,
    pub mel_fmax: f64,
    pub gamma: f64,
    pub clamp: DbClamp,
    pub sir_source: SirSource,
}

impl LossConfig {
    pub fn new(id: LossId) -> Self {
        Self {
            id,
            stft: StftConfig::default(),
            sample_rate: 16000,
            mel_bands: DEFAULT_MEL_BANDS,
            mel_fmin: DEFAULT_MEL_FMIN,
            mel_fmax: DEFAULT_MEL_FMAX,
            gamma: DEFAULT_GAMMA,
            clamp: DbClamp::LOSS,
            sir_source: SirSource::Estimate,
        }
    }

    pub fn domain(&self) -> Domain {
        self.id.domain()
    }

    pub fn scale(&self) -> SpectralScale {
        self.id.scale()
    }

    pub fn weighting(&self) -> WeightingKind {
        self.id.weighting()
    }
}
