//! Frequency-weighted SDR losses and speech enhancement evaluation.
//!
//! The crate covers the projection-based decomposition of an estimate
//! into target, interference and artifact components, the SDR loss catalog
//! over time, frequency and time-frequency domains with perceptual
//! weighting and exact gradients, frequency-weighted metrics and STOI,
//! speech-shaped noise and mixture generation, and phoneme-level tables.

pub mod cli;
pub mod decomp;
pub mod error;
pub mod format;
pub mod loss;
pub mod metrics;
pub mod mixer;
pub mod phoneme;
pub mod scales;
pub mod signal;
pub mod weighting;

pub use error::{Error, Result};
