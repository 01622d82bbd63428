//! Signal containers, WAV I/O, and STFT analysis.

mod audio;
mod stft;
mod wav;

pub use audio::{dot, energy, AudioBuffer};
pub use stft::{istft, onesided_energy, stft, FullDft, Spectrogram, StftConfig, StftPlan, Window};
pub use wav::{read_wav, write_wav, WavFormat, WavWriteReport};
