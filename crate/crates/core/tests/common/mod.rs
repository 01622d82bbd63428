#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sdrkit::signal::{write_wav, AudioBuffer, WavFormat};

pub const SR: u32 = 16000;

pub fn gaussian(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Formant envelope of one vowel at frequency `f`.
fn formant_gain(f: f64, formants: &[(f64, f64)]) -> f64 {
    formants
        .iter()
        .map(|&(fc, bw)| 1.0 / (1.0 + ((f - fc) / bw).powi(2)))
        .sum::<f64>()
        + 0.02
}

const VOWELS: [[(f64, f64); 3]; 5] = [
    [(730.0, 90.0), (1090.0, 110.0), (2440.0, 170.0)],
    [(270.0, 60.0), (2290.0, 100.0), (3010.0, 120.0)],
    [(530.0, 60.0), (1840.0, 100.0), (2480.0, 120.0)],
    [(570.0, 60.0), (840.0, 80.0), (2410.0, 120.0)],
    [(300.0, 60.0), (870.0, 80.0), (2240.0, 120.0)],
];

/// Synthetic utterance: voiced syllables with vibrato and formants,
/// fricative noise, plosive bursts and short pauses. Deterministic in
/// `seed`.
pub fn speech(seconds: f64, seed: u64) -> Vec<f64> {
    let len = (seconds * SR as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = vec![0.0; len];
    let base_f0 = 100.0 + 12.0 * (seed % 10) as f64;
    let mut pos = rng.random_range(800..2400);
    while pos < len {
        let kind = rng.random_range(0..10);
        let dur = match kind {
            0..=5 => rng.random_range(2400..4800),
            6..=7 => rng.random_range(1000..2000),
            8 => rng.random_range(160..400),
            _ => rng.random_range(800..2400),
        };
        let end = (pos + dur).min(len);
        let n = end - pos;
        let ramp = |i: usize| {
            let r = (n / 8).max(16) as f64;
            let a = (i as f64 / r).min(1.0);
            let b = ((n - i) as f64 / r).min(1.0);
            (0.5 - 0.5 * (PI * a).cos()) * (0.5 - 0.5 * (PI * b).cos())
        };
        match kind {
            0..=5 => {
                let formants = VOWELS[rng.random_range(0..VOWELS.len())];
                let amp = rng.random_range(0.3..1.0);
                let f0 = base_f0 * rng.random_range(0.85..1.2);
                let vib_rate = rng.random_range(3.0..6.0);
                let mut phase = 0.0;
                for i in 0..n {
                    let t = i as f64 / SR as f64;
                    let f = f0 * (1.0 + 0.08 * (2.0 * PI * vib_rate * t).sin() - 0.1 * t);
                    phase += 2.0 * PI * f / SR as f64;
                    let mut v = 0.0;
                    let mut h = 1;
                    while h as f64 * f < 7600.0 {
                        let fh = h as f64 * f;
                        v += formant_gain(fh, &formants) * (h as f64 * phase).sin() / (h as f64).sqrt();
                        h += 1;
                    }
                    out[pos + i] += 0.2 * amp * ramp(i) * v;
                }
            }
            6..=8 => {
                let amp = if kind == 8 { 0.6 } else { rng.random_range(0.1..0.3) };
                let mut prev = 0.0;
                for i in 0..n {
                    let w: f64 = StandardNormal.sample(&mut rng);
                    out[pos + i] += amp * ramp(i) * (w - 0.7 * prev);
                    prev = w;
                }
            }
            _ => {}
        }
        pos = end + rng.random_range(0..800);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.iter().map(|v| 0.5 * v / peak).collect()
}

/// Ten fixed speech-like fixtures of 3.2 s each.
pub fn speech_fixtures() -> Vec<Vec<f64>> {
    (0..10).map(|i| speech(3.2, 100 + i)).collect()
}

pub fn write_mono(path: &Path, x: &[f64]) {
    let b = AudioBuffer::mono(x.to_vec(), SR).unwrap();
    write_wav(&b, path, WavFormat::Float32).unwrap();
}

/// `(est, mix, clean, noise)` for the evaluation regression fixture.
pub fn eval_fixture() -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let clean = speech(3.2, 7);
    let noise: Vec<f64> = gaussian(clean.len(), 8).iter().map(|v| 0.1 * v).collect();
    let art: Vec<f64> = gaussian(clean.len(), 9).iter().map(|v| 0.01 * v).collect();
    let mix: Vec<f64> = clean.iter().zip(&noise).map(|(c, n)| c + n).collect();
    let est = (0..clean.len())
        .map(|i| 0.9 * clean[i] + 0.3 * noise[i] + art[i])
        .collect();
    (est, mix, clean, noise)
}

/// Exponentially decaying random RIRs, one per channel.
pub fn random_rirs(channels: usize, taps: usize, seed: u64) -> AudioBuffer {
    let chans = (0..channels)
        .map(|c| {
            let g = gaussian(taps, seed + c as u64);
            let mut h: Vec<f64> = g
                .iter()
                .enumerate()
                .map(|(i, v)| v * (-(i as f64) / (taps as f64 / 6.0)).exp() * 0.3)
                .collect();
            h[c] += 1.0;
            h
        })
        .collect();
    AudioBuffer::new(chans, SR).unwrap()
}

pub fn write_multi(path: &Path, b: &AudioBuffer) {
    write_wav(b, path, WavFormat::Float32).unwrap();
}
