//! Short-time objective intelligibility.
//!
//! Follows the standard reference pipeline: resample to 10 kHz, drop frames
//! more than 40 dB below the loudest clean frame, one-third octave envelopes
//! over 30-frame segments, clip, and average the envelope correlations.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};

pub const STOI_SAMPLE_RATE: u32 = 10_000;
const FRAME_LEN: usize = 256;
const HOP: usize = FRAME_LEN / 2;
const NFFT: usize = 512;
const NUM_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per analysis segment.
pub const SEGMENT_FRAMES: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// STOI of `est` against `clean`, both at `sample_rate`.
pub fn stoi(clean: &[f64], est: &[f64], sample_rate: u32) -> Result<f64> {
    if clean.len() != est.len() {
        return Err(Error::DimensionMismatch(format!(
            "clean {} vs estimate {} samples",
            clean.len(),
            est.len()
        )));
    }
    if sample_rate == 0 {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }
    if clean.iter().chain(est).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite samples".into()));
    }
    if clean.iter().all(|&v| v == 0.0) {
        return Err(Error::SilentReference("clean signal is all zeros".into()));
    }
    let (x, y) = if sample_rate == STOI_SAMPLE_RATE {
        (clean.to_vec(), est.to_vec())
    } else {
        let rs = Resampler::new(sample_rate, STOI_SAMPLE_RATE);
        (rs.apply(clean), rs.apply(est))
    };
    let (x, y) = remove_silent_frames(&x, &y)?;

    let obm = third_octave_matrix();
    let x_tob = band_envelopes(&x, &obm);
    let y_tob = band_envelopes(&y, &obm);
    let frames = x_tob.first().map_or(0, Vec::len);
    if frames < SEGMENT_FRAMES {
        return Err(Error::InsufficientFrames {
            frames,
            required: SEGMENT_FRAMES,
        });
    }

    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let segments = frames - SEGMENT_FRAMES + 1;
    let mut total = 0.0;
    for m in 0..segments {
        for (xb, yb) in x_tob.iter().zip(&y_tob) {
            let xs = &xb[m..m + SEGMENT_FRAMES];
            let ys = &yb[m..m + SEGMENT_FRAMES];
            let scale = norm(xs) / (norm(ys) + EPS);
            let yp: Vec<f64> = ys
                .iter()
                .zip(xs)
                .map(|(&yv, &xv)| (yv * scale).min(xv * clip))
                .collect();
            total += correlation(xs, &yp);
        }
    }
    Ok(total / (segments * NUM_BANDS) as f64)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let centre = |x: &[f64]| -> Vec<f64> {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let n = norm(&c) + EPS;
        c.into_iter().map(|v| v / n).collect()
    };
    centre(a).iter().zip(centre(b)).map(|(p, q)| p * q).sum()
}

/// Symmetric Hann of length `n` without its zero end points.
fn hanning_inner(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME_LEN)).step_by(HOP)
}

fn remove_silent_frames(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = hanning_inner(FRAME_LEN);
    let window = |s: &[f64], i: usize| -> Vec<f64> {
        s[i..i + FRAME_LEN].iter().zip(&w).map(|(a, b)| a * b).collect()
    };
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    if starts.is_empty() {
        return Err(Error::InsufficientFrames {
            frames: 0,
            required: SEGMENT_FRAMES,
        });
    }
    let x_frames: Vec<Vec<f64>> = starts.iter().map(|&i| window(x, i)).collect();
    let y_frames: Vec<Vec<f64>> = starts.iter().map(|&i| window(y, i)).collect();
    let energies: Vec<f64> = x_frames.iter().map(|f| 20.0 * (norm(f) + EPS).log10()).collect();
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..energies.len())
        .filter(|&i| max - DYN_RANGE_DB - energies[i] < 0.0)
        .collect();
    Ok((
        overlap_add(keep.iter().map(|&i| &x_frames[i])),
        overlap_add(keep.iter().map(|&i| &y_frames[i])),
    ))
}

fn overlap_add<'a>(frames: impl ExactSizeIterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let n = frames.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![0.0; (n - 1) * HOP + FRAME_LEN];
    for (k, f) in frames.enumerate() {
        for (o, v) in out[k * HOP..].iter_mut().zip(f) {
            *o += v;
        }
    }
    out
}

/// `(lo_bin, hi_bin)` of each one-third octave band, half open.
fn third_octave_matrix() -> Vec<(usize, usize)> {
    let df = STOI_SAMPLE_RATE as f64 / NFFT as f64;
    let bins = NFFT / 2 + 1;
    let nearest = |f: f64| -> usize {
        (0..bins)
            .min_by(|&a, &b| {
                let da = (a as f64 * df - f).powi(2);
                let db = (b as f64 * df - f).powi(2);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap()
    };
    (0..NUM_BANDS)
        .map(|k| {
            let k = k as f64;
            let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// Band envelopes `[band][frame]`.
fn band_envelopes(x: &[f64], obm: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let w = hanning_inner(FRAME_LEN);
    let fft = FftPlanner::new().plan_fft_forward(NFFT);
    let mut out = vec![Vec::new(); obm.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); NFFT];
    for start in frame_starts(x.len()) {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, (s, wv)) in x[start..start + FRAME_LEN].iter().zip(&w).enumerate() {
            buf[i].re = s * wv;
        }
        fft.process(&mut buf);
        for (band, &(lo, hi)) in out.iter_mut().zip(obm) {
            let p: f64 = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            band.push(p.sqrt());
        }
    }
    out
}

/// Rational polyphase resampler with a Kaiser-windowed sinc lowpass.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    half_len: usize,
    taps: Vec<f64>,
}

const KAISER_BETA: f64 = 5.0;
const HALF_LEN_PER_FACTOR: usize = 10;

impl Resampler {
    pub fn new(from: u32, to: u32) -> Self {
        let g = gcd(from as usize, to as usize);
        let up = to as usize / g;
        let down = from as usize / g;
        let m = up.max(down);
        let half_len = HALF_LEN_PER_FACTOR * m;
        let i0b = bessel_i0(KAISER_BETA);
        let taps = (0..=2 * half_len)
            .map(|k| {
                let t = k as f64 - half_len as f64;
                let r = t / half_len as f64;
                let kaiser = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0b;
                let arg = t / m as f64;
                let sinc = if arg == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
                up as f64 * sinc / m as f64 * kaiser
            })
            .collect();
        Self {
            up,
            down,
            half_len,
            taps,
        }
    }

    /// Output length is `ceil(len * up / down)`.
    pub fn output_len(&self, len: usize) -> usize {
        (len * self.up).div_ceil(self.down)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (up, h) = (self.up as isize, self.half_len as isize);
        (0..self.output_len(x.len()))
            .map(|m| {
                let n = (m * self.down) as isize;
                let i_lo = ((n - h).max(0) + up - 1) / up;
                let i_hi = ((n + h) / up).min(x.len() as isize - 1);
                (i_lo..=i_hi)
                    .map(|i| x[i as usize] * self.taps[(n - i * up + h) as usize])
                    .sum()
            })
            .collect()
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}
