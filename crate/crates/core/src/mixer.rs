//! Speech-shaped noise, RIR convolution and SIR-calibrated mixing.

use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{energy, AudioBuffer, Window};

pub const WELCH_FFT: usize = 512;
pub const SSN_FIR_TAPS: usize = 1024;
pub const MIN_CORPUS_SECS: f64 = 30.0;
pub const SIR_RANGE_DB: (f64, f64) = (-10.0, 10.0);
pub const DEFAULT_SSN_FRACTION: f64 = 0.3;

/// Full linear convolution of `a` and `b` through the FFT.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |x: &[f64]| {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for (d, &s) in v.iter_mut().zip(x) {
            d.re = s;
        }
        v
    };
    let (mut fa, mut fb) = (pad(a), pad(b));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (p, q) in fa.iter_mut().zip(&fb) {
        *p *= q;
    }
    inv.process(&mut fa);
    fa[..out_len].iter().map(|c| c.re / n as f64).collect()
}

/// Welch power spectrum: periodic Hann, 50% overlap, averaged one-sided
/// periodograms over every frame of every channel of every signal.
pub fn welch_psd(signals: &[AudioBuffer], fft_size: usize) -> Result<Vec<f64>> {
    let hop = fft_size / 2;
    let w = Window::Hann.coefficients(fft_size);
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    let mut acc = vec![0.0; fft_size / 2 + 1];
    let mut frames = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    for sig in signals {
        for ch in sig.channels() {
            if ch.len() < fft_size {
                continue;
            }
            for start in (0..=ch.len() - fft_size).step_by(hop) {
                for (b, (x, wv)) in buf.iter_mut().zip(ch[start..].iter().zip(&w)) {
                    *b = Complex64::new(x * wv, 0.0);
                }
                fft.process(&mut buf);
                for (a, c) in acc.iter_mut().zip(&buf) {
                    *a += c.norm_sqr();
                }
                frames += 1;
            }
        }
    }
    if frames == 0 {
        return Err(Error::SignalTooShort {
            len: signals.iter().map(AudioBuffer::len).max().unwrap_or(0),
            fft_size,
        });
    }
    Ok(acc.into_iter().map(|v| v / frames as f64).collect())
}

/// Linear-phase FIR of `taps` coefficients whose magnitude follows
/// `sqrt(psd)`, designed by frequency sampling.
fn shaping_filter(psd: &[f64], taps: usize) -> Vec<f64> {
    let bins = taps / 2 + 1;
    let src_step = (psd.len() - 1) as f64 / (bins - 1) as f64;
    let mag: Vec<f64> = (0..bins)
        .map(|k| {
            let pos = k as f64 * src_step;
            let i = (pos.floor() as usize).min(psd.len() - 2);
            let frac = pos - i as f64;
            ((1.0 - frac) * psd[i] + frac * psd[i + 1]).max(0.0).sqrt()
        })
        .collect();
    let mut spec: Vec<Complex64> = (0..taps)
        .map(|k| Complex64::new(mag[k.min(taps - k)], 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(taps).process(&mut spec);
    let half = taps / 2;
    (0..taps)
        .map(|i| spec[(i + taps - half) % taps].re / taps as f64)
        .collect()
}

/// Speech-shaped noise of `duration` seconds at the corpus sample rate,
/// RMS-normalised to one.
pub fn generate_ssn(corpus: &[AudioBuffer], duration: f64, seed: u64) -> Result<AudioBuffer> {
    let first = corpus
        .first()
        .ok_or_else(|| Error::InvalidArgument("SSN corpus is empty".into()))?;
    let sr = first.sample_rate();
    if let Some(b) = corpus.iter().find(|b| b.sample_rate() != sr) {
        return Err(Error::SampleRateMismatch(b.sample_rate(), sr));
    }
    let total: f64 = corpus.iter().map(AudioBuffer::duration_secs).sum();
    if total < MIN_CORPUS_SECS {
        return Err(Error::InvalidArgument(format!(
            "SSN corpus holds {total:.2} s, at least {MIN_CORPUS_SECS} s are required"
        )));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid SSN duration {duration}")));
    }
    let psd = welch_psd(corpus, WELCH_FFT)?;
    let h = shaping_filter(&psd, SSN_FIR_TAPS);
    let len = (duration * sr as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..len + SSN_FIR_TAPS - 1)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let full = fft_convolve(&white, &h);
    let mut out = full[SSN_FIR_TAPS - 1..SSN_FIR_TAPS - 1 + len].to_vec();
    let rms = (energy(&out) / len as f64).sqrt();
    if rms == 0.0 {
        return Err(Error::SilentReference("SSN corpus has no energy".into()));
    }
    out.iter_mut().for_each(|v| *v /= rms);
    AudioBuffer::mono(out, sr)
}

/// Convolves a mono source with one RIR per output channel; the result is
/// trimmed to the source length.
pub fn convolve_rir(source: &AudioBuffer, rir: &AudioBuffer) -> Result<AudioBuffer> {
    if source.num_channels() != 1 {
        return Err(Error::InvalidBuffer(format!(
            "source must be mono, got {} channels",
            source.num_channels()
        )));
    }
    if rir.is_empty() {
        return Err(Error::InvalidBuffer("RIR is empty".into()));
    }
    if source.sample_rate() != rir.sample_rate() {
        return Err(Error::SampleRateMismatch(source.sample_rate(), rir.sample_rate()));
    }
    let src = source.channel(0)?;
    let channels = rir
        .channels()
        .iter()
        .map(|h| {
            let mut y = fft_convolve(src, h);
            y.truncate(src.len());
            y
        })
        .collect();
    AudioBuffer::new(channels, source.sample_rate())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub target_sir_db: f64,
    pub ref_channel: usize,
    pub seed: u64,
    pub ssn_fraction: f64,
}

impl MixSpec {
    pub fn new(target_sir_db: f64, ref_channel: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            target_sir_db,
            ref_channel,
            seed,
            ssn_fraction: DEFAULT_SSN_FRACTION,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = SIR_RANGE_DB;
        if !(lo..=hi).contains(&self.target_sir_db) {
            return Err(Error::InvalidArgument(format!(
                "target SIR {} dB outside [{lo}, {hi}]",
                self.target_sir_db
            )));
        }
        if !(0.0..=1.0).contains(&self.ssn_fraction) {
            return Err(Error::InvalidArgument(format!(
                "SSN fraction {} outside [0, 1]",
                self.ssn_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub mixture: AudioBuffer,
    pub scaled_noise: AudioBuffer,
    pub gain: f64,
}

fn ref_energy(b: &AudioBuffer, ch: usize, what: &str) -> Result<f64> {
    let e = energy(b.channel(ch)?);
    if e == 0.0 {
        return Err(Error::SilentReference(format!(
            "{what} reference channel {ch} has zero energy"
        )));
    }
    Ok(e)
}

/// Noise gain giving `target_sir_db` between the two reference energies.
pub fn sir_gain(clean_energy: f64, noise_energy: f64, target_sir_db: f64) -> f64 {
    (clean_energy / (noise_energy * 10f64.powf(target_sir_db / 10.0))).sqrt()
}

/// Scales `noise_img` so the reference channel reaches the target SIR and
/// adds it to `clean_img` on every channel.
pub fn mix_at_sir(clean_img: &AudioBuffer, noise_img: &AudioBuffer, spec: &MixSpec) -> Result<Mixture> {
    spec.validate()?;
    clean_img.check_compatible(noise_img)?;
    let gain = sir_gain(
        ref_energy(clean_img, spec.ref_channel, "clean")?,
        ref_energy(noise_img, spec.ref_channel, "noise")?,
        spec.target_sir_db,
    );
    mix_with_gain(clean_img, noise_img, gain)
}

fn mix_with_gain(clean_img: &AudioBuffer, noise_img: &AudioBuffer, gain: f64) -> Result<Mixture> {
    let scaled_noise = noise_img.scaled(gain);
    let channels = clean_img
        .channels()
        .iter()
        .zip(scaled_noise.channels())
        .map(|(c, n)| c.iter().zip(n).map(|(a, b)| a + b).collect())
        .collect();
    Ok(Mixture {
        mixture: AudioBuffer::new(channels, clean_img.sample_rate())?,
        scaled_noise,
        gain,
    })
}

/// Which energies set the SIR: the reverberant images at the reference
/// microphone, or the dry sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    #[default]
    PostRir,
    PreRir,
}

/// Clean image, scaled noise image and mixture of one rendered item.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedMixture {
    pub clean_img: AudioBuffer,
    pub mix: Mixture,
}

/// Reverberates both dry sources and mixes them at the target SIR.
pub fn render_mixture(
    clean: &AudioBuffer,
    noise: &AudioBuffer,
    rir_clean: &AudioBuffer,
    rir_noise: &AudioBuffer,
    spec: &MixSpec,
    calibration: Calibration,
) -> Result<RenderedMixture> {
    spec.validate()?;
    let noise = fit_length(noise, clean.len())?;
    let clean_img = convolve_rir(clean, rir_clean)?;
    let noise_img = convolve_rir(&noise, rir_noise)?;
    let mix = match calibration {
        Calibration::PostRir => mix_at_sir(&clean_img, &noise_img, spec)?,
        Calibration::PreRir => {
            clean_img.check_compatible(&noise_img)?;
            let gain = sir_gain(
                ref_energy(clean, 0, "dry clean")?,
                ref_energy(&noise, 0, "dry noise")?,
                spec.target_sir_db,
            );
            mix_with_gain(&clean_img, &noise_img, gain)?
        }
    };
    Ok(RenderedMixture { clean_img, mix })
}

/// Mono noise tiled or truncated to `len` samples.
fn fit_length(noise: &AudioBuffer, len: usize) -> Result<AudioBuffer> {
    if noise.is_empty() {
        return Err(Error::InvalidBuffer("noise is empty".into()));
    }
    let src = noise.channel(0)?;
    let out = src.iter().cycle().take(len).copied().collect();
    AudioBuffer::mono(out, noise.sample_rate())
}

/// SIR in dB measured between two reference-channel signals.
pub fn measured_sir_db(clean_ref: &[f64], noise_ref: &[f64]) -> f64 {
    10.0 * (energy(clean_ref) / energy(noise_ref)).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub interaural_m: f64,
    pub lateral_offset_m: f64,
    pub vertical_offset_m: f64,
}

pub const INTERAURAL_RANGE_M: (f64, f64) = (0.12, 0.18);
pub const LATERAL_RANGE_M: (f64, f64) = (0.01, 0.02);
pub const VERTICAL_RANGE_M: (f64, f64) = (0.01, 0.015);

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryViolation {
    pub field: &'static str,
    pub value: f64,
    pub range: (f64, f64),
}

impl fmt::Display for GeometryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {} m outside [{}, {}]",
            self.field, self.value, self.range.0, self.range.1
        )
    }
}

/// Range constraints violated by `g`; empty when compliant. Bounds are
/// inclusive.
pub fn validate_geometry(g: &ArrayGeometry) -> Vec<GeometryViolation> {
    [
        ("interaural", g.interaural_m, INTERAURAL_RANGE_M),
        ("lateral_offset", g.lateral_offset_m, LATERAL_RANGE_M),
        ("vertical_offset", g.vertical_offset_m, VERTICAL_RANGE_M),
    ]
    .into_iter()
    .filter(|&(_, v, (lo, hi))| !(lo..=hi).contains(&v))
    .map(|(field, value, range)| GeometryViolation { field, value, range })
    .collect()
}

impl ArrayGeometry {
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        let mut draw = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
        Self {
            interaural_m: draw(INTERAURAL_RANGE_M),
            lateral_offset_m: draw(LATERAL_RANGE_M),
            vertical_offset_m: draw(VERTICAL_RANGE_M),
        }
    }
}

/// One line of a mixture manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clean_path: String,
    pub noise_path: String,
    pub rir_clean_path: String,
    pub rir_noise_path: String,
    pub target_sir_db: f64,
    pub seed: u64,
    pub geometry: ArrayGeometry,
}

pub fn read_manifest<R: BufRead>(input: R) -> Result<Vec<ManifestEntry>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

pub fn write_manifest<W: Write>(entries: &[ManifestEntry], mut out: W) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Source pools a manifest is sampled from.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ManifestPools {
    pub clean: Vec<String>,
    pub ssn: Vec<String>,
    pub ecological: Vec<String>,
    /// `(clean RIR, noise RIR)` pairs from the same room.
    pub rirs: Vec<(String, String)>,
}

/// Samples `count` manifest entries. Exactly `round(count * ssn_fraction)`
/// of them draw their noise from the SSN pool, at shuffled positions.
pub fn plan_manifest(pools: &ManifestPools, count: usize, ssn_fraction: f64, seed: u64) -> Result<Vec<ManifestEntry>> {
    if !(0.0..=1.0).contains(&ssn_fraction) {
        return Err(Error::InvalidArgument(format!("SSN fraction {ssn_fraction} outside [0, 1]")));
    }
    let n_ssn = (count as f64 * ssn_fraction).round() as usize;
    let need = |pool: &[String], name: &str, n: usize| {
        if n > 0 && pool.is_empty() {
            Err(Error::InvalidArgument(format!("{name} pool is empty")))
        } else {
            Ok(())
        }
    };
    need(&pools.clean, "clean", count)?;
    need(&pools.ssn, "SSN", n_ssn)?;
    need(&pools.ecological, "ecological noise", count - n_ssn)?;
    if count > 0 && pools.rirs.is_empty() {
        return Err(Error::InvalidArgument("RIR pool is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_ssn: Vec<bool> = (0..count).map(|i| i < n_ssn).collect();
    for i in (1..count).rev() {
        is_ssn.swap(i, rng.random_range(0..=i));
    }
    let pick = |rng: &mut ChaCha8Rng, pool: &[String]| pool[rng.random_range(0..pool.len())].clone();
    Ok((0..count)
        .map(|i| {
            let clean_path = pick(&mut rng, &pools.clean);
            let noise_path = if is_ssn[i] {
                pick(&mut rng, &pools.ssn)
            } else {
                pick(&mut rng, &pools.ecological)
            };
            let (rc, rn) = pools.rirs[rng.random_range(0..pools.rirs.len())].clone();
            ManifestEntry {
                clean_path,
                noise_path,
                rir_clean_path: rc,
                rir_noise_path: rn,
                target_sir_db: rng.random_range(SIR_RANGE_DB.0..=SIR_RANGE_DB.1),
                seed: seed.wrapping_add(i as u64),
                geometry: ArrayGeometry::sample(&mut rng),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn naive_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    /// Energy of `psd` summed over one-third octave bands centred on the
    /// standard ladder between `lo` and `hi` Hz.
    fn band_levels_db(psd: &[f64], sr: f64, lo: f64, hi: f64) -> Vec<f64> {
        let df = sr / (2 * (psd.len() - 1)) as f64;
        (-20..20)
            .map(|i| 1000.0 * 2f64.powf(i as f64 / 3.0))
            .filter(|&c| c >= lo * 0.99 && c <= hi * 1.01)
            .map(|c| {
                let (a, b) = (c * 2f64.powf(-1.0 / 6.0), c * 2f64.powf(1.0 / 6.0));
                let e: f64 = psd
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| (*k as f64 * df) >= a && (*k as f64 * df) < b)
                    .map(|(_, p)| p)
                    .sum();
                10.0 * e.log10()
            })
            .collect()
    }

    fn normalised(levels: Vec<f64>) -> Vec<f64> {
        let mean = levels.iter().sum::<f64>() / levels.len() as f64;
        levels.into_iter().map(|v| v - mean).collect()
    }

    #[test]
    fn fft_convolution_matches_naive() {
        let a = gaussian(777, 1);
        let b = gaussian(130, 2);
        let fast = fft_convolve(&a, &b);
        let slow = naive_convolve(&a, &b);
        let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn impulse_rir_is_identity_and_delay_shifts() {
        let src = AudioBuffer::mono(gaussian(500, 3), 16000).unwrap();
        let mut delayed = vec![0.0; 8];
        delayed[5] = 1.0;
        let mut unit = vec![0.0; 8];
        unit[0] = 1.0;
        let rir = AudioBuffer::new(vec![unit, delayed], 16000).unwrap();
        let out = convolve_rir(&src, &rir).unwrap();
        let s = src.channel(0).unwrap();
        for (a, b) in out.channel(0).unwrap().iter().zip(s) {
            assert!((a - b).abs() < 1e-12);
        }
        let ch1 = out.channel(1).unwrap();
        assert!(ch1[..5].iter().all(|v| v.abs() < 1e-12));
        for i in 5..500 {
            assert!((ch1[i] - s[i - 5]).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_rir_is_rejected() {
        let src = AudioBuffer::mono(gaussian(100, 3), 16000).unwrap();
        let rir = AudioBuffer::new(vec![Vec::new()], 16000).unwrap();
        assert!(convolve_rir(&src, &rir).is_err());
    }

    #[test]
    fn closed_form_gains() {
        let c = AudioBuffer::mono(vec![1.0, -1.0, 1.0, -1.0], 16000).unwrap();
        let n = AudioBuffer::mono(vec![1.0, 1.0, -1.0, -1.0], 16000).unwrap();
        let g0 = mix_at_sir(&c, &n, &MixSpec::new(0.0, 0, 0).unwrap()).unwrap().gain;
        assert!((g0 - 1.0).abs() < 1e-15);
        let g10 = mix_at_sir(&c, &n, &MixSpec::new(10.0, 0, 0).unwrap()).unwrap().gain;
        assert!((g10 - 10f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn achieved_sir_matches_target() {
        let c = AudioBuffer::new(vec![gaussian(4000, 4), gaussian(4000, 5)], 16000).unwrap();
        let n = AudioBuffer::new(vec![gaussian(4000, 6), gaussian(4000, 7)], 16000).unwrap();
        for target in [-10.0, -5.0, 0.0, 5.0, 10.0] {
            let spec = MixSpec::new(target, 1, 0).unwrap();
            let m = mix_at_sir(&c, &n, &spec).unwrap();
            let got = measured_sir_db(c.channel(1).unwrap(), m.scaled_noise.channel(1).unwrap());
            assert!((got - target).abs() < 1e-9, "{got} vs {target}");
            let mix0 = m.mixture.channel(0).unwrap();
            let expect = c.channel(0).unwrap()[10] + m.gain * n.channel(0).unwrap()[10];
            assert!((mix0[10] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn mix_errors() {
        let c = AudioBuffer::mono(gaussian(100, 1), 16000).unwrap();
        let z = AudioBuffer::mono(vec![0.0; 100], 16000).unwrap();
        assert!(MixSpec::new(11.0, 0, 0).is_err());
        let spec = MixSpec::new(0.0, 0, 0).unwrap();
        assert!(matches!(mix_at_sir(&c, &z, &spec), Err(Error::SilentReference(_))));
        let bad = MixSpec { ref_channel: 3, ..spec };
        assert!(mix_at_sir(&c, &c, &bad).is_err());
    }

    #[test]
    fn pre_rir_calibration_uses_dry_energies() {
        let clean = AudioBuffer::mono(gaussian(3000, 1), 16000).unwrap();
        let noise = AudioBuffer::mono(gaussian(3000, 2), 16000).unwrap();
        let rc = AudioBuffer::new(vec![vec![1.0, 0.5], vec![0.3, 0.0]], 16000).unwrap();
        let rn = AudioBuffer::new(vec![vec![2.0, 0.0], vec![0.1, 0.1]], 16000).unwrap();
        let spec = MixSpec::new(5.0, 0, 0).unwrap();
        let pre = render_mixture(&clean, &noise, &rc, &rn, &spec, Calibration::PreRir).unwrap();
        let dry = sir_gain(energy(clean.channel(0).unwrap()), energy(noise.channel(0).unwrap()), 5.0);
        assert!((pre.mix.gain - dry).abs() < 1e-15);
        let post = render_mixture(&clean, &noise, &rc, &rn, &spec, Calibration::PostRir).unwrap();
        let got = measured_sir_db(
            post.clean_img.channel(0).unwrap(),
            post.mix.scaled_noise.channel(0).unwrap(),
        );
        assert!((got - 5.0).abs() < 1e-9);
    }

    #[test]
    fn geometry_bounds() {
        let g = |a, b, c| ArrayGeometry {
            interaural_m: a,
            lateral_offset_m: b,
            vertical_offset_m: c,
        };
        assert!(validate_geometry(&g(0.15, 0.015, 0.012)).is_empty());
        assert!(validate_geometry(&g(0.12, 0.01, 0.01)).is_empty());
        assert!(validate_geometry(&g(0.18, 0.02, 0.015)).is_empty());
        let v = validate_geometry(&g(0.20, 0.015, 0.012));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "interaural");
        assert_eq!(validate_geometry(&g(0.0, 0.0, 0.0)).len(), 3);
    }

    #[test]
    fn ssn_errors() {
        assert!(generate_ssn(&[], 1.0, 0).is_err());
        let short = AudioBuffer::mono(gaussian(16000, 1), 16000).unwrap();
        assert!(generate_ssn(std::slice::from_ref(&short), 1.0, 0).is_err());
        let other = AudioBuffer::mono(gaussian(8000 * 40, 1), 8000).unwrap();
        let long = AudioBuffer::mono(gaussian(16000 * 40, 1), 16000).unwrap();
        assert!(matches!(
            generate_ssn(&[long, other], 1.0, 0),
            Err(Error::SampleRateMismatch(8000, 16000))
        ));
    }

    #[test]
    fn white_corpus_gives_flat_ssn() {
        let corpus = vec![AudioBuffer::mono(gaussian(16000 * 40, 11), 16000).unwrap()];
        let ssn = generate_ssn(&corpus, 40.0, 3).unwrap();
        let rms = (energy(ssn.channel(0).unwrap()) / ssn.len() as f64).sqrt();
        assert!((rms - 1.0).abs() < 1e-12);
        let want = normalised(band_levels_db(&welch_psd(&corpus, 512).unwrap(), 16000.0, 160.0, 7000.0));
        let got = normalised(band_levels_db(&welch_psd(&[ssn], 512).unwrap(), 16000.0, 160.0, 7000.0));
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1.0, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn sine_corpus_concentrates_energy() {
        let sr = 16000.0;
        let f0 = 1000.0;
        let x: Vec<f64> = (0..16000 * 31)
            .map(|i| (2.0 * PI * f0 * i as f64 / sr).sin())
            .collect();
        let ssn = generate_ssn(&[AudioBuffer::mono(x, 16000).unwrap()], 20.0, 1).unwrap();
        let psd = welch_psd(&[ssn], 512).unwrap();
        let df = sr / 512.0;
        let (a, b) = (f0 * 2f64.powf(-1.0 / 6.0), f0 * 2f64.powf(1.0 / 6.0));
        let band: f64 = psd
            .iter()
            .enumerate()
            .filter(|(k, _)| (*k as f64 * df) >= a && (*k as f64 * df) < b)
            .map(|(_, p)| p)
            .sum();
        let total: f64 = psd.iter().sum();
        assert!(band / total >= 0.9, "{}", band / total);
    }

    #[test]
    fn ssn_is_deterministic() {
        let corpus = vec![AudioBuffer::mono(gaussian(16000 * 31, 2), 16000).unwrap()];
        let a = generate_ssn(&corpus, 2.0, 9).unwrap();
        let b = generate_ssn(&corpus, 2.0, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_ssn(&corpus, 2.0, 10).unwrap());
    }

    #[test]
    fn manifest_roundtrip_and_split() {
        let pools = ManifestPools {
            clean: vec!["c0.wav".into(), "c1.wav".into()],
            ssn: vec!["ssn.wav".into()],
            ecological: vec!["cafe.wav".into(), "street.wav".into()],
            rirs: vec![("r0c.wav".into(), "r0n.wav".into())],
        };
        let plan = plan_manifest(&pools, 20, 0.3, 4).unwrap();
        assert_eq!(plan.iter().filter(|e| e.noise_path == "ssn.wav").count(), 6);
        for e in &plan {
            assert!(validate_geometry(&e.geometry).is_empty());
            assert!((-10.0..=10.0).contains(&e.target_sir_db));
        }
        let mut buf = Vec::new();
        write_manifest(&plan, &mut buf).unwrap();
        assert_eq!(read_manifest(buf.as_slice()).unwrap(), plan);
        assert_eq!(plan, plan_manifest(&pools, 20, 0.3, 4).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn convolution_is_linear(seed in 0u64..500, a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let x = gaussian(300, seed);
                let y = gaussian(300, seed + 1);
                let h = gaussian(40, seed + 2);
                let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
                let lhs = fft_convolve(&combo, &h);
                let cx = fft_convolve(&x, &h);
                let cy = fft_convolve(&y, &h);
                for i in 0..lhs.len() {
                    prop_assert!((lhs[i] - (a * cx[i] + b * cy[i])).abs() < 1e-9);
                }
            }
        }
    }
}
