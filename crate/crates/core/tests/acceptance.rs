//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdrkit::decomp::{decompose, frequency_aggregated_sdr, time_ratios};
use sdrkit::loss::{grad_check, Domain, Loss, LossConfig, LossId, SpectralScale, WeightingKind};
use sdrkit::metrics::{report_signals, stoi, MetricConfig};
use sdrkit::mixer::{generate_ssn, measured_sir_db, render_mixture, welch_psd, Calibration, MixSpec};
use sdrkit::phoneme::{per_category_metrics, write_phoneme_csv, PhonemeCategory, PhonemeSegment, SegmentMode};
use sdrkit::scales::{default_mel_filterbank, third_octave_bands, Filterbank};
use sdrkit::signal::{energy, stft, AudioBuffer, StftConfig};
use sdrkit::weighting::{weights_sir_softmax, SirSoftmax, WeightMap};

use common::{gaussian, speech, speech_fixtures, SR};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn db(num: f64, den: f64) -> f64 {
    10.0 * (num / den).log10()
}

fn decomposition_exactness() -> Outcome {
    let start = Instant::now();
    let (mut worst_recon, mut worst_orth, mut worst_db) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let (c, n, a) = (gaussian(64, 3 * i), gaussian(64, 3 * i + 1), gaussian(64, 3 * i + 2));
        let (k1, k2, k3) = (rng.random_range(0.2..2.0), rng.random_range(-1.5..1.5), rng.random_range(0.0..1.0));
        let est: Vec<f64> = (0..64).map(|t| k1 * c[t] + k2 * n[t] + k3 * a[t]).collect();
        let d = decompose(&est, &c, &n).map_err(|e| e.to_string())?;

        let r = d.reconstruct();
        let diff: Vec<f64> = est.iter().zip(&r).map(|(x, y)| x - y).collect();
        worst_recon = worst_recon.max((energy(&diff) / energy(&est)).sqrt());

        let ne = energy(&est).sqrt();
        for (x, y) in [(&d.e_artif, &c), (&d.e_artif, &n), (&d.e_interf, &c), (&d.e_interf, &d.s_proj)] {
            worst_orth = worst_orth.max(dot(x, y).abs() / (ne * energy(y).sqrt().max(1e-300)));
        }

        // Independent 2x2 normal equations for the projection on span{c, n}.
        let (cc, cn, nn, ec, en) = (dot(&c, &c), dot(&c, &n), dot(&n, &n), dot(&est, &c), dot(&est, &n));
        let det = cc * nn - cn * cn;
        let alpha = (ec * nn - en * cn) / det;
        let beta = (cc * en - cn * ec) / det;
        let s: Vec<f64> = c.iter().map(|v| ec / cc * v).collect();
        let p: Vec<f64> = (0..64).map(|t| alpha * c[t] + beta * n[t]).collect();
        let ei: Vec<f64> = (0..64).map(|t| p[t] - s[t]).collect();
        let ea: Vec<f64> = (0..64).map(|t| est[t] - p[t]).collect();
        let ed: Vec<f64> = (0..64).map(|t| ei[t] + ea[t]).collect();
        let oracle = [db(energy(&s), energy(&ed)), db(energy(&s), energy(&ei)), db(energy(&p), energy(&ea))];
        let got = time_ratios(&d);
        for (o, g) in oracle.iter().zip([got.sdr_db, got.sir_db, got.sar_db]) {
            worst_db = worst_db.max((o - g).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst_recon <= 1e-10, || format!("reconstruction error {worst_recon:e}"))?;
    ensure(worst_orth <= 1e-8, || format!("orthogonality residual {worst_orth:e}"))?;
    ensure(worst_db <= 1e-9, || format!("oracle mismatch {worst_db:e} dB"))?;
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!(
        "recon {worst_recon:.1e}, orth {worst_orth:.1e}, oracle {worst_db:.1e} dB, {secs:.2} s"
    ))
}

fn parseval_consistency() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let len = 64 + (i as usize * 37) % 1500;
        let (c, n, a) = (gaussian(len, 10 * i), gaussian(len, 10 * i + 1), gaussian(len, 10 * i + 2));
        let est: Vec<f64> = (0..len).map(|t| c[t] + 0.4 * n[t] + 0.2 * a[t]).collect();
        let d = decompose(&est, &c, &n).map_err(|e| e.to_string())?;
        worst = worst.max((time_ratios(&d).sdr_db - frequency_aggregated_sdr(&d)).abs());
    }
    ensure(worst <= 1e-6, || format!("max difference {worst:e} dB"))?;
    Ok(format!("max difference {worst:.1e} dB over 100 instances"))
}

/// `-10 log10(sum P_proj / sum P_dist)` recomputed with explicit loops.
fn aggregated_loss(est: &[f64], c: &[f64], n: &[f64], fb: Option<&Filterbank>) -> f64 {
    let d = decompose(est, c, n).unwrap();
    let cfg = StftConfig::default();
    let pp = stft(&d.s_proj, &cfg, SR).unwrap().power();
    let pd = stft(&d.e_dist(), &cfg, SR).unwrap().power();
    let (mut num, mut den) = (0.0, 0.0);
    for t in 0..pp.ncols() {
        match fb {
            None => {
                for f in 0..pp.nrows() {
                    num += pp[[f, t]];
                    den += pd[[f, t]];
                }
            }
            Some(fb) => {
                for b in 0..fb.num_bands() {
                    for f in 0..pp.nrows() {
                        num += fb.weights()[[b, f]] * pp[[f, t]];
                        den += fb.weights()[[b, f]] * pd[[f, t]];
                    }
                }
            }
        }
    }
    -db(num, den)
}

fn weighted_reduction() -> Outcome {
    let mel = default_mel_filterbank(512, SR).map_err(|e| e.to_string())?;
    let third = third_octave_bands(512, SR).map_err(|e| e.to_string())?;
    let scales: Vec<(&str, Loss, Option<&Filterbank>)> = vec![
        ("linear", Loss::new(LossConfig::new(LossId::L3)).unwrap(), None),
        ("mel", Loss::new(LossConfig::new(LossId::L4)).unwrap(), Some(&mel)),
        (
            "third-octave",
            Loss::new(LossConfig::new(LossId::L4)).unwrap().with_filterbank(third.clone()).unwrap(),
            Some(&third),
        ),
    ];
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let len = 4000;
        let (c, n, a) = (gaussian(len, seed), gaussian(len, seed + 50), gaussian(len, seed + 99));
        let est: Vec<f64> = (0..len).map(|t| c[t] + 0.6 * n[t] + 0.3 * a[t]).collect();
        for (_, loss, fb) in &scales {
            let oracle = aggregated_loss(&est, &c, &n, *fb);
            let frames = StftConfig::default().num_frames(len).unwrap();
            let rows = fb.map_or(257, |f| f.num_bands());
            for k in [1e-3, 1.0, 7.5] {
                let w = WeightMap::constant((rows, frames), k).unwrap();
                let v = loss.eval_with_weights(&est, &c, &n, Some(w)).map_err(|e| e.to_string())?.value;
                worst = worst.max((v - oracle).abs());
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e} dB"))?;
    Ok(format!("linear, mel, third-octave; max deviation {worst:.1e} dB"))
}

fn softmax_suite() -> Outcome {
    let mut worst_sum = 0.0f64;
    let mut worst_shift = 0.0f64;
    let mut worst_scale = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sir_db = Array2::from_shape_fn((33, 17), |_| rng.random_range(-30.0..30.0));
        let sir_lin = sir_db.mapv(|v: f64| 10f64.powf(v / 10.0));
        let shift = rng.random_range(-20.0..20.0);
        let scale = rng.random_range(0.05..20.0);
        let a = weights_sir_softmax(&sir_db, SirSoftmax::NegSir).unwrap();
        let b = weights_sir_softmax(&sir_db.mapv(|v| v + shift), SirSoftmax::NegSir).unwrap();
        let c = weights_sir_softmax(&sir_lin, SirSoftmax::NegLogSir).unwrap();
        let d = weights_sir_softmax(&sir_lin.mapv(|v| v * scale), SirSoftmax::NegLogSir).unwrap();
        worst_sum = worst_sum.max((a.w.sum() - 1.0).abs()).max((c.w.sum() - 1.0).abs());
        for (x, y) in a.w.iter().zip(b.w.iter()) {
            worst_shift = worst_shift.max((x - y).abs());
        }
        for (x, y) in c.w.iter().zip(d.w.iter()) {
            worst_scale = worst_scale.max((x - y).abs());
        }
    }
    ensure(worst_sum <= 1e-9, || format!("sum deviation {worst_sum:e}"))?;
    ensure(worst_shift <= 1e-12, || format!("shift variance {worst_shift:e}"))?;
    ensure(worst_scale <= 1e-12, || format!("scale variance {worst_scale:e}"))?;

    let two = Array2::from_shape_vec((1, 2), vec![10.0, 0.0]).unwrap();
    let w = weights_sir_softmax(&two, SirSoftmax::NegSir).unwrap();
    let e = (-10.0f64).exp();
    let hand = [e / (e + 1.0), 1.0 / (e + 1.0)];
    let lin = Array2::from_shape_vec((1, 2), vec![4.0, 1.0]).unwrap();
    let v = weights_sir_softmax(&lin, SirSoftmax::NegLogSir).unwrap();
    let mut worst_hand = 0.0f64;
    for (g, h) in w.w.iter().zip(hand).chain(v.w.iter().zip([0.2, 0.8])) {
        worst_hand = worst_hand.max((g - h).abs());
    }
    ensure(worst_hand <= 1e-12, || format!("hand examples off by {worst_hand:e}"))?;
    Ok(format!(
        "sum {worst_sum:.1e}, shift {worst_shift:.1e}, scale {worst_scale:.1e}, hand {worst_hand:.1e}"
    ))
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for id in LossId::ALL {
        let r = grad_check(&LossConfig::new(id), 10, 1024, 2024).map_err(|e| e.to_string())?;
        if !(r.max_rel_err < 1e-5) {
            failures.push(format!("{id}: {:e}", r.max_rel_err));
        }
        parts.push(format!("{id} {:.1e}", r.max_rel_err));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(failures.is_empty(), || failures.join(", "))?;
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{}; {secs:.1} s", parts.join(", ")))
}

fn catalog_integrity() -> Outcome {
    use Domain::*;
    use SpectralScale as S;
    use WeightingKind as W;
    let table = [
        (LossId::L1, Time, S::None, W::None),
        (LossId::L2, Frequency, S::None, W::None),
        (LossId::L3, Tf, S::Linear, W::None),
        (LossId::L4, Tf, S::Mel, W::None),
        (LossId::L5, Tf, S::Linear, W::SpectralMagnitude),
        (LossId::L6, Tf, S::Mel, W::SpectralMagnitude),
        (LossId::L7, Tf, S::Mel, W::Ansi),
        (LossId::L8, Tf, S::Linear, W::NegSir),
        (LossId::L9, Tf, S::Linear, W::NegLogSir),
        (LossId::L10, Tf, S::Mel, W::NegSir),
        (LossId::L11, Tf, S::Mel, W::NegLogSir),
    ];
    for (id, dom, scale, w) in table {
        let cfg = LossConfig::new(id);
        ensure((cfg.domain(), cfg.scale(), cfg.weighting()) == (dom, scale, w), || {
            format!("{id} has {:?}", (cfg.domain(), cfg.scale(), cfg.weighting()))
        })?;
    }
    let mut worst = 0.0f64;
    for (mel, lin) in [(LossId::L4, LossId::L3), (LossId::L6, LossId::L5), (LossId::L10, LossId::L8), (LossId::L11, LossId::L9)] {
        let m = Loss::new(LossConfig::new(mel))
            .unwrap()
            .with_filterbank(Filterbank::identity(257))
            .unwrap();
        let l = Loss::new(LossConfig::new(lin)).unwrap();
        for seed in 0..5u64 {
            let (c, n, a) = (gaussian(3000, seed), gaussian(3000, seed + 7), gaussian(3000, seed + 13));
            let est: Vec<f64> = (0..3000).map(|t| c[t] + 0.5 * n[t] + 0.2 * a[t]).collect();
            let vm = m.eval(&est, &c, &n).map_err(|e| e.to_string())?.value;
            let vl = l.eval(&est, &c, &n).map_err(|e| e.to_string())?.value;
            worst = worst.max((vm - vl).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("identity-filterbank mismatch {worst:e}"))?;
    Ok(format!("11 triples match; identity equivalences within {worst:.1e}"))
}

fn stoi_criterion() -> Outcome {
    let mut worst_self = 0.0f64;
    let mut lines = Vec::new();
    for (i, s) in speech_fixtures().iter().enumerate() {
        let one = stoi(s, s, SR).map_err(|e| e.to_string())?;
        worst_self = worst_self.max((one - 1.0).abs());
        let es = energy(s);
        let w = gaussian(s.len(), 900 + i as u64);
        let ew = energy(&w);
        let scores: Vec<f64> = [20.0, 10.0, 0.0, -10.0]
            .iter()
            .map(|snr: &f64| {
                let g = (es / (ew * 10f64.powf(snr / 10.0))).sqrt();
                let y: Vec<f64> = s.iter().zip(&w).map(|(a, b)| a + g * b).collect();
                stoi(s, &y, SR).unwrap()
            })
            .collect();
        ensure(scores.windows(2).all(|p| p[0] > p[1]), || {
            format!("fixture {i} not strictly decreasing: {scores:?}")
        })?;
        lines.push(format!("{:.2}", scores[3]));
    }
    ensure(worst_self <= 1e-6, || format!("stoi(s, s) off by {worst_self:e}"))?;
    Ok(format!(
        "stoi(s,s) within {worst_self:.1e}; monotone on 10 fixtures (scores at -10 dB: {})",
        lines.join(" ")
    ))
}

fn l3_monotone() -> Outcome {
    let c = speech(1.0, 3);
    let n = gaussian(c.len(), 4);
    let loss = Loss::new(LossConfig::new(LossId::L3)).unwrap();
    let vals: Vec<f64> = [0.1, 0.5, 1.0]
        .iter()
        .map(|a| {
            let est: Vec<f64> = c.iter().zip(&n).map(|(x, y)| x + a * y).collect();
            loss.eval(&est, &c, &n).unwrap().value
        })
        .collect();
    ensure(vals.windows(2).all(|p| p[0] < p[1]), || format!("{vals:?}"))?;
    Ok(format!("L3 = {:.3} < {:.3} < {:.3}", vals[0], vals[1], vals[2]))
}

fn third_octave_levels(psd: &[f64]) -> Vec<f64> {
    let df = SR as f64 / 512.0;
    let bands: Vec<f64> = (-8..=3).flat_map(|i| [0, 1, 2].map(|j| 1000.0 * 2f64.powf((3 * i + j) as f64 / 3.0)))
        .filter(|&c| (157.0..=8001.0).contains(&c))
        .collect();
    let energies: Vec<f64> = bands
        .iter()
        .map(|&c| {
            let (lo, hi) = (c * 2f64.powf(-1.0 / 6.0), c * 2f64.powf(1.0 / 6.0));
            psd.iter()
                .enumerate()
                .filter(|(k, _)| {
                    let f = *k as f64 * df;
                    f >= lo && f < hi
                })
                .map(|(_, p)| p)
                .sum()
        })
        .collect();
    let total: f64 = energies.iter().sum();
    energies.iter().map(|e| 10.0 * (e / total).log10()).collect()
}

fn mixer_criterion() -> Outcome {
    let clean = AudioBuffer::mono(speech(2.0, 21), SR).unwrap();
    let noise = AudioBuffer::mono(gaussian(20000, 22), SR).unwrap();
    let rc = common::random_rirs(2, 800, 30);
    let rn = common::random_rirs(2, 800, 40);
    let mut worst = 0.0f64;
    for target in [-10.0, -5.0, 0.0, 5.0, 10.0] {
        for ch in 0..2 {
            let spec = MixSpec::new(target, ch, 0).unwrap();
            let r = render_mixture(&clean, &noise, &rc, &rn, &spec, Calibration::PostRir).map_err(|e| e.to_string())?;
            let got = measured_sir_db(r.clean_img.channel(ch).unwrap(), r.mix.scaled_noise.channel(ch).unwrap());
            worst = worst.max((got - target).abs());
        }
    }
    ensure(worst <= 0.01, || format!("achieved SIR off by {worst} dB"))?;

    let corpus: Vec<AudioBuffer> = speech_fixtures()
        .into_iter()
        .map(|s| AudioBuffer::mono(s, SR).unwrap())
        .collect();
    let ssn = generate_ssn(&corpus, 60.0, 5).map_err(|e| e.to_string())?;
    let want = third_octave_levels(&welch_psd(&corpus, 512).unwrap());
    let got = third_octave_levels(&welch_psd(&[ssn], 512).unwrap());
    let dev = want.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    ensure(want.len() == 18, || format!("{} bands", want.len()))?;
    ensure(dev <= 1.0, || format!("SSN spectrum off by {dev:.2} dB: want {want:?} got {got:?}"))?;
    Ok(format!("SIR error {worst:.1e} dB at -10..10 dB; SSN max band deviation {dev:.2} dB over 18 bands"))
}

fn phoneme_criterion() -> Outcome {
    let clean = speech(2.0, 31);
    let noise = gaussian(clean.len(), 32);
    let noise: Vec<f64> = noise.iter().map(|v| 0.05 * v).collect();
    let art = gaussian(clean.len(), 33);
    let mix: Vec<f64> = clean.iter().zip(&noise).map(|(c, n)| c + n).collect();
    let est: Vec<f64> = (0..clean.len()).map(|i| clean[i] + 0.3 * noise[i] + 0.002 * art[i]).collect();
    let cfg = MetricConfig::default();
    let run = |segs: &[PhonemeSegment]| {
        per_category_metrics(&est, &mix, &clean, &noise, SR, segs, &cfg, SegmentMode::Concatenate).unwrap()
    };
    let seg = |a, b, p| PhonemeSegment::new(a, b, p).unwrap();
    let joined = run(&[seg(0.2, 0.6, "S"), seg(0.6, 1.4, "AA1")]);
    let split = run(&[seg(0.2, 0.45, "S"), seg(0.45, 0.6, "Z"), seg(0.6, 1.4, "AA1")]);
    let (x, y) = (joined.rows[&PhonemeCategory::Fricative], split.rows[&PhonemeCategory::Fricative]);
    let pairs = [
        (x.sir_in, y.sir_in),
        (x.sir_out, y.sir_out),
        (x.sar_out, y.sar_out),
        (x.sdr_out, y.sdr_out),
        (x.fw_sir_in, y.fw_sir_in),
        (x.fw_sir_out, y.fw_sir_out),
        (x.fw_sar_out, y.fw_sar_out),
        (x.fw_sdr_out, y.fw_sdr_out),
    ];
    let split_dev = pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    ensure(split_dev <= 1e-9, || format!("split changes metrics by {split_dev:e} dB"))?;

    let whole = run(&[seg(0.0, 2.0, "IY")]);
    let direct = report_signals(&mix, &est, &clean, &noise, SR, &MetricConfig { stoi: false, ..cfg.clone() })
        .map_err(|e| e.to_string())?;
    ensure(whole.rows.len() == 1 && whole.rows[&PhonemeCategory::Vowel] == direct, || {
        "single-segment table differs from whole-utterance report".into()
    })?;

    let mut buf = Vec::new();
    write_phoneme_csv(&[("L3".into(), joined)], &mut buf).unwrap();
    let header = String::from_utf8(buf).unwrap().lines().next().unwrap_or("").to_string();
    let want = "Loss,Phoneme,SIR_in,SIR_out,SAR_out,SDR_out,FW-SIR_in,FW-SIR_out,FW-SAR_out,FW-SDR_out";
    ensure(header == want, || format!("header {header:?}"))?;
    Ok(format!("split deviation {split_dev:.1e} dB; degenerate case exact; header ok"))
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_eval.json")
}

fn close(a: &serde_json::Value, b: &serde_json::Value) -> bool {
    use serde_json::Value::*;
    match (a, b) {
        (Number(x), Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0)
        }
        (Object(x), Object(y)) => x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| close(v, w))),
        _ => a == b,
    }
}

fn cli_regression() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (est, mix, clean, noise) = common::eval_fixture();
    let paths: Vec<String> = [("est", &est), ("mix", &mix), ("clean", &clean), ("noise", &noise)]
        .iter()
        .map(|(name, x)| {
            let p = dir.path().join(format!("{name}.wav"));
            common::write_mono(&p, x);
            p.display().to_string()
        })
        .collect();
    let run = |extra: &[&str]| {
        let mut args = vec!["sdrkit".to_string(), "eval".to_string()];
        args.extend(paths.iter().cloned());
        args.extend(extra.iter().map(|s| s.to_string()));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = sdrkit::cli::run_with(args, &mut out, &mut err);
        (code, out, String::from_utf8_lossy(&err).to_string())
    };
    let (c1, a, e1) = run(&[]);
    let (c2, b, _) = run(&[]);
    ensure(c1 == 0 && c2 == 0, || format!("exit codes {c1}, {c2}: {e1}"))?;
    ensure(a == b, || "JSON output differs between runs".into())?;

    let value: serde_json::Value = serde_json::from_slice(&a).map_err(|e| e.to_string())?;
    let golden = golden_path();
    if std::env::var_os("SDRKIT_BLESS").is_some() {
        std::fs::write(&golden, &a).map_err(|e| e.to_string())?;
    }
    let frozen: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&golden).map_err(|e| format!("{}: {e}", golden.display()))?)
            .map_err(|e| e.to_string())?;
    ensure(close(&value, &frozen), || format!("output {value} differs from golden {frozen}"))?;

    let (c3, csv, _) = run(&["--format", "csv"]);
    let header = String::from_utf8(csv).unwrap().lines().next().unwrap_or("").to_string();
    ensure(c3 == 0, || format!("csv exit code {c3}"))?;
    ensure(header == "SIR_out,SAR_out,SDR_out,FW-SIR_out,FW-SAR_out,FW-SDR_out,STOI_out", || {
        format!("csv header {header:?}")
    })?;
    Ok("byte-stable JSON matching golden fixture; CSV column order ok".into())
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("decomposition exactness", decomposition_exactness),
        ("parseval consistency", parseval_consistency),
        ("constant-weight reduction", weighted_reduction),
        ("softmax weight suite", softmax_suite),
        ("gradient checks L1-L11", gradient_checks),
        ("catalog integrity", catalog_integrity),
        ("stoi", stoi_criterion),
        ("L3 monotonicity", l3_monotone),
        ("mixer", mixer_criterion),
        ("phoneme pipeline", phoneme_criterion),
        ("cli regression", cli_regression),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
