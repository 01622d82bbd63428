use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{
    error_kind, write_error_record, Cli, Command, EvalArgs, Format, GlobalOpts, GradcheckArgs, LossArgs,
    MixArgs, PhonemeArgs, SampleFormat, SsnArgs, EXIT_OK, EXIT_PARTIAL,
};
use crate::decomp::DbClamp;
use crate::error::{Error, Result};
use crate::format::{serialize_db, sig6};
use crate::loss::{grad_check, Loss, LossConfig, LossId, SirSource};
use crate::metrics::{report, FwConfig, MetricConfig, MetricReport, FW_CLAMP};
use crate::mixer::{
    generate_ssn, measured_sir_db, plan_manifest, read_manifest, render_mixture, validate_geometry,
    write_manifest, Calibration, ManifestEntry, ManifestPools, MixSpec,
};
use crate::phoneme::{load_alignment, per_category_metrics, write_phoneme_csv, CategoryTable, SegmentMode};
use crate::signal::{read_wav, write_wav, AudioBuffer, StftConfig, WavFormat};

pub(super) fn dispatch<O: Write, E: Write>(cli: &Cli, out: &mut O, err: &mut E) -> Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let g = &cli.global;
    let (result, obuf, ebuf) = pool.install(|| {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let r = match &cli.command {
            Command::Eval(a) => eval(g, a, &mut o, &mut e),
            Command::Loss(a) => loss(g, a, &mut o),
            Command::Gradcheck(a) => gradcheck(g, a, &mut o),
            Command::Ssn(a) => ssn(g, a, &mut o),
            Command::Mix(a) => mix(g, a, &mut o, &mut e),
            Command::Phoneme(a) => phoneme(g, a, &mut o, &mut e),
        };
        (r, o, e)
    });
    err.write_all(&ebuf)?;
    let code = result?;
    out.write_all(&obuf)?;
    out.flush()?;
    Ok(code)
}

fn stft_config(g: &GlobalOpts) -> Result<StftConfig> {
    StftConfig::new(g.stft_size, g.hop)
}

fn metric_config(g: &GlobalOpts, stoi: bool) -> Result<MetricConfig> {
    Ok(MetricConfig {
        fw: FwConfig {
            stft: stft_config(g)?,
            mel_bands: g.mel_bands,
            gamma: g.gamma,
            clamp: g.clamp_db.unwrap_or(FW_CLAMP),
            ..FwConfig::default()
        },
        ref_channel: g.ref_channel,
        stoi,
    })
}

fn json_line<O: Write, T: Serialize>(out: &mut O, v: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, v)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn wav_format(f: SampleFormat) -> WavFormat {
    match f {
        SampleFormat::Pcm16 => WavFormat::Pcm16,
        SampleFormat::Float32 => WavFormat::Float32,
    }
}

/// Reference channel of `b`, or its only channel.
fn reference(b: &AudioBuffer, ch: usize) -> Result<Vec<f64>> {
    Ok(b.channel(if b.num_channels() == 1 { 0 } else { ch })?.to_vec())
}

/// Whitespace-separated path lists, one item per line; blank lines and
/// `#` comments are skipped.
fn read_list(path: &Path, fields: usize) -> Result<Vec<Vec<PathBuf>>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut items = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<PathBuf> = line.split_whitespace().map(PathBuf::from).collect();
        if parts.len() != fields {
            return Err(Error::InvalidArgument(format!(
                "{}:{}: expected {fields} paths, got {}",
                path.display(),
                n + 1,
                parts.len()
            )));
        }
        items.push(parts);
    }
    Ok(items)
}

/// Writes successes in input order and an error record per failure.
fn finish_batch<T, E: Write>(results: Vec<Result<T>>, err: &mut E) -> (Vec<T>, i32) {
    let mut ok = Vec::new();
    let mut code = EXIT_OK;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::error!("item {i} failed: {e}");
                let (kind, _) = error_kind(&e);
                write_error_record(err, kind, EXIT_PARTIAL, format!("item {i}: {e}"));
                code = EXIT_PARTIAL;
            }
        }
    }
    (ok, code)
}

fn eval_one(paths: &[PathBuf], cfg: &MetricConfig) -> Result<MetricReport> {
    let est = read_wav(&paths[0])?;
    let mix = read_wav(&paths[1])?;
    let clean = read_wav(&paths[2])?;
    let noise = read_wav(&paths[3])?;
    report(&mix, &est, &clean, &noise, cfg)
}

fn eval<O: Write, E: Write>(g: &GlobalOpts, a: &EvalArgs, out: &mut O, err: &mut E) -> Result<i32> {
    let cfg = metric_config(g, !a.no_stoi)?;
    let (reports, code) = match &a.list {
        None => (vec![eval_one(&a.paths, &cfg)?], EXIT_OK),
        Some(list) => {
            let items = read_list(list, 4)?;
            let results: Vec<Result<MetricReport>> = items.par_iter().map(|p| eval_one(p, &cfg)).collect();
            finish_batch(results, err)
        }
    };
    match g.format {
        Format::Json => {
            for r in &reports {
                json_line(out, r)?;
            }
        }
        Format::Csv => MetricReport::write_csv(&reports, &mut *out)?,
    }
    Ok(code)
}

#[derive(Serialize)]
struct LossRecord {
    id: LossId,
    #[serde(serialize_with = "serialize_db")]
    value: f64,
}

fn loss<O: Write>(g: &GlobalOpts, a: &LossArgs, out: &mut O) -> Result<i32> {
    let bufs = a.paths.iter().map(read_wav).collect::<Result<Vec<_>>>()?;
    let sr = bufs[0].sample_rate();
    if let Some(b) = bufs.iter().find(|b| b.sample_rate() != sr) {
        return Err(Error::SampleRateMismatch(b.sample_rate(), sr));
    }
    let sig = bufs
        .iter()
        .map(|b| reference(b, g.ref_channel))
        .collect::<Result<Vec<_>>>()?;
    let cfg = LossConfig {
        stft: stft_config(g)?,
        sample_rate: sr,
        mel_bands: g.mel_bands,
        gamma: g.gamma,
        clamp: g.clamp_db.unwrap_or(DbClamp::LOSS),
        sir_source: if a.oracle_sir {
            SirSource::Oracle
        } else {
            SirSource::Estimate
        },
        ..LossConfig::new(a.id)
    };
    let value = Loss::new(cfg)?.eval(&sig[0], &sig[1], &sig[2])?;
    if let Some(path) = &a.weights_csv {
        match &value.weights {
            Some(w) => w.write_csv(BufWriter::new(File::create(path)?))?,
            None => log::warn!("{} has no weight map; {} not written", a.id, path.display()),
        }
    }
    if let Some(path) = &a.map_csv {
        match &value.sdr_map {
            Some(m) => {
                let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
                w.write_record(["band", "frame", "sdr_db"])?;
                for ((b, t), v) in m.indexed_iter() {
                    w.write_record([b.to_string(), t.to_string(), sig6(*v)])?;
                }
                w.flush()?;
            }
            None => log::warn!("{} has no per-bin map; {} not written", a.id, path.display()),
        }
    }
    let rec = LossRecord {
        id: a.id,
        value: value.value,
    };
    match g.format {
        Format::Json => json_line(out, &rec)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["id", "value"])?;
            w.write_record([rec.id.to_string(), sig6(rec.value)])?;
            w.flush()?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GradcheckRow {
    id: LossId,
    trials: usize,
    length: usize,
    seed: u64,
    max_rel_err: f64,
    pass: bool,
}

fn gradcheck<O: Write>(g: &GlobalOpts, a: &GradcheckArgs, out: &mut O) -> Result<i32> {
    let stft = stft_config(g)?;
    let mut rows = Vec::new();
    for &id in &a.id.0 {
        let cfg = LossConfig {
            stft,
            mel_bands: g.mel_bands,
            gamma: g.gamma,
            clamp: g.clamp_db.unwrap_or(DbClamp::LOSS),
            ..LossConfig::new(id)
        };
        let r = grad_check(&cfg, a.trials, a.length, g.seed)?;
        rows.push(GradcheckRow {
            id,
            trials: r.trials,
            length: r.length,
            seed: r.seed,
            max_rel_err: r.max_rel_err,
            pass: r.max_rel_err < a.tol,
        });
    }
    match g.format {
        Format::Json => {
            for r in &rows {
                json_line(out, r)?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["id", "trials", "length", "seed", "max_rel_err", "pass"])?;
            for r in &rows {
                w.write_record([
                    r.id.to_string(),
                    r.trials.to_string(),
                    r.length.to_string(),
                    r.seed.to_string(),
                    sig6(r.max_rel_err),
                    r.pass.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(EXIT_OK)
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::FileNotFound(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Serialize)]
struct SsnRecord {
    out: String,
    corpus_files: usize,
    sample_rate: u32,
    samples: usize,
    clipped: usize,
}

fn ssn<O: Write>(g: &GlobalOpts, a: &SsnArgs, out: &mut O) -> Result<i32> {
    let files = wav_files(&a.corpus)?;
    let corpus = files.iter().map(read_wav).collect::<Result<Vec<_>>>()?;
    let noise = generate_ssn(&corpus, a.dur, g.seed)?;
    let rep = write_wav(&noise, &a.out, wav_format(a.wav_format))?;
    let rec = SsnRecord {
        out: a.out.display().to_string(),
        corpus_files: files.len(),
        sample_rate: noise.sample_rate(),
        samples: noise.len(),
        clipped: rep.clipped,
    };
    match g.format {
        Format::Json => json_line(out, &rec)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.serialize(&rec)?;
            w.flush()?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct MixRecord {
    index: usize,
    mixture: String,
    target_sir_db: f64,
    achieved_sir_db: f64,
    gain: f64,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn render_one(
    index: usize,
    e: &ManifestEntry,
    base: &Path,
    out_dir: &Path,
    g: &GlobalOpts,
    a: &MixArgs,
) -> Result<MixRecord> {
    let violations = validate_geometry(&e.geometry);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::InvalidArgument(format!("geometry: {}", msg.join("; "))));
    }
    let spec = MixSpec {
        target_sir_db: e.target_sir_db,
        ref_channel: g.ref_channel,
        seed: e.seed,
        ssn_fraction: a.ssn_fraction,
    };
    let calibration = if a.pre_rir {
        Calibration::PreRir
    } else {
        Calibration::PostRir
    };
    let clean = read_wav(resolve(base, &e.clean_path))?;
    let noise = read_wav(resolve(base, &e.noise_path))?;
    let rir_c = read_wav(resolve(base, &e.rir_clean_path))?;
    let rir_n = read_wav(resolve(base, &e.rir_noise_path))?;
    let r = render_mixture(&clean, &noise, &rir_c, &rir_n, &spec, calibration)?;
    let achieved = match calibration {
        Calibration::PostRir => measured_sir_db(
            r.clean_img.channel(g.ref_channel)?,
            r.mix.scaled_noise.channel(g.ref_channel)?,
        ),
        Calibration::PreRir => {
            let n = reference(&noise, 0)?;
            let dry_noise: Vec<f64> = n.iter().cycle().take(clean.len()).map(|v| v * r.mix.gain).collect();
            measured_sir_db(clean.channel(0)?, &dry_noise)
        }
    };
    let fmt = wav_format(a.wav_format);
    let name = |kind: &str| out_dir.join(format!("{kind}_{index:04}.wav"));
    write_wav(&r.mix.mixture, name("mixture"), fmt)?;
    write_wav(&r.clean_img, name("clean"), fmt)?;
    write_wav(&r.mix.scaled_noise, name("noise"), fmt)?;
    Ok(MixRecord {
        index,
        mixture: name("mixture").display().to_string(),
        target_sir_db: e.target_sir_db,
        achieved_sir_db: achieved,
        gain: r.mix.gain,
    })
}

fn mix<O: Write, E: Write>(g: &GlobalOpts, a: &MixArgs, out: &mut O, err: &mut E) -> Result<i32> {
    if let Some(plan) = &a.plan {
        if !plan.exists() {
            return Err(Error::FileNotFound(plan.clone()));
        }
        let pools: ManifestPools = serde_json::from_reader(BufReader::new(File::open(plan)?))?;
        let entries = plan_manifest(&pools, a.count, a.ssn_fraction, g.seed)?;
        write_manifest(&entries, &mut *out)?;
        return Ok(EXIT_OK);
    }
    let manifest = a.manifest.as_ref().expect("clap requires --manifest without --plan");
    let out_dir = a
        .out_dir
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("--out-dir is required to render a manifest".into()))?;
    if !manifest.exists() {
        return Err(Error::FileNotFound(manifest.clone()));
    }
    let entries = read_manifest(BufReader::new(File::open(manifest)?))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(out_dir)?;
    let results: Vec<Result<MixRecord>> = entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| render_one(i, e, base, out_dir, g, a))
        .collect();
    let (records, code) = finish_batch(results, err);
    match g.format {
        Format::Json => {
            for r in &records {
                json_line(out, r)?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["index", "mixture", "target_sir_db", "achieved_sir_db", "gain"])?;
            for r in &records {
                w.write_record([
                    r.index.to_string(),
                    r.mixture.clone(),
                    sig6(r.target_sir_db),
                    sig6(r.achieved_sir_db),
                    sig6(r.gain),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(code)
}

fn phoneme_one(paths: &[PathBuf], align: &Path, g: &GlobalOpts, mode: SegmentMode) -> Result<CategoryTable> {
    let alignment = load_alignment(align)?;
    if alignment.unknown_phones > 0 {
        log::warn!(
            "{}: {} unknown phones mapped to other",
            align.display(),
            alignment.unknown_phones
        );
    }
    let bufs = paths.iter().map(read_wav).collect::<Result<Vec<_>>>()?;
    let sr = bufs[2].sample_rate();
    if let Some(b) = bufs.iter().find(|b| b.sample_rate() != sr) {
        return Err(Error::SampleRateMismatch(b.sample_rate(), sr));
    }
    let sig = bufs
        .iter()
        .map(|b| reference(b, g.ref_channel))
        .collect::<Result<Vec<_>>>()?;
    per_category_metrics(
        &sig[0],
        &sig[1],
        &sig[2],
        &sig[3],
        sr,
        &alignment.segments,
        &metric_config(g, false)?,
        mode,
    )
}

#[derive(Serialize)]
struct PhonemeRow<'a> {
    loss: &'a str,
    phoneme: &'static str,
    #[serde(serialize_with = "serialize_db")]
    sir_in: f64,
    #[serde(serialize_with = "serialize_db")]
    sir_out: f64,
    #[serde(serialize_with = "serialize_db")]
    sar_out: f64,
    #[serde(serialize_with = "serialize_db")]
    sdr_out: f64,
    #[serde(serialize_with = "serialize_db")]
    fw_sir_in: f64,
    #[serde(serialize_with = "serialize_db")]
    fw_sir_out: f64,
    #[serde(serialize_with = "serialize_db")]
    fw_sar_out: f64,
    #[serde(serialize_with = "serialize_db")]
    fw_sdr_out: f64,
}

fn phoneme<O: Write, E: Write>(g: &GlobalOpts, a: &PhonemeArgs, out: &mut O, err: &mut E) -> Result<i32> {
    let mode = if a.segment_mean {
        SegmentMode::SegmentMean
    } else {
        SegmentMode::Concatenate
    };
    let (table, code) = match (&a.list, &a.align) {
        (Some(list), _) => {
            let items = read_list(list, 5)?;
            let results: Vec<Result<CategoryTable>> = items
                .par_iter()
                .map(|p| phoneme_one(&p[1..], &p[0], g, mode))
                .collect();
            let (tables, code) = finish_batch(results, err);
            (CategoryTable::average(&tables), code)
        }
        (None, Some(align)) => {
            if a.paths.len() != 4 {
                return Err(Error::InvalidArgument("expected EST MIX CLEAN NOISE paths".into()));
            }
            (phoneme_one(&a.paths, align, g, mode)?, EXIT_OK)
        }
        (None, None) => return Err(Error::InvalidArgument("either --align or --list is required".into())),
    };
    match g.format {
        Format::Json => {
            for (cat, r) in &table.rows {
                json_line(
                    out,
                    &PhonemeRow {
                        loss: &a.loss_label,
                        phoneme: cat.label(),
                        sir_in: r.sir_in,
                        sir_out: r.sir_out,
                        sar_out: r.sar_out,
                        sdr_out: r.sdr_out,
                        fw_sir_in: r.fw_sir_in,
                        fw_sir_out: r.fw_sir_out,
                        fw_sar_out: r.fw_sar_out,
                        fw_sdr_out: r.fw_sdr_out,
                    },
                )?;
            }
        }
        Format::Csv => write_phoneme_csv(&[(a.loss_label.clone(), table)], &mut *out)?,
    }
    Ok(code)
}
