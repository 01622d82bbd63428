//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input data, 2 usage error, 3 I/O error,
//! 4 numeric degeneracy, 5 some items of a batch failed. Failures print one
//! JSON error record on stderr.

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::decomp::DbClamp;
use crate::error::Error;
use crate::loss::LossId;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_PARTIAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "sdrkit", version, about = "Frequency-weighted SDR losses and speech enhancement metrics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// STFT frame and FFT size in samples.
    #[arg(long, global = true, default_value_t = 512)]
    pub stft_size: usize,
    /// STFT hop in samples.
    #[arg(long, global = true, default_value_t = 256)]
    pub hop: usize,
    #[arg(long, global = true, default_value_t = 18)]
    pub mel_bands: usize,
    /// Exponent of the |S|^gamma weights.
    #[arg(long, global = true, default_value_t = 0.2)]
    pub gamma: f64,
    /// Reference microphone of multichannel inputs.
    #[arg(long, global = true, default_value_t = 0)]
    pub ref_channel: usize,
    /// Per-bin dB clamp as `lo,hi`; defaults depend on the command.
    #[arg(long, global = true, value_parser = parse_clamp, allow_hyphen_values = true)]
    pub clamp_db: Option<DbClamp>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for batch commands; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Input/output metric report of enhanced signals.
    Eval(EvalArgs),
    /// Value of one loss on a triple of signals.
    Loss(LossArgs),
    /// Finite-difference check of the analytic loss gradients.
    Gradcheck(GradcheckArgs),
    /// Speech-shaped noise from a directory of speech WAVs.
    Ssn(SsnArgs),
    /// Render mixtures from a manifest, or plan a manifest.
    Mix(MixArgs),
    /// Per-phoneme-category metric table.
    Phoneme(PhonemeArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// `est mix clean noise` WAV paths.
    #[arg(num_args = 4, value_names = ["EST", "MIX", "CLEAN", "NOISE"], required_unless_present = "list")]
    pub paths: Vec<PathBuf>,
    /// File with one `est mix clean noise` line per utterance.
    #[arg(long, conflicts_with = "paths")]
    pub list: Option<PathBuf>,
    /// Skip STOI.
    #[arg(long)]
    pub no_stoi: bool,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, value_parser = parse_loss_id)]
    pub id: LossId,
    #[arg(value_names = ["EST", "CLEAN", "NOISE"], num_args = 3, required = true)]
    pub paths: Vec<PathBuf>,
    /// Use clean-vs-noise SIR for the softmax weights instead of the
    /// estimate's own decomposition.
    #[arg(long)]
    pub oracle_sir: bool,
    /// Write the weight map as `band,frame,weight` CSV.
    #[arg(long)]
    pub weights_csv: Option<PathBuf>,
    /// Write the clamped per-bin SDR map as `band,frame,sdr_db` CSV.
    #[arg(long)]
    pub map_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Loss ids, comma separated, or `all`.
    #[arg(long, default_value = "all", value_parser = parse_loss_ids)]
    pub id: IdList,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 1024)]
    pub length: usize,
    /// Relative error bound reported as pass/fail.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdList(pub Vec<LossId>);

#[derive(Debug, Args)]
pub struct SsnArgs {
    /// Directory of speech WAV files.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Duration in seconds.
    #[arg(long)]
    pub dur: f64,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SampleFormat::Float32)]
    pub wav_format: SampleFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// JSON-lines manifest to render.
    #[arg(long, required_unless_present = "plan")]
    pub manifest: Option<PathBuf>,
    /// Output directory for rendered mixtures.
    #[arg(long, requires = "manifest")]
    pub out_dir: Option<PathBuf>,
    /// Calibrate the SIR on the dry sources instead of the reverberant
    /// images.
    #[arg(long)]
    pub pre_rir: bool,
    /// JSON file with `clean`, `ssn`, `ecological` and `rirs` pools; writes
    /// a manifest to stdout instead of rendering.
    #[arg(long, conflicts_with = "manifest")]
    pub plan: Option<PathBuf>,
    #[arg(long, requires = "plan", default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = crate::mixer::DEFAULT_SSN_FRACTION)]
    pub ssn_fraction: f64,
    #[arg(long, value_enum, default_value_t = SampleFormat::Float32)]
    pub wav_format: SampleFormat,
}

#[derive(Debug, Args)]
pub struct PhonemeArgs {
    /// Alignment CSV with header `start,end,phone`.
    #[arg(long, required_unless_present = "list")]
    pub align: Option<PathBuf>,
    #[arg(num_args = 4, value_names = ["EST", "MIX", "CLEAN", "NOISE"], requires = "align")]
    pub paths: Vec<PathBuf>,
    /// File with one `align est mix clean noise` line per utterance; rows
    /// are averaged over utterances.
    #[arg(long, conflicts_with_all = ["align", "paths"])]
    pub list: Option<PathBuf>,
    /// Label written to the `Loss` column.
    #[arg(long, default_value = "-")]
    pub loss_label: String,
    /// Average per-segment reports instead of measuring the spliced
    /// category signal.
    #[arg(long)]
    pub segment_mean: bool,
}

fn parse_clamp(s: &str) -> Result<DbClamp, String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    DbClamp::new(lo, hi).map_err(|e| e.to_string())
}

fn parse_loss_id(s: &str) -> Result<LossId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_loss_ids(s: &str) -> Result<IdList, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(IdList(LossId::ALL.to_vec()));
    }
    s.split(',').map(parse_loss_id).collect::<Result<_, _>>().map(IdList)
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    code: i32,
    message: String,
}

pub(crate) fn error_kind(e: &Error) -> (&'static str, i32) {
    if e.is_io() {
        ("io", EXIT_IO)
    } else if e.is_numeric() {
        ("numeric", EXIT_NUMERIC)
    } else if matches!(e, Error::InvalidArgument(_)) {
        ("usage", EXIT_USAGE)
    } else {
        ("input", EXIT_INPUT)
    }
}

pub(crate) fn write_error_record<W: Write>(err: &mut W, kind: &str, code: i32, message: String) {
    let rec = ErrorRecord {
        error: ErrorBody { kind, code, message },
    };
    let _ = serde_json::to_writer(&mut *err, &rec);
    let _ = err.write_all(b"\n");
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// As [`run`] with explicit output streams.
pub fn run_with<I, T, O, E>(args: I, out: &mut O, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    O: Write,
    E: Write,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("SDRKIT_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            write_error_record(err, "usage", EXIT_USAGE, e.to_string().trim().to_string());
            return EXIT_USAGE;
        }
    };
    match commands::dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let (kind, code) = error_kind(&e);
            write_error_record(err, kind, code, e.to_string());
            code
        }
    }
}
