//! Phoneme-category segmentation and per-category metric tables.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig6;
use crate::metrics::{report_signals, MetricConfig, MetricReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhonemeCategory {
    Plosive,
    Fricative,
    Approximant,
    Nasal,
    Vowel,
    Other,
}

impl PhonemeCategory {
    pub const ALL: [PhonemeCategory; 6] = [
        PhonemeCategory::Plosive,
        PhonemeCategory::Fricative,
        PhonemeCategory::Approximant,
        PhonemeCategory::Nasal,
        PhonemeCategory::Vowel,
        PhonemeCategory::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PhonemeCategory::Plosive => "Plosive",
            PhonemeCategory::Fricative => "Fricative",
            PhonemeCategory::Approximant => "Approximant",
            PhonemeCategory::Nasal => "Nasal",
            PhonemeCategory::Vowel => "Vowel",
            PhonemeCategory::Other => "Other",
        }
    }
}

impl fmt::Display for PhonemeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

const PLOSIVES: &[&str] = &["P", "B", "T", "D", "K", "G"];
const FRICATIVES: &[&str] = &["F", "V", "TH", "DH", "S", "Z", "SH", "ZH", "HH"];
const NASALS: &[&str] = &["M", "N", "NG"];
const APPROXIMANTS: &[&str] = &["L", "R", "W", "Y"];
const VOWELS: &[&str] = &[
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW",
];
/// Labels that map to `Other` without being counted as unknown.
const KNOWN_OTHER: &[&str] = &["CH", "JH", "SIL", "SP", "SPN", "PAU", ""];

fn normalize(phone: &str) -> String {
    phone
        .trim()
        .trim_end_matches(|c: char| c.is_ascii_digit())
        .to_ascii_uppercase()
}

fn lookup(norm: &str) -> Option<PhonemeCategory> {
    let tables = [
        (PLOSIVES, PhonemeCategory::Plosive),
        (FRICATIVES, PhonemeCategory::Fricative),
        (NASALS, PhonemeCategory::Nasal),
        (APPROXIMANTS, PhonemeCategory::Approximant),
        (VOWELS, PhonemeCategory::Vowel),
        (KNOWN_OTHER, PhonemeCategory::Other),
    ];
    tables
        .iter()
        .find(|(t, _)| t.contains(&norm))
        .map(|&(_, c)| c)
}

/// Category of an ARPAbet phone; stress digits are ignored.
pub fn categorize(phone: &str) -> PhonemeCategory {
    lookup(&normalize(phone)).unwrap_or(PhonemeCategory::Other)
}

pub fn is_known_phone(phone: &str) -> bool {
    lookup(&normalize(phone)).is_some()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhonemeSegment {
    pub start: f64,
    pub end: f64,
    pub label: String,
    pub category: PhonemeCategory,
}

impl PhonemeSegment {
    pub fn new(start: f64, end: f64, label: &str) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start >= 0.0 && start < end) {
            return Err(Error::InvalidAlignment(format!(
                "segment {label:?} has invalid times [{start}, {end})"
            )));
        }
        Ok(Self {
            start,
            end,
            label: label.to_string(),
            category: categorize(label),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alignment {
    pub segments: Vec<PhonemeSegment>,
    /// Rows whose phone was not recognised and was mapped to `Other`.
    pub unknown_phones: usize,
}

#[derive(Deserialize)]
struct Row {
    start: f64,
    end: f64,
    phone: String,
}

pub fn read_alignment<R: Read>(input: R) -> Result<Alignment> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["start", "end", "phone"] {
        return Err(Error::InvalidAlignment(format!(
            "expected header start,end,phone, got {}",
            header.join(",")
        )));
    }
    let mut segments = Vec::new();
    let mut unknown = 0;
    for row in rdr.deserialize() {
        let row: Row = row?;
        if !is_known_phone(&row.phone) {
            log::warn!("unknown phone {:?} mapped to other", row.phone);
            unknown += 1;
        }
        segments.push(PhonemeSegment::new(row.start, row.end, &row.phone)?);
    }
    segments.sort_by(|a, b| a.start.total_cmp(&b.start));
    if let Some(w) = segments.windows(2).find(|w| w[0].end > w[1].start) {
        return Err(Error::InvalidAlignment(format!(
            "segments {:?} [{}, {}) and {:?} [{}, {}) overlap",
            w[0].label, w[0].start, w[0].end, w[1].label, w[1].start, w[1].end
        )));
    }
    Ok(Alignment {
        segments,
        unknown_phones: unknown,
    })
}

pub fn load_alignment(path: &Path) -> Result<Alignment> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    read_alignment(File::open(path)?)
}

/// How a category's segments are turned into one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SegmentMode {
    /// Splice all spans of the category and measure once.
    #[default]
    Concatenate,
    /// Measure each span and average the reports.
    SegmentMean,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoryTable {
    pub rows: BTreeMap<PhonemeCategory, MetricReport>,
    /// Segments cut short because they ran past the end of the signal.
    pub truncated: usize,
}

impl CategoryTable {
    /// Per-category mean over utterances that contain the category.
    pub fn average(tables: &[CategoryTable]) -> CategoryTable {
        let mut rows = BTreeMap::new();
        for cat in PhonemeCategory::ALL {
            let reports: Vec<MetricReport> = tables.iter().filter_map(|t| t.rows.get(&cat).copied()).collect();
            if let Some(mean) = MetricReport::mean(&reports) {
                rows.insert(cat, mean);
            }
        }
        CategoryTable {
            rows,
            truncated: tables.iter().map(|t| t.truncated).sum(),
        }
    }
}

/// Column order of the phoneme table.
pub const PHONEME_CSV_HEADER: [&str; 10] = [
    "Loss",
    "Phoneme",
    "SIR_in",
    "SIR_out",
    "SAR_out",
    "SDR_out",
    "FW-SIR_in",
    "FW-SIR_out",
    "FW-SAR_out",
    "FW-SDR_out",
];

/// Writes one block of rows per `(loss label, table)`.
pub fn write_phoneme_csv<W: Write>(tables: &[(String, CategoryTable)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PHONEME_CSV_HEADER)?;
    for (loss, table) in tables {
        for (cat, r) in &table.rows {
            let mut rec = vec![loss.clone(), cat.label().to_string()];
            rec.extend(
                [
                    r.sir_in,
                    r.sir_out,
                    r.sar_out,
                    r.sdr_out,
                    r.fw_sir_in,
                    r.fw_sir_out,
                    r.fw_sar_out,
                    r.fw_sdr_out,
                ]
                .iter()
                .map(|&v| sig6(v)),
            );
            w.write_record(rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Sample span `[round(start * sr), round(end * sr))`, clipped to `len`.
/// Returns `None` for empty spans; the flag marks truncation.
fn sample_span(seg: &PhonemeSegment, sr: u32, len: usize) -> (Option<(usize, usize)>, bool) {
    let a = (seg.start * sr as f64).round() as usize;
    let b = (seg.end * sr as f64).round() as usize;
    let truncated = b > len;
    let (a, b) = (a.min(len), b.min(len));
    ((a < b).then_some((a, b)), truncated)
}

fn splice(x: &[f64], spans: &[(usize, usize)]) -> Vec<f64> {
    spans.iter().flat_map(|&(a, b)| x[a..b].iter().copied()).collect()
}

/// Per-category reports of one utterance. STOI is never computed here.
#[allow(clippy::too_many_arguments)]
pub fn per_category_metrics(
    est: &[f64],
    mixture: &[f64],
    clean: &[f64],
    noise: &[f64],
    sample_rate: u32,
    segments: &[PhonemeSegment],
    cfg: &MetricConfig,
    mode: SegmentMode,
) -> Result<CategoryTable> {
    let len = clean.len();
    if est.len() != len || mixture.len() != len || noise.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "est {}, mixture {}, clean {len}, noise {} samples",
            est.len(),
            mixture.len(),
            noise.len()
        )));
    }
    let cfg = MetricConfig {
        stoi: false,
        ..cfg.clone()
    };
    let mut spans: BTreeMap<PhonemeCategory, Vec<(usize, usize)>> = BTreeMap::new();
    let mut truncated = 0;
    for seg in segments {
        let (span, cut) = sample_span(seg, sample_rate, len);
        if cut {
            log::warn!(
                "segment {:?} [{}, {}) runs past the signal end and was truncated",
                seg.label,
                seg.start,
                seg.end
            );
            truncated += 1;
        }
        if let Some(s) = span {
            spans.entry(seg.category).or_default().push(s);
        }
    }
    let mut rows = BTreeMap::new();
    for (cat, mut s) in spans {
        s.sort_unstable();
        let measure = |spans: &[(usize, usize)]| {
            report_signals(
                &splice(mixture, spans),
                &splice(est, spans),
                &splice(clean, spans),
                &splice(noise, spans),
                sample_rate,
                &cfg,
            )
        };
        let report = match mode {
            SegmentMode::Concatenate => measure(&s)?,
            SegmentMode::SegmentMean => {
                let each = s
                    .iter()
                    .map(|sp| measure(std::slice::from_ref(sp)))
                    .collect::<Result<Vec<_>>>()?;
                MetricReport::mean(&each).expect("category has at least one span")
            }
        };
        rows.insert(cat, report);
    }
    Ok(CategoryTable { rows, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    struct Utt {
        est: Vec<f64>,
        mix: Vec<f64>,
        clean: Vec<f64>,
        noise: Vec<f64>,
    }

    fn utterance(len: usize) -> Utt {
        let clean = gaussian(len, 1);
        let noise = gaussian(len, 2);
        let art = gaussian(len, 3);
        let mix: Vec<f64> = clean.iter().zip(&noise).map(|(c, n)| c + n).collect();
        let est = (0..len).map(|i| clean[i] + 0.2 * noise[i] + 0.1 * art[i]).collect();
        Utt { est, mix, clean, noise }
    }

    fn run(u: &Utt, segs: &[PhonemeSegment], mode: SegmentMode) -> CategoryTable {
        per_category_metrics(&u.est, &u.mix, &u.clean, &u.noise, 16000, segs, &MetricConfig::default(), mode).unwrap()
    }

    #[test]
    fn categorize_table() {
        assert_eq!(categorize("T"), PhonemeCategory::Plosive);
        assert_eq!(categorize("IY1"), PhonemeCategory::Vowel);
        assert_eq!(categorize("CH"), PhonemeCategory::Other);
        assert_eq!(categorize("jh"), PhonemeCategory::Other);
        assert_eq!(categorize("hh"), PhonemeCategory::Fricative);
        assert_eq!(categorize("NG"), PhonemeCategory::Nasal);
        assert_eq!(categorize("Y"), PhonemeCategory::Approximant);
        assert_eq!(categorize("ZZZ"), PhonemeCategory::Other);
    }

    #[test]
    fn named_categories_are_disjoint() {
        let all = [PLOSIVES, FRICATIVES, NASALS, APPROXIMANTS, VOWELS, KNOWN_OTHER];
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert!(a.iter().all(|p| !b.contains(p)));
            }
        }
    }

    #[test]
    fn alignment_parsing() {
        let a = read_alignment("start,end,phone\n0.00,0.10,P\n".as_bytes()).unwrap();
        assert_eq!(a.segments.len(), 1);
        assert_eq!(a.segments[0].category, PhonemeCategory::Plosive);

        let a = read_alignment("start,end,phone\n0.2,0.3,AA1\n0.0,0.1,S\n0.1,0.2,M\n".as_bytes()).unwrap();
        let labels: Vec<&str> = a.segments.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["S", "M", "AA1"]);

        let a = read_alignment("start,end,phone\n0.0,0.1,ZZZ\n".as_bytes()).unwrap();
        assert_eq!(a.unknown_phones, 1);
        assert_eq!(a.segments[0].category, PhonemeCategory::Other);

        for bad in [
            "start,end,phone\n0.0,0.2,P\n0.1,0.3,T\n",
            "start,end,phone\n0.3,0.1,P\n",
            "begin,end,phone\n0.0,0.1,P\n",
        ] {
            assert!(matches!(read_alignment(bad.as_bytes()), Err(Error::InvalidAlignment(_))), "{bad}");
        }
    }

    #[test]
    fn single_segment_equals_whole_utterance() {
        let u = utterance(16000);
        let seg = PhonemeSegment::new(0.0, 1.0, "AA").unwrap();
        let t = run(&u, &[seg], SegmentMode::Concatenate);
        let whole = report_signals(
            &u.mix,
            &u.est,
            &u.clean,
            &u.noise,
            16000,
            &MetricConfig {
                stoi: false,
                ..MetricConfig::default()
            },
        )
        .unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[&PhonemeCategory::Vowel], whole);
    }

    #[test]
    fn splitting_a_segment_changes_nothing() {
        let u = utterance(16000);
        let one = [
            PhonemeSegment::new(0.1, 0.5, "P").unwrap(),
            PhonemeSegment::new(0.5, 0.9, "AA").unwrap(),
        ];
        let two = [
            PhonemeSegment::new(0.1, 0.3, "P").unwrap(),
            PhonemeSegment::new(0.3, 0.5, "B").unwrap(),
            PhonemeSegment::new(0.5, 0.9, "AA").unwrap(),
        ];
        let a = run(&u, &one, SegmentMode::Concatenate);
        let b = run(&u, &two, SegmentMode::Concatenate);
        let (x, y) = (a.rows[&PhonemeCategory::Plosive], b.rows[&PhonemeCategory::Plosive]);
        for (p, q) in [(x.sdr_out, y.sdr_out), (x.fw_sdr_out, y.fw_sdr_out), (x.sir_in, y.sir_in)] {
            assert!((p - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn disjoint_segments_match_manual_splice() {
        let u = utterance(16000);
        let segs = [
            PhonemeSegment::new(0.1, 0.2, "T").unwrap(),
            PhonemeSegment::new(0.6, 0.75, "K").unwrap(),
        ];
        let t = run(&u, &segs, SegmentMode::Concatenate);
        let cut = |x: &[f64]| [&x[1600..3200], &x[9600..12000]].concat();
        let manual = report_signals(
            &cut(&u.mix),
            &cut(&u.est),
            &cut(&u.clean),
            &cut(&u.noise),
            16000,
            &MetricConfig {
                stoi: false,
                ..MetricConfig::default()
            },
        )
        .unwrap();
        assert_eq!(t.rows[&PhonemeCategory::Plosive], manual);
    }

    #[test]
    fn order_of_segments_is_irrelevant() {
        let u = utterance(16000);
        let mut segs = vec![
            PhonemeSegment::new(0.1, 0.2, "T").unwrap(),
            PhonemeSegment::new(0.6, 0.75, "K").unwrap(),
        ];
        let a = run(&u, &segs, SegmentMode::Concatenate);
        segs.reverse();
        assert_eq!(a, run(&u, &segs, SegmentMode::Concatenate));
    }

    #[test]
    fn empty_alignment_and_truncation() {
        let u = utterance(8000);
        assert!(run(&u, &[], SegmentMode::Concatenate).rows.is_empty());
        let t = run(&u, &[PhonemeSegment::new(0.25, 0.8, "S").unwrap()], SegmentMode::Concatenate);
        assert_eq!(t.truncated, 1);
        assert!(t.rows.contains_key(&PhonemeCategory::Fricative));
        let t = run(&u, &[PhonemeSegment::new(0.6, 0.8, "S").unwrap()], SegmentMode::Concatenate);
        assert!(t.rows.is_empty());
    }

    #[test]
    fn segment_mean_mode_averages() {
        let u = utterance(16000);
        let segs = [
            PhonemeSegment::new(0.1, 0.3, "T").unwrap(),
            PhonemeSegment::new(0.6, 0.8, "K").unwrap(),
        ];
        let t = run(&u, &segs, SegmentMode::SegmentMean);
        let a = run(&u, &segs[..1], SegmentMode::Concatenate).rows[&PhonemeCategory::Plosive];
        let b = run(&u, &segs[1..], SegmentMode::Concatenate).rows[&PhonemeCategory::Plosive];
        let got = t.rows[&PhonemeCategory::Plosive].sdr_out;
        assert!((got - 0.5 * (a.sdr_out + b.sdr_out)).abs() < 1e-12);
    }

    #[test]
    fn csv_header_order() {
        let u = utterance(16000);
        let t = run(&u, &[PhonemeSegment::new(0.0, 0.5, "N").unwrap()], SegmentMode::Concatenate);
        let mut buf = Vec::new();
        write_phoneme_csv(&[("L3".into(), t)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "Loss,Phoneme,SIR_in,SIR_out,SAR_out,SDR_out,FW-SIR_in,FW-SIR_out,FW-SAR_out,FW-SDR_out"
        );
        assert!(lines.next().unwrap().starts_with("L3,Nasal,"));
    }
}
