use std::io::Write;

use serde::Serialize;

use super::fw::{FwConfig, FwMetric};
use super::stoi::stoi;
use crate::decomp::{decompose, time_ratios, RatioKind};
use crate::error::{Error, Result};
use crate::format::sig6;
use crate::signal::AudioBuffer;

/// Input and output scores of one enhanced utterance. dB fields may hold
/// infinite sentinels; STOI is absent when not computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub sir_in: f64,
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub sir_out: f64,
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub sar_out: f64,
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub sdr_out: f64,
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub fw_sir_in: f64,
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub fw_sir_out: f64,
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub fw_sar_out: f64,
    #[serde(serialize_with = "crate::format::serialize_db")]
    pub fw_sdr_out: f64,
    pub stoi_in: Option<f64>,
    pub stoi_out: Option<f64>,
}

/// Column order of the evaluation table.
pub const REPORT_CSV_HEADER: [&str; 7] = [
    "SIR_out",
    "SAR_out",
    "SDR_out",
    "FW-SIR_out",
    "FW-SAR_out",
    "FW-SDR_out",
    "STOI_out",
];

impl MetricReport {
    /// Values in [`REPORT_CSV_HEADER`] order, six significant digits.
    pub fn csv_fields(&self) -> Vec<String> {
        let mut out: Vec<String> = [
            self.sir_out,
            self.sar_out,
            self.sdr_out,
            self.fw_sir_out,
            self.fw_sar_out,
            self.fw_sdr_out,
        ]
        .iter()
        .map(|&v| sig6(v))
        .collect();
        out.push(self.stoi_out.map(sig6).unwrap_or_default());
        out
    }

    pub fn write_csv<W: Write>(reports: &[MetricReport], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_CSV_HEADER)?;
        for r in reports {
            w.write_record(r.csv_fields())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Element-wise mean; STOI is averaged only when every report has it.
    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let avg_opt = |f: fn(&MetricReport) -> Option<f64>| {
            reports
                .iter()
                .map(f)
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / n)
        };
        Some(MetricReport {
            sir_in: avg(|r| r.sir_in),
            sir_out: avg(|r| r.sir_out),
            sar_out: avg(|r| r.sar_out),
            sdr_out: avg(|r| r.sdr_out),
            fw_sir_in: avg(|r| r.fw_sir_in),
            fw_sir_out: avg(|r| r.fw_sir_out),
            fw_sar_out: avg(|r| r.fw_sar_out),
            fw_sdr_out: avg(|r| r.fw_sdr_out),
            stoi_in: avg_opt(|r| r.stoi_in),
            stoi_out: avg_opt(|r| r.stoi_out),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    pub fw: FwConfig,
    pub ref_channel: usize,
    pub stoi: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            fw: FwConfig::default(),
            ref_channel: 0,
            stoi: true,
        }
    }
}

struct Side {
    sir: f64,
    sar: f64,
    sdr: f64,
    fw_sir: f64,
    fw_sar: f64,
    fw_sdr: f64,
    stoi: Option<f64>,
}

fn score(fw: &FwMetric, est: &[f64], clean: &[f64], noise: &[f64], stoi_sr: Option<u32>) -> Result<Side> {
    let d = decompose(est, clean, noise)?;
    let t = time_ratios(&d);
    let weights = fw.weights(clean)?;
    let fw_of = |k| super::fw::weighted_frame_mean(&fw.ratio_map(&d, k)?, &weights);
    Ok(Side {
        sir: t.sir_db,
        sar: t.sar_db,
        sdr: t.sdr_db,
        fw_sir: fw_of(RatioKind::Sir)?,
        fw_sar: fw_of(RatioKind::Sar)?,
        fw_sdr: fw_of(RatioKind::Sdr)?,
        stoi: stoi_sr.map(|sr| stoi(clean, est, sr)).transpose()?,
    })
}

/// Report on single-channel signals at `sample_rate`.
pub fn report_signals(
    mixture: &[f64],
    est: &[f64],
    clean: &[f64],
    noise: &[f64],
    sample_rate: u32,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    let n = clean.len();
    if mixture.len() != n || est.len() != n || noise.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "mixture {}, est {}, clean {}, noise {} samples",
            mixture.len(),
            est.len(),
            n,
            noise.len()
        )));
    }
    let fw = FwMetric::new(FwConfig {
        sample_rate,
        ..cfg.fw.clone()
    })?;
    let stoi_sr = cfg.stoi.then_some(sample_rate);
    let input = score(&fw, mixture, clean, noise, stoi_sr)?;
    let output = if est == mixture {
        Side { ..input }
    } else {
        score(&fw, est, clean, noise, stoi_sr)?
    };
    Ok(MetricReport {
        sir_in: input.sir,
        sir_out: output.sir,
        sar_out: output.sar,
        sdr_out: output.sdr,
        fw_sir_in: input.fw_sir,
        fw_sir_out: output.fw_sir,
        fw_sar_out: output.fw_sar,
        fw_sdr_out: output.fw_sdr,
        stoi_in: input.stoi,
        stoi_out: output.stoi,
    })
}

/// Report on possibly multichannel buffers, reduced to the reference
/// channel. A mono estimate is used as is.
pub fn report(
    mixture: &AudioBuffer,
    est: &AudioBuffer,
    clean: &AudioBuffer,
    noise: &AudioBuffer,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    let sr = clean.sample_rate();
    for b in [mixture, est, noise] {
        if b.sample_rate() != sr {
            return Err(Error::SampleRateMismatch(b.sample_rate(), sr));
        }
    }
    let pick = |b: &'_ AudioBuffer| -> Result<Vec<f64>> {
        if b.num_channels() == 1 {
            Ok(b.channel(0)?.to_vec())
        } else {
            Ok(b.channel(cfg.ref_channel)?.to_vec())
        }
    };
    report_signals(&pick(mixture)?, &pick(est)?, &pick(clean)?, &pick(noise)?, sr, cfg)
}
