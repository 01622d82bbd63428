//! Evaluation metrics: frequency-weighted ratios, STOI and input/output
//! reports.

mod fw;
mod report;
mod stoi;

pub use fw::{fw_ratio, weighted_frame_mean, FwConfig, FwMetric, FW_CLAMP};
pub use report::{report, report_signals, MetricConfig, MetricReport, REPORT_CSV_HEADER};
pub use stoi::{stoi, Resampler, SEGMENT_FRAMES, STOI_SAMPLE_RATE};
