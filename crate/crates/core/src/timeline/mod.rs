//! Timestamps, clock synchronization, rate auditing, resampling and display
//! envelopes. Everything here is a pure function of its inputs.

mod display;
mod rate;
mod resample;
mod stamps;
mod sync;

use thiserror::Error;

pub use display::{auto_scale, envelope_tiles, EnvelopeTile, Scale};
pub use rate::{detect_gaps, effective_rate, RateReport, DEFAULT_DEVIATION_THRESHOLD};
pub use resample::{common_rate, resample, ResamplePlan, STOPBAND_ATTENUATION_DB};
pub use stamps::{dejitter, resolve_timestamps, StampKind, TimestampSeries};
pub use sync::{apply_sync, build_sync_model, SyncMode, SyncModel};

use crate::format::Stream;

#[derive(Debug, Error, PartialEq)]
pub enum TimelineError {
    #[error("stream {stream_id}: sample {index} has no timestamp and none can be deduced")]
    MissingStamp { stream_id: u32, index: usize },
    #[error("stream {stream_id}: timestamps do not increase (first {first}, last {last})")]
    Degenerate { stream_id: u32, first: f64, last: f64 },
    #[error("unsupported rate conversion: {0}")]
    Rate(String),
    #[error("no regular-rate stream to derive a common rate from")]
    NoRegularStream,
    #[error("invalid window [{t0}, {t1})")]
    Window { t0: f64, t1: f64 },
}

pub type Result<T, E = TimelineError> = std::result::Result<T, E>;

/// Resolved and clock-corrected timestamps of a stream, plus its sync model.
pub fn synced_times(stream: &Stream) -> Result<(TimestampSeries, SyncModel)> {
    let raw = resolve_timestamps(&stream.blocks, &stream.info)?;
    let model = build_sync_model(stream.info.stream_id, &stream.offsets);
    Ok((apply_sync(&raw, &model), model))
}
