use serde::Serialize;
use xdfkit::format::{Recording, Stream};
use xdfkit::timeline::{effective_rate, synced_times, RateReport, DEFAULT_DEVIATION_THRESHOLD};

/// Per-stream overview shared by `info` and the service.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamSummary {
    pub stream_id: u32,
    pub name: String,
    pub content_type: String,
    pub channel_format: String,
    pub channel_count: usize,
    pub sample_count: usize,
    pub nominal_srate: f64,
    pub is_marker: bool,
    /// Synchronized time of the first and last sample.
    pub start: Option<f64>,
    pub end: Option<f64>,
    /// Only for regular streams with at least two samples.
    pub rate: Option<RateReport>,
}

pub fn summarize(stream: &Stream) -> StreamSummary {
    let info = &stream.info;
    let mut summary = StreamSummary {
        stream_id: info.stream_id,
        name: info.name.clone(),
        content_type: info.content_type.clone(),
        channel_format: info.channel_format.as_str().to_owned(),
        channel_count: info.channel_count,
        sample_count: stream.sample_count(),
        nominal_srate: info.nominal_srate,
        is_marker: info.is_marker(),
        start: None,
        end: None,
        rate: None,
    };
    match synced_times(stream) {
        Ok((series, _)) => {
            summary.start = series.times.first().copied();
            summary.end = series.times.last().copied();
            if info.is_regular() && series.len() >= 2 {
                match effective_rate(&series, info.nominal_srate, DEFAULT_DEVIATION_THRESHOLD) {
                    Ok(report) => summary.rate = Some(report),
                    Err(e) => log::warn!("stream {}: {e}", info.stream_id),
                }
            }
        }
        Err(e) => log::warn!("stream {}: {e}", info.stream_id),
    }
    summary
}

pub fn summarize_all(rec: &Recording) -> Vec<StreamSummary> {
    rec.streams.values().map(summarize).collect()
}

/// Earliest start and latest end over all streams.
pub fn extent(summaries: &[StreamSummary]) -> Option<(f64, f64)> {
    let start = summaries.iter().filter_map(|s| s.start).reduce(f64::min)?;
    let end = summaries.iter().filter_map(|s| s.end).reduce(f64::max)?;
    Some((start, end))
}
