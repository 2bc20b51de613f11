use std::ops::Range;

use serde::Serialize;

use super::{Result, TimelineError, TimestampSeries};

/// Relative deviation above which a stream is flagged.
pub const DEFAULT_DEVIATION_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub stream_id: u32,
    pub nominal_srate: f64,
    pub effective_srate: f64,
    pub relative_deviation: f64,
    pub deviates: bool,
}

/// Effective rate `(N - 1) / (last - first)` compared with the nominal rate.
///
/// With fewer than two samples the effective rate is reported as the nominal
/// one and nothing is flagged.
pub fn effective_rate(series: &TimestampSeries, nominal: f64, threshold: f64) -> Result<RateReport> {
    let n = series.times.len();
    if n < 2 {
        log::warn!(
            "stream {}: {} sample(s), effective rate undefined",
            series.stream_id,
            n
        );
        return Ok(RateReport {
            stream_id: series.stream_id,
            nominal_srate: nominal,
            effective_srate: nominal,
            relative_deviation: 0.0,
            deviates: false,
        });
    }
    let (first, last) = (series.times[0], series.times[n - 1]);
    if last <= first {
        return Err(TimelineError::Degenerate {
            stream_id: series.stream_id,
            first,
            last,
        });
    }
    let effective = (n - 1) as f64 / (last - first);
    let relative_deviation = if nominal > 0.0 {
        (effective - nominal).abs() / nominal
    } else {
        0.0
    };
    Ok(RateReport {
        stream_id: series.stream_id,
        nominal_srate: nominal,
        effective_srate: effective,
        relative_deviation,
        deviates: nominal > 0.0 && relative_deviation > threshold,
    })
}

/// Splits the series into contiguous index ranges wherever consecutive stamps
/// jump by more than `max(1 s, 2 / nominal)`.
pub fn detect_gaps(series: &TimestampSeries, nominal: f64) -> Vec<Range<usize>> {
    let n = series.times.len();
    if n == 0 {
        return Vec::new();
    }
    let threshold = if nominal > 0.0 {
        (2.0 / nominal).max(1.0)
    } else {
        1.0
    };
    let mut segments = Vec::new();
    let mut start = 0;
    for i in 1..n {
        if series.times[i] - series.times[i - 1] > threshold {
            segments.push(start..i);
            start = i;
        }
    }
    segments.push(start..n);
    segments
}
