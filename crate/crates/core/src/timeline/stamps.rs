use std::ops::Range;

use serde::Serialize;

use super::{detect_gaps, Result, TimelineError};
use crate::format::{SampleBlock, StreamInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StampKind {
    Explicit,
    Deduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimestampSeries {
    pub stream_id: u32,
    pub times: Vec<f64>,
    pub kinds: Vec<StampKind>,
}

impl TimestampSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Fills omitted stamps as previous + 1/nominal_srate; explicit stamps are
/// kept verbatim.
pub fn resolve_timestamps(blocks: &[SampleBlock], info: &StreamInfo) -> Result<TimestampSeries> {
    let total = blocks.iter().map(SampleBlock::len).sum();
    let mut times = Vec::with_capacity(total);
    let mut kinds = Vec::with_capacity(total);
    let step = if info.is_regular() {
        Some(1.0 / info.nominal_srate)
    } else {
        None
    };
    let mut prev: Option<f64> = None;
    for stamp in blocks.iter().flat_map(|b| b.timestamps.iter()) {
        let (t, kind) = match (stamp, prev, step) {
            (Some(t), _, _) => (*t, StampKind::Explicit),
            (None, Some(p), Some(dt)) => (p + dt, StampKind::Deduced),
            (None, _, _) => {
                return Err(TimelineError::MissingStamp {
                    stream_id: info.stream_id,
                    index: times.len(),
                })
            }
        };
        times.push(t);
        kinds.push(kind);
        prev = Some(t);
    }
    Ok(TimestampSeries {
        stream_id: info.stream_id,
        times,
        kinds,
    })
}

/// Replaces each contiguous segment's stamps with a least-squares line over
/// sample index. Kinds are preserved.
pub fn dejitter(series: &TimestampSeries, nominal: f64) -> TimestampSeries {
    let mut out = series.clone();
    if nominal <= 0.0 {
        return out;
    }
    for Range { start, end } in detect_gaps(series, nominal) {
        let n = end - start;
        if n < 2 {
            continue;
        }
        let seg = &series.times[start..end];
        let mean_i = (n - 1) as f64 / 2.0;
        let mean_t = seg.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, t) in seg.iter().enumerate() {
            let di = i as f64 - mean_i;
            sxy += di * (t - mean_t);
            sxx += di * di;
        }
        let slope = sxy / sxx;
        for (i, t) in out.times[start..end].iter_mut().enumerate() {
            *t = mean_t + slope * (i as f64 - mean_i);
        }
    }
    out
}
