use serde::Serialize;

use super::TimestampSeries;
use crate::format::ClockOffsetRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncMode {
    /// No measurements: times pass through.
    Identity,
    /// One measurement: a fixed shift.
    Constant,
    /// Piecewise-linear between knots, constant beyond both ends.
    Interpolate,
    /// Trimmed least-squares line through the knots.
    LinearFit { intercept: f64, slope: f64 },
}

/// Maps stream-local time to recorder time: `t + offset(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncModel {
    pub stream_id: u32,
    /// `(collection_time, offset)`, strictly ascending in collection time.
    pub knots: Vec<(f64, f64)>,
    pub mode: SyncMode,
    /// Number of duplicate collection times folded into their mean.
    pub merged_duplicates: usize,
}

pub fn build_sync_model(stream_id: u32, offsets: &[ClockOffsetRecord]) -> SyncModel {
    let mut sorted: Vec<(f64, f64)> = offsets
        .iter()
        .map(|r| (r.collection_time, r.offset))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    let mut merged_duplicates = 0;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        let run = sorted[i..].iter().take_while(|k| k.0 == t).count();
        let mean = sorted[i..i + run].iter().map(|k| k.1).sum::<f64>() / run as f64;
        knots.push((t, mean));
        merged_duplicates += run - 1;
        i += run;
    }
    if merged_duplicates > 0 {
        log::warn!(
            "stream {stream_id}: {merged_duplicates} duplicate clock offsets merged into their mean"
        );
    }
    let mode = match knots.len() {
        0 => SyncMode::Identity,
        1 => SyncMode::Constant,
        _ => SyncMode::Interpolate,
    };
    SyncModel {
        stream_id,
        knots,
        mode,
        merged_duplicates,
    }
}

impl SyncModel {
    pub fn identity(stream_id: u32) -> Self {
        build_sync_model(stream_id, &[])
    }

    /// Switches to a least-squares line, refit once after discarding the
    /// `trim` fraction of knots with the largest residuals.
    pub fn with_linear_fit(mut self, trim: f64) -> Self {
        if self.knots.len() < 2 {
            return self;
        }
        let (a, b) = fit_line(self.knots.iter().copied());
        let mut residuals: Vec<(f64, (f64, f64))> = self
            .knots
            .iter()
            .map(|&(t, o)| ((o - (a + b * t)).abs(), (t, o)))
            .collect();
        residuals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let keep = ((residuals.len() as f64 * (1.0 - trim.clamp(0.0, 0.5))).ceil() as usize).max(2);
        let (intercept, slope) = fit_line(residuals[..keep].iter().map(|r| r.1));
        self.mode = SyncMode::LinearFit { intercept, slope };
        self
    }

    pub fn offset_at(&self, t: f64) -> f64 {
        match self.mode {
            SyncMode::Identity => 0.0,
            SyncMode::Constant => self.knots[0].1,
            SyncMode::LinearFit { intercept, slope } => intercept + slope * t,
            SyncMode::Interpolate => {
                let k = &self.knots;
                let i = k.partition_point(|knot| knot.0 <= t);
                if i == 0 {
                    k[0].1
                } else if i == k.len() {
                    k[k.len() - 1].1
                } else {
                    let (t0, o0) = k[i - 1];
                    let (t1, o1) = k[i];
                    o0 + (o1 - o0) * ((t - t0) / (t1 - t0))
                }
            }
        }
    }

    pub fn correct(&self, t: f64) -> f64 {
        t + self.offset_at(t)
    }
}

fn fit_line(points: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let n = points.clone().count() as f64;
    let (mx, my) = points
        .clone()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x / n, sy + y / n));
    let (sxy, sxx) = points.fold((0.0, 0.0), |(sxy, sxx), (x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

pub fn apply_sync(series: &TimestampSeries, model: &SyncModel) -> TimestampSeries {
    TimestampSeries {
        stream_id: series.stream_id,
        times: series.times.iter().map(|&t| model.correct(t)).collect(),
        kinds: series.kinds.clone(),
    }
}
