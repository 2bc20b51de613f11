use serde::Serialize;

use super::phase::{circular_stats, oracle_phase, wrap_phase};
use super::{Result, SynthError};
use crate::format::{Recording, Stream};
use crate::timeline::synced_times;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventPhase {
    /// Synchronized event time in seconds.
    pub event_time: f64,
    pub true_phase: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub per_event: Vec<EventPhase>,
    /// `None` when no event could be evaluated.
    pub circular_mean_error: Option<f64>,
    pub circular_std: Option<f64>,
    pub n_events: usize,
    /// Events too close to the raw signal's edges (or on a flat signal).
    pub skipped: usize,
}

/// Prefers streams named "raw" and "triggers", falling back to the first
/// regular numeric stream and the first marker stream.
fn pick<'a>(rec: &'a Recording, name: &str, ok: impl Fn(&Stream) -> bool) -> Option<&'a Stream> {
    rec.stream_by_name(name)
        .filter(|s| ok(s))
        .or_else(|| rec.streams.values().find(|s| ok(s)))
}

/// Measures, for every trigger, the oracle phase of the raw signal at the
/// synchronized trigger time and its wrapped distance from `target_phase`.
pub fn verify(rec: &Recording, target_phase: f64, freq: f64) -> Result<PhaseReport> {
    let raw = pick(rec, "raw", |s| {
        s.info.is_regular() && s.info.channel_format.is_numeric()
    })
    .ok_or(SynthError::MissingStream("raw numeric"))?;
    let triggers = pick(rec, "triggers", |s| s.info.is_marker())
        .ok_or(SynthError::MissingStream("trigger marker"))?;

    let (raw_times, _) = synced_times(raw)?;
    let (event_times, _) = synced_times(triggers)?;
    let values = raw.channel_f64(0);
    let mut per_event = Vec::new();
    let mut skipped = 0;
    if let (Some(&t0), Some(&t1)) = (raw_times.times.first(), raw_times.times.last()) {
        let srate = (values.len() - 1) as f64 / (t1 - t0);
        for &t in &event_times.times {
            match oracle_phase(&values, srate, freq, t - t0) {
                Ok(true_phase) => per_event.push(EventPhase {
                    event_time: t,
                    true_phase,
                    error: wrap_phase(true_phase - target_phase),
                }),
                Err(SynthError::Edge { .. } | SynthError::PhaseUndefined { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    } else {
        skipped = event_times.len();
    }
    let errors: Vec<f64> = per_event.iter().map(|e| e.error).collect();
    let stats = circular_stats(&errors);
    Ok(PhaseReport {
        n_events: per_event.len(),
        circular_mean_error: stats.map(|s| s.0),
        circular_std: stats.map(|s| s.1),
        per_event,
        skipped,
    })
}
