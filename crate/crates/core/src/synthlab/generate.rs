use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::filter::BandPass;
use super::phase::{wrap_phase, PhasePredictor, ORACLE_CYCLES};
use super::{Result, SynthError};
use crate::format::{
    BlockValues, ChannelFormat, ClockOffsetRecord, Recording, SampleBlock, Stream, StreamFooter,
    StreamInfo, XmlNode,
};

const BAND: (f64, f64) = (8.0, 12.0);
const BAND_ORDER: usize = 2;
const KNOT_INTERVAL: f64 = 5.0;
const MAX_DRIFT: f64 = 0.01;
const TRIGGER_LABEL: &str = "trigger";

/// Stream names of the five stages, in stream-id order 1..=5.
pub fn stage_names() -> [&'static str; 5] {
    ["raw", "filtered", "phase", "predicted-phase", "triggers"]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Closed-loop run time in seconds.
    pub duration: f64,
    pub srate: f64,
    pub osc_freq: f64,
    pub noise_sigma: f64,
    pub horizon: f64,
    pub target_phase: f64,
    pub seed: u64,
    /// Trailing fit window in seconds.
    pub window: f64,
    /// Recorder-minus-stream clock offset at recorder time 0.
    pub clock_offset: f64,
    /// Offset change per recorder second.
    pub drift: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration: 60.0,
            srate: 500.0,
            osc_freq: 10.0,
            noise_sigma: 0.5,
            horizon: 0.2,
            target_phase: 0.0,
            seed: 0,
            window: 0.5,
            clock_offset: 0.0,
            drift: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(SynthError::Config(m));
        let finite = [
            self.duration,
            self.srate,
            self.osc_freq,
            self.noise_sigma,
            self.horizon,
            self.target_phase,
            self.window,
            self.clock_offset,
            self.drift,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("all parameters must be finite".into());
        }
        if self.srate <= 2.0 * BAND.1 {
            return fail(format!(
                "srate {} Hz leaves no room for the {}-{} Hz band",
                self.srate, BAND.0, BAND.1
            ));
        }
        if !(self.osc_freq > 0.0 && self.osc_freq < self.srate / 2.0) {
            return fail(format!("osc_freq must lie in (0, {})", self.srate / 2.0));
        }
        if self.duration * self.srate < 1.0 {
            return fail("duration is shorter than one sample".into());
        }
        if self.noise_sigma < 0.0 {
            return fail("noise_sigma must be non-negative".into());
        }
        if self.horizon < 0.0 {
            return fail("horizon must be non-negative".into());
        }
        if !(-PI..PI).contains(&self.target_phase) {
            return fail("target_phase must lie in [-pi, pi)".into());
        }
        if self.window <= 2.0 / self.osc_freq {
            return fail(format!(
                "window must exceed two cycles ({} s)",
                2.0 / self.osc_freq
            ));
        }
        if self.drift.abs() >= MAX_DRIFT {
            return fail(format!("|drift| must stay below {MAX_DRIFT}"));
        }
        Ok(())
    }

    fn window_len(&self) -> usize {
        (self.window * self.srate - 1e-9).ceil() as usize
    }
}

/// Runs the simulated closed loop and records every stage.
///
/// The raw signal starts one fit window before the first decision and runs
/// past the last one by the horizon plus half the oracle window, so every
/// trigger can be checked against the raw data. All streams share one local
/// clock; clock-offset knots map it onto recorder time.
pub fn generate(config: &SynthConfig) -> Result<Recording> {
    config.validate()?;
    let srate = config.srate;
    let f = config.osc_freq;
    let n_win = config.window_len();
    let n_dec = (config.duration * srate).round() as usize;
    let n_tail = ((config.horizon + ORACLE_CYCLES / 2.0 / f) * srate).ceil() as usize + 1;
    let n_raw = n_win - 1 + n_dec + n_tail;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let phi0: f64 = rng.random_range(-PI..PI);
    let noise = Normal::new(0.0, config.noise_sigma)
        .map_err(|e| SynthError::Config(e.to_string()))?;
    let local = |i: usize| i as f64 / srate;
    let recorder = |s: f64| (s + config.clock_offset) / (1.0 - config.drift);
    let raw: Vec<f64> = (0..n_raw)
        .map(|i| {
            let clean = (TAU * f * recorder(local(i)) + phi0).sin();
            if config.noise_sigma > 0.0 {
                clean + noise.sample(&mut rng)
            } else {
                clean
            }
        })
        .collect();

    let bandpass = BandPass::butterworth(BAND_ORDER, BAND.0, BAND.1, srate)?;
    let filtered = bandpass.filtfilt(&raw);

    let predictor = PhasePredictor::new(n_win, srate, f)?;
    let mut phase = Vec::with_capacity(n_dec);
    let mut predicted = Vec::with_capacity(n_dec);
    for j in n_win - 1..n_win - 1 + n_dec {
        let now = predictor.current(&raw[j + 1 - n_win..=j])?;
        phase.push(now);
        predicted.push(predictor.advance(now, config.horizon));
    }
    let first_decision = local(n_win - 1);
    let triggers: Vec<f64> = crossings(&predicted, config.target_phase, srate, f)
        .into_iter()
        .map(|k| first_decision + k / srate + config.horizon)
        .collect();

    let names = stage_names();
    let mut rec = Recording::new(Recording::default_header());
    let mut streams = vec![
        regular_stream(1, names[0], "EEG", srate, 0.0, &raw, ChannelFormat::Double64),
        regular_stream(2, names[1], "EEG", srate, 0.0, &filtered, ChannelFormat::Float32),
        regular_stream(3, names[2], "Phase", srate, first_decision, &phase, ChannelFormat::Double64),
        regular_stream(4, names[3], "Phase", srate, first_decision, &predicted, ChannelFormat::Double64),
        marker_stream(5, names[4], &triggers),
    ];
    let end = recorder(local(n_raw - 1)).max(triggers.last().map_or(0.0, |&t| recorder(t)));
    let knots = (end / KNOT_INTERVAL).ceil() as usize;
    for (stage, stream) in streams.iter_mut().enumerate() {
        describe(stream, stage + 1, config);
        stream.offsets = (0..=knots)
            .map(|k| {
                let c = k as f64 * KNOT_INTERVAL;
                ClockOffsetRecord {
                    stream_id: stream.info.stream_id,
                    collection_time: c,
                    offset: config.clock_offset + config.drift * c,
                }
            })
            .collect();
    }
    for stream in streams {
        rec.streams.insert(stream.info.stream_id, stream);
    }
    rec.boundary_offsets = vec![0; (end / 10.0) as usize];
    Ok(rec)
}

/// Fractional decision indices where the wrapped prediction crosses the
/// target upward, at most once per oscillation period.
fn crossings(predicted: &[f64], target: f64, srate: f64, freq: f64) -> Vec<f64> {
    // half a sample of slack absorbs rounding in the interpolated crossing
    let refractory = srate / freq - 0.5;
    let mut out: Vec<f64> = Vec::new();
    for j in 1..predicted.len() {
        let before = wrap_phase(predicted[j - 1] - target);
        let after = wrap_phase(predicted[j] - target);
        if before < 0.0 && after >= 0.0 && after - before < PI {
            let k = (j - 1) as f64 + -before / (after - before);
            if out.last().map_or(true, |&last| k - last >= refractory) {
                out.push(k);
            }
        }
    }
    out
}

/// Chunks of a tenth of a second; each chunk stamps its first sample only.
fn regular_stream(
    id: u32,
    name: &str,
    kind: &str,
    srate: f64,
    start: f64,
    values: &[f64],
    format: ChannelFormat,
) -> Stream {
    let mut stream = Stream::new(StreamInfo::new(id, name, kind, 1, srate, format));
    let chunk = ((srate / 10.0).round() as usize).max(1);
    for (c, rows) in values.chunks(chunk).enumerate() {
        let mut stamps = vec![None; rows.len()];
        stamps[0] = Some(start + (c * chunk) as f64 / srate);
        let values = match format {
            ChannelFormat::Float32 => BlockValues::Float32(rows.iter().map(|&v| v as f32).collect()),
            _ => BlockValues::Double64(rows.to_vec()),
        };
        stream
            .blocks
            .push(SampleBlock::new(id, 1, stamps, values).expect("consistent block"));
    }
    if !values.is_empty() {
        let last = start + (values.len() - 1) as f64 / srate;
        stream.info.footer = Some(StreamFooter::new(start, last, values.len() as u64));
    }
    stream
}

fn marker_stream(id: u32, name: &str, times: &[f64]) -> Stream {
    let mut stream = Stream::new(StreamInfo::new(id, name, "Markers", 1, 0.0, ChannelFormat::String));
    for &t in times {
        let block = SampleBlock::new(id, 1, vec![Some(t)], BlockValues::String(vec![TRIGGER_LABEL.into()]));
        stream.blocks.push(block.expect("consistent block"));
    }
    if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
        stream.info.footer = Some(StreamFooter::new(first, last, times.len() as u64));
    }
    stream
}

fn describe(stream: &mut Stream, stage: usize, config: &SynthConfig) {
    let mut desc = XmlNode::new("desc");
    desc.push(XmlNode::with_text("stage", stage.to_string()));
    let params: &[(&str, String)] = match stage {
        1 => &[
            ("osc_freq", config.osc_freq.to_string()),
            ("noise_sigma", config.noise_sigma.to_string()),
            ("seed", config.seed.to_string()),
        ],
        2 => &[
            ("band_low", BAND.0.to_string()),
            ("band_high", BAND.1.to_string()),
            ("order", (2 * BAND_ORDER).to_string()),
        ],
        3 => &[("window", config.window.to_string())],
        4 => &[("horizon", config.horizon.to_string())],
        _ => &[
            ("target_phase", config.target_phase.to_string()),
            ("horizon", config.horizon.to_string()),
        ],
    };
    for (k, v) in params {
        desc.push(XmlNode::with_text(*k, v.clone()));
    }
    stream.info.header_tree.push(desc);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{parse_bytes, serialize_recording};
    use proptest::prelude::*;

    fn quiet(duration: f64) -> SynthConfig {
        SynthConfig {
            duration,
            noise_sigma: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_is_valid() {
        SynthConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let base = SynthConfig::default();
        for bad in [
            SynthConfig { osc_freq: 250.0, ..base.clone() },
            SynthConfig { osc_freq: 0.0, ..base.clone() },
            SynthConfig { horizon: -0.1, ..base.clone() },
            SynthConfig { window: 0.2, ..base.clone() },
            SynthConfig { srate: 20.0, ..base.clone() },
            SynthConfig { target_phase: PI, ..base.clone() },
            SynthConfig { noise_sigma: f64::NAN, ..base.clone() },
            SynthConfig { drift: 0.5, ..base.clone() },
        ] {
            assert!(matches!(generate(&bad), Err(SynthError::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn five_named_stages() {
        let rec = generate(&quiet(2.0)).unwrap();
        let names: Vec<_> = rec.streams.values().map(|s| s.info.name.as_str()).collect();
        assert_eq!(names, stage_names());
        let raw = rec.stream_by_name("raw").unwrap();
        // 249 warm-up + 1000 decisions + tail of horizon + two cycles + 1
        assert_eq!(raw.sample_count(), 249 + 1000 + 201);
        assert_eq!(rec.stream(3).unwrap().sample_count(), 1000);
        assert!(rec.stream(5).unwrap().info.is_marker());
    }

    #[test]
    fn one_trigger_per_cycle() {
        let rec = generate(&quiet(10.0)).unwrap();
        let n = rec.stream_by_name("triggers").unwrap().sample_count();
        assert!((99..=101).contains(&n), "{n}");
    }

    #[test]
    fn zero_horizon_streams_coincide() {
        let rec = generate(&SynthConfig { horizon: 0.0, ..quiet(3.0) }).unwrap();
        let a = rec.stream(3).unwrap().channel_f64(0);
        let b = rec.stream(4).unwrap().channel_f64(0);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!(wrap_phase(x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let c = SynthConfig { duration: 3.0, seed: 42, ..SynthConfig::default() };
        let a = serialize_recording(&generate(&c).unwrap());
        let b = serialize_recording(&generate(&c).unwrap());
        assert_eq!(a, b);
        let other = serialize_recording(&generate(&SynthConfig { seed: 43, ..c }).unwrap());
        assert_ne!(a, other);
    }

    #[test]
    fn clock_offsets_every_five_seconds() {
        let c = SynthConfig { drift: 1e-4, clock_offset: 2.0, ..quiet(12.0) };
        let rec = generate(&c).unwrap();
        let offsets = &rec.stream(1).unwrap().offsets;
        assert!(offsets.windows(2).all(|w| w[1].collection_time - w[0].collection_time == 5.0));
        assert_eq!(offsets[2].offset, 2.0 + 1e-4 * 10.0);
    }

    #[test]
    fn crossing_rule() {
        // phase ramps through 0 once per 50 samples
        let ramp: Vec<f64> = (0..200).map(|i| wrap_phase(-1.0 + TAU * i as f64 / 50.0)).collect();
        let got = crossings(&ramp, 0.0, 500.0, 10.0);
        assert_eq!(got.len(), 4);
        let expect = 50.0 / TAU;
        assert!((got[0] - expect).abs() < 1e-9);
        // a decreasing phase never triggers
        let down: Vec<f64> = ramp.iter().rev().copied().collect();
        assert!(crossings(&down, 0.0, 500.0, 10.0).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn output_round_trips(
            duration in 0.1f64..2.0,
            sigma in 0f64..1.0,
            horizon in 0f64..0.3,
            target in -PI..PI,
            seed in any::<u64>(),
        ) {
            let c = SynthConfig { duration, noise_sigma: sigma, horizon, target_phase: target, seed, ..SynthConfig::default() };
            let rec = generate(&c).unwrap();
            let bytes = serialize_recording(&rec);
            let (back, warnings) = parse_bytes(&bytes).unwrap();
            prop_assert!(warnings.is_empty(), "{warnings:?}");
            prop_assert!(back.same_content(&rec));
            prop_assert_eq!(serialize_recording(&back), bytes);
        }
    }
}
