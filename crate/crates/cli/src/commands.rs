use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use xdfkit::annotations::{append_events, derive_events, export_csv, write_back, EventSet};
use xdfkit::format::{
    parse_recording, serialize_recording, BlockValues, ChannelFormat, ParseWarning, Recording,
    SampleBlock, Stream, StreamFooter, StreamInfo, XmlNode,
};
use xdfkit::synthlab::{generate, verify, PhaseReport, SynthConfig};
use xdfkit::timeline::{
    common_rate, detect_gaps, resample, synced_times, ResamplePlan, SyncModel,
};

use crate::summary::{summarize_all, StreamSummary};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Failure = 1,
    Warnings = 2,
    Deviation = 3,
    Usage = 64,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

pub fn load(path: &Path) -> Result<(Recording, Vec<ParseWarning>)> {
    let file =
        std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    parse_recording(file).with_context(|| format!("cannot parse {}", path.display()))
}

/// Loads and reports parse warnings on the log.
pub fn load_logged(path: &Path) -> Result<Recording> {
    let (rec, warnings) = load(path)?;
    for w in &warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(rec)
}

pub fn sync_models(rec: &Recording) -> std::collections::BTreeMap<u32, SyncModel> {
    rec.streams
        .iter()
        .filter_map(|(&id, s)| synced_times(s).ok().map(|(_, m)| (id, m)))
        .collect()
}

fn status(s: &StreamSummary) -> String {
    match &s.rate {
        Some(r) if r.deviates => format!("DEVIATES {:.2}%", 100.0 * r.relative_deviation),
        Some(_) => "ok".into(),
        None if s.nominal_srate == 0.0 => "irregular".into(),
        None => "-".into(),
    }
}

/// Stream table. Returns [`Exit::Deviation`] in strict mode when any stream's
/// effective rate deviates from its nominal rate.
pub fn info(rec: &Recording, strict: bool, json: bool, out: &mut dyn Write) -> Result<Exit> {
    let summaries = summarize_all(rec);
    if json {
        serde_json::to_writer_pretty(&mut *out, &summaries)?;
        writeln!(out)?;
    } else {
        writeln!(
            out,
            "{:>4}  {:<20} {:<10} {:<8} {:>3} {:>9} {:>10} {:>12}  status",
            "id", "name", "type", "format", "ch", "samples", "nominal", "effective"
        )?;
        for s in &summaries {
            let effective = s
                .rate
                .map_or_else(|| "-".into(), |r| format!("{:.4}", r.effective_srate));
            writeln!(
                out,
                "{:>4}  {:<20} {:<10} {:<8} {:>3} {:>9} {:>10} {:>12}  {}",
                s.stream_id,
                s.name,
                s.content_type,
                s.channel_format,
                s.channel_count,
                s.sample_count,
                s.nominal_srate,
                effective,
                status(s)
            )?;
        }
    }
    let deviates = summaries.iter().any(|s| s.rate.is_some_and(|r| r.deviates));
    Ok(if strict && deviates { Exit::Deviation } else { Exit::Ok })
}

/// Two-space indented tree; elements with text print as `name: text`.
pub fn render_tree(node: &XmlNode, out: &mut dyn Write) -> std::io::Result<()> {
    fn walk(node: &XmlNode, depth: usize, out: &mut dyn Write) -> std::io::Result<()> {
        let indent = "  ".repeat(depth);
        let text = node.text.trim();
        if text.is_empty() {
            writeln!(out, "{indent}{}", node.name)?;
        } else {
            writeln!(out, "{indent}{}: {text}", node.name)?;
        }
        node.children.iter().try_for_each(|c| walk(c, depth + 1, out))
    }
    walk(node, 0, out)
}

pub fn tree(rec: &Recording, stream: Option<u32>, out: &mut dyn Write) -> Result<Exit> {
    let node = match stream {
        None => &rec.file_header,
        Some(id) => {
            &rec.stream(id)
                .ok_or_else(|| anyhow!("no stream with id {id}"))?
                .info
                .header_tree
        }
    };
    render_tree(node, out)?;
    Ok(Exit::Ok)
}

/// Lists parse warnings one per line.
pub fn validate(path: &Path, out: &mut dyn Write) -> Result<Exit> {
    let (_, warnings) = load(path)?;
    for w in &warnings {
        writeln!(out, "{w}")?;
    }
    Ok(if warnings.is_empty() { Exit::Ok } else { Exit::Warnings })
}

pub fn decoded_events(rec: &Recording) -> EventSet {
    derive_events(rec, &sync_models(rec))
}

pub fn export(rec: &Recording, target: &Path) -> Result<usize> {
    let events = decoded_events(rec);
    std::fs::write(target, export_csv(&events))
        .with_context(|| format!("cannot write {}", target.display()))?;
    Ok(events.len())
}

pub enum AnnotateTarget<'a> {
    InPlace,
    Copy(&'a Path),
}

/// Appends one user event as a new marker stream. Returns bytes appended.
pub fn annotate(
    path: &Path,
    onset: f64,
    duration: f64,
    label: &str,
    target: AnnotateTarget,
) -> Result<u64> {
    let mut set = EventSet::new();
    set.add_event(onset, duration, label)?;
    match target {
        AnnotateTarget::InPlace => Ok(write_back(path, &set)?),
        AnnotateTarget::Copy(out) => {
            let original =
                std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            let bytes = append_events(&original, &set)?;
            std::fs::write(out, &bytes)
                .with_context(|| format!("cannot write {}", out.display()))?;
            Ok((bytes.len() - original.len()) as u64)
        }
    }
}

/// Resamples every regular numeric stream to `rate` (default: the highest
/// nominal rate). Clock offsets are applied to the timestamps and dropped.
/// Gaps split a stream into separately resampled blocks. Float32 streams stay
/// float32; other numeric formats become double64. Marker and string streams
/// keep their samples with synchronized timestamps.
pub fn resample_recording(rec: &Recording, rate: Option<f64>) -> Result<Recording> {
    let rate = common_rate(rec.streams.values().map(|s| &s.info), rate)?;
    let mut out = Recording::new(rec.file_header.clone());
    for (&id, stream) in &rec.streams {
        let converted = if stream.info.is_regular() && stream.info.channel_format.is_numeric() {
            resample_stream(stream, rate)
        } else {
            pass_through(stream)
        }
        .with_context(|| format!("stream {id} ({})", stream.info.name))?;
        out.streams.insert(id, converted);
    }
    Ok(out)
}

fn retimed_info(info: &StreamInfo, rate: f64, format: ChannelFormat) -> Result<StreamInfo> {
    let mut tree = info.header_tree.clone();
    tree.set_child_text("nominal_srate", rate.to_string());
    tree.set_child_text("channel_format", format.as_str());
    StreamInfo::from_header(info.stream_id, tree).map_err(|e| anyhow!(e))
}

/// Footer matching the stream's (already synchronized) timestamps.
fn with_footer(mut stream: Stream) -> Stream {
    stream.info.footer = None;
    if let Ok((series, _)) = synced_times(&stream) {
        if let (Some(&first), Some(&last)) = (series.times.first(), series.times.last()) {
            stream.info.footer = Some(StreamFooter::new(first, last, series.len() as u64));
        }
    }
    stream
}

fn resample_stream(stream: &Stream, rate: f64) -> Result<Stream> {
    let info = &stream.info;
    let format = match info.channel_format {
        ChannelFormat::Float32 => ChannelFormat::Float32,
        _ => ChannelFormat::Double64,
    };
    let mut out = Stream::new(retimed_info(info, rate, format)?);
    if stream.sample_count() == 0 {
        return Ok(out);
    }
    let (series, _) = synced_times(stream)?;
    let plan = ResamplePlan::new(info.nominal_srate, rate)?;
    let channels: Vec<Vec<f64>> = (0..info.channel_count).map(|c| stream.channel_f64(c)).collect();
    let cc = info.channel_count;
    for segment in detect_gaps(&series, info.nominal_srate) {
        let start = series.times[segment.start];
        let resampled: Vec<Vec<f64>> = channels
            .iter()
            .map(|ch| resample(&ch[segment.clone()], &plan))
            .collect();
        let rows = resampled[0].len();
        let mut interleaved = Vec::with_capacity(rows * cc);
        for r in 0..rows {
            interleaved.extend(resampled.iter().map(|ch| ch[r]));
        }
        let mut stamps = vec![None; rows];
        stamps[0] = Some(start);
        let values = match format {
            ChannelFormat::Float32 => {
                BlockValues::Float32(interleaved.into_iter().map(|v| v as f32).collect())
            }
            _ => BlockValues::Double64(interleaved),
        };
        out.blocks.push(SampleBlock::new(info.stream_id, cc, stamps, values)?);
    }
    Ok(with_footer(out))
}

fn pass_through(stream: &Stream) -> Result<Stream> {
    let mut out = Stream::new(stream.info.clone());
    let (series, _) = synced_times(stream)?;
    let mut times = series.times.into_iter();
    for block in &stream.blocks {
        let stamps = (0..block.len()).map(|_| times.next()).collect();
        out.blocks.push(SampleBlock::new(
            block.stream_id,
            block.channel_count,
            stamps,
            block.values.clone(),
        )?);
    }
    Ok(with_footer(out))
}

pub fn write_recording(rec: &Recording, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_recording(rec))
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn synthgen(config: &SynthConfig, path: &Path) -> Result<Recording> {
    let rec = generate(config)?;
    write_recording(&rec, path)?;
    Ok(rec)
}

pub fn phase_table(report: &PhaseReport, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{:>12} {:>11} {:>11}", "event_time", "true_phase", "error")?;
    for e in &report.per_event {
        writeln!(out, "{:>12.4} {:>11.4} {:>+11.4}", e.event_time, e.true_phase, e.error)?;
    }
    let fmt = |v: Option<f64>, signed: bool| match (v, signed) {
        (Some(v), true) => format!("{v:+.4} rad"),
        (Some(v), false) => format!("{v:.4} rad"),
        (None, _) => "undefined".into(),
    };
    writeln!(
        out,
        "events {}  skipped {}  circular mean error {}  circular std {}",
        report.n_events,
        report.skipped,
        fmt(report.circular_mean_error, true),
        fmt(report.circular_std, false)
    )
}

/// Passes iff the circular mean error is defined and below `tol`.
pub fn phase_check(
    rec: &Recording,
    freq: f64,
    target_phase: f64,
    tol: f64,
    json: bool,
    out: &mut dyn Write,
) -> Result<Exit> {
    if !(freq > 0.0) || !(tol > 0.0) {
        bail!("--freq and --tol must be positive");
    }
    let report = verify(rec, target_phase, freq)?;
    if json {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        writeln!(out)?;
    } else {
        phase_table(&report, out)?;
    }
    let pass = report.circular_mean_error.is_some_and(|m| m.abs() < tol);
    Ok(if pass { Exit::Ok } else { Exit::Failure })
}
