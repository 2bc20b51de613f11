use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use super::{Event, EventSet, Result};
use crate::format::{
    parse_bytes, BlockValues, ChannelFormat, ChunkWriter, FormatError, Recording, SampleBlock,
    StreamFooter, StreamInfo,
};

pub const ANNOTATION_STREAM_NAME: &str = "sigviewer-annotations";
/// Separator between label and duration in appended markers.
pub const DURATION_TAG: &str = "|duration=";

fn marker_text(e: &Event) -> String {
    if e.duration > 0.0 {
        format!("{}{DURATION_TAG}{}", e.label, e.duration)
    } else {
        e.label.clone()
    }
}

/// Chunks for a new marker stream holding every user event, or `None` when
/// there are none.
fn annotation_chunks(rec: &Recording, set: &EventSet) -> Result<Option<Vec<u8>>> {
    let events: Vec<&Event> = set.user_events().collect();
    if events.is_empty() {
        return Ok(None);
    }
    let stream_id = match rec.streams.keys().next_back() {
        None => 1,
        Some(&max) => max
            .checked_add(1)
            .ok_or_else(|| FormatError::malformed(0, "no stream id left for annotations"))?,
    };
    let info = StreamInfo::new(
        stream_id,
        ANNOTATION_STREAM_NAME,
        "Markers",
        1,
        0.0,
        ChannelFormat::String,
    );
    let block = SampleBlock::new(
        stream_id,
        1,
        events.iter().map(|e| Some(e.onset)).collect(),
        BlockValues::String(events.iter().map(|e| marker_text(e)).collect()),
    )?;
    let first = events.iter().map(|e| e.onset).fold(f64::INFINITY, f64::min);
    let last = events.iter().map(|e| e.onset).fold(f64::NEG_INFINITY, f64::max);
    let footer = StreamFooter::new(first, last, events.len() as u64);
    let mut w = ChunkWriter::new(Vec::new());
    w.write_stream_header(&info)?;
    w.write_samples(&block)?;
    w.write_boundary()?;
    w.write_footer(stream_id, &footer)?;
    Ok(Some(w.into_inner()))
}

/// New file bytes: `original` followed by a marker stream with the user
/// events of `set`. The original is parsed first and left untouched.
pub fn append_events(original: &[u8], set: &EventSet) -> Result<Vec<u8>> {
    let (rec, _) = parse_bytes(original)?;
    let mut out = original.to_vec();
    if let Some(tail) = annotation_chunks(&rec, set)? {
        out.extend_from_slice(&tail);
    }
    Ok(out)
}

/// Like [`append_events`] for a file on disk; the file itself is not modified.
pub fn append_to_file(path: impl AsRef<Path>, set: &EventSet) -> Result<Vec<u8>> {
    append_events(&std::fs::read(path)?, set)
}

/// Appends the user events of `set` to the file in place. Returns the number
/// of bytes appended.
pub fn write_back(path: impl AsRef<Path>, set: &EventSet) -> Result<u64> {
    let path = path.as_ref();
    let original = std::fs::read(path)?;
    let (rec, _) = parse_bytes(&original)?;
    let Some(tail) = annotation_chunks(&rec, set)? else {
        return Ok(0);
    };
    let mut file = OpenOptions::new().append(true).open(path)?;
    file.write_all(&tail)?;
    file.sync_all()?;
    Ok(tail.len() as u64)
}
