use csv::{QuoteStyle, ReaderBuilder, Terminator, WriterBuilder};

use super::{AnnotationError, EventSet, Result};

pub const CSV_HEADER: &str = "onset,duration,label,stream_id";

/// UTF-8, LF-terminated CSV. Numbers use the shortest text that parses back
/// to the same double; fields are quoted only when they must be.
pub fn export_csv(set: &EventSet) -> Vec<u8> {
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .quote_style(QuoteStyle::Necessary)
        .from_writer(Vec::new());
    // writing into a Vec cannot fail
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for e in set.events() {
        let stream = e.stream_id.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([
            e.onset.to_string().as_str(),
            e.duration.to_string().as_str(),
            e.label.as_str(),
            stream.as_str(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Reads events written by [`export_csv`]. Every imported event is a user event.
pub fn import_csv(bytes: &[u8]) -> Result<EventSet> {
    let mut r = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = r.records();
    match records.next() {
        Some(Ok(h)) if h.iter().eq(CSV_HEADER.split(',')) => {}
        _ => return Err(AnnotationError::Header),
    }
    let mut set = EventSet::new();
    for rec in records {
        let rec = rec.map_err(|e| AnnotationError::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_err = |message: String| AnnotationError::Row { line, message };
        if rec.len() != 4 {
            return Err(row_err(format!("expected 4 fields, found {}", rec.len())));
        }
        let onset: f64 = rec[0]
            .parse()
            .map_err(|_| row_err(format!("onset {:?} is not a number", &rec[0])))?;
        let duration: f64 = rec[1]
            .parse()
            .map_err(|_| row_err(format!("duration {:?} is not a number", &rec[1])))?;
        let stream_id = match &rec[3] {
            "" => None,
            s => Some(
                s.parse::<u32>()
                    .map_err(|_| row_err(format!("stream_id {s:?} is not an integer")))?,
            ),
        };
        set.add_event_for_stream(onset, duration, &rec[2], stream_id)
            .map_err(|e| row_err(e.to_string()))?;
    }
    Ok(set)
}
