use std::collections::HashMap;
use std::io::{BufReader, ErrorKind, Read};

use super::error::{FormatError, ParseWarning, Result};
use super::types::{
    BlockValues, ChannelFormat, ChunkTag, ClockOffsetRecord, Recording, SampleBlock, Stream,
    StreamFooter, StreamInfo,
};
use super::varlen::read_varlen;
use super::xml::{parse_xml, XmlNode};
use super::{BOUNDARY_SIGNATURE, MAGIC};

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// On a corrupt chunk, scan forward to the next Boundary signature and
    /// resume there instead of failing.
    pub recover: bool,
}

/// One decoded chunk.
#[derive(Debug, Clone, PartialEq)]
pub enum Chunk {
    FileHeader(XmlNode),
    StreamHeader(StreamInfo),
    Samples(SampleBlock),
    ClockOffset(ClockOffsetRecord),
    Boundary,
    StreamFooter { stream_id: u32, footer: StreamFooter },
}

/// Byte source with pushback, counting absolute position.
struct Source<R> {
    inner: BufReader<R>,
    pending: Vec<u8>,
    pending_pos: usize,
    pos: u64,
}

impl<R: Read> Source<R> {
    fn new(inner: R) -> Self {
        Source {
            inner: BufReader::with_capacity(64 * 1024, inner),
            pending: Vec::new(),
            pending_pos: 0,
            pos: 0,
        }
    }

    /// Reads up to `buf.len()` bytes; returns fewer only at end of input.
    fn fill(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let mut n = 0;
        while n < buf.len() {
            let got = if self.pending_pos < self.pending.len() {
                let avail = &self.pending[self.pending_pos..];
                let k = avail.len().min(buf.len() - n);
                buf[n..n + k].copy_from_slice(&avail[..k]);
                self.pending_pos += k;
                k
            } else {
                match self.inner.read(&mut buf[n..]) {
                    Ok(k) => k,
                    Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                    Err(e) => return Err(e),
                }
            };
            if got == 0 {
                break;
            }
            n += got;
        }
        self.pos += n as u64;
        Ok(n)
    }

    fn read_byte(&mut self) -> std::io::Result<Option<u8>> {
        let mut b = [0u8; 1];
        Ok((self.fill(&mut b)? == 1).then_some(b[0]))
    }

    /// Reads up to `len` bytes into `out` (cleared first). Growth follows the
    /// bytes actually present, never the declared length.
    fn read_payload(&mut self, len: u64, out: &mut Vec<u8>) -> std::io::Result<()> {
        out.clear();
        const STEP: usize = 1 << 20;
        while (out.len() as u64) < len {
            let want = (len - out.len() as u64).min(STEP.max(out.len()) as u64) as usize;
            let start = out.len();
            out.resize(start + want, 0);
            let got = self.fill(&mut out[start..])?;
            out.truncate(start + got);
            if got < want {
                break;
            }
        }
        Ok(())
    }

    fn unread(&mut self, bytes: &[u8]) {
        let mut rest = self.pending.split_off(self.pending_pos);
        self.pending.clear();
        self.pending.extend_from_slice(bytes);
        self.pending.append(&mut rest);
        self.pending_pos = 0;
        self.pos -= bytes.len() as u64;
    }
}

/// Pull-based chunk reader. Memory use is bounded by the largest chunk.
pub struct XdfReader<R> {
    src: Source<R>,
    options: ParseOptions,
    layouts: HashMap<u32, (ChannelFormat, usize)>,
    warnings: Vec<ParseWarning>,
    header: Vec<u8>,
    payload: Vec<u8>,
    payload_read: bool,
    finished: bool,
}

impl<R: Read> XdfReader<R> {
    /// Consumes and checks the magic.
    pub fn new(reader: R, options: ParseOptions) -> Result<Self> {
        let mut src = Source::new(reader);
        let mut magic = [0u8; 4];
        if src.fill(&mut magic)? != 4 || &magic != MAGIC {
            return Err(FormatError::Magic);
        }
        Ok(XdfReader {
            src,
            options,
            layouts: HashMap::new(),
            warnings: Vec::new(),
            header: Vec::with_capacity(11),
            payload: Vec::new(),
            payload_read: false,
            finished: false,
        })
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> u64 {
        self.src.pos
    }

    pub fn warnings(&self) -> &[ParseWarning] {
        &self.warnings
    }

    pub fn into_warnings(self) -> Vec<ParseWarning> {
        self.warnings
    }

    /// Next decoded chunk with its starting byte offset, or `None` at end of file.
    pub fn next_chunk(&mut self) -> Result<Option<(u64, Chunk)>> {
        loop {
            if self.finished {
                return Ok(None);
            }
            let start = self.src.pos;
            match self.try_chunk(start) {
                Ok(Some(Some(chunk))) => return Ok(Some((start, chunk))),
                Ok(Some(None)) => continue,
                Ok(None) => {
                    self.finished = true;
                    return Ok(None);
                }
                Err(FormatError::Io(e)) => return Err(FormatError::Io(e)),
                Err(e) if self.options.recover => self.resync(start, e)?,
                Err(e) => return Err(e),
            }
        }
    }

    /// `Ok(None)` at clean end of file, `Ok(Some(None))` for skipped chunks.
    fn try_chunk(&mut self, start: u64) -> Result<Option<Option<Chunk>>> {
        self.header.clear();
        self.payload_read = false;
        let Some(width) = self.src.read_byte()? else {
            return Ok(None);
        };
        self.header.push(width);
        let width = match width {
            1 | 4 | 8 => width as usize,
            other => {
                return Err(FormatError::Width {
                    offset: start,
                    width: other,
                })
            }
        };
        let mut len_bytes = [0u8; 8];
        let got = self.src.fill(&mut len_bytes[..width])?;
        self.header.extend_from_slice(&len_bytes[..got]);
        if got < width {
            return Err(FormatError::Truncated {
                offset: start + 1,
                needed: width as u64,
                available: got as u64,
            });
        }
        let length = u64::from_le_bytes(len_bytes);
        if length < 2 {
            return Err(FormatError::malformed(
                start,
                format!("chunk length {length} cannot hold a tag"),
            ));
        }
        let body_start = self.src.pos;
        self.src.read_payload(length, &mut self.payload)?;
        self.payload_read = true;
        if (self.payload.len() as u64) < length {
            return Err(FormatError::Truncated {
                offset: body_start,
                needed: length,
                available: self.payload.len() as u64,
            });
        }
        let tag = u16::from_le_bytes([self.payload[0], self.payload[1]]);
        let payload_start = body_start + 2;
        let Some(tag) = ChunkTag::from_code(tag) else {
            self.warnings
                .push(ParseWarning::UnknownChunkTag { offset: start, tag });
            return Ok(Some(None));
        };
        let payload = std::mem::take(&mut self.payload);
        let decoded = self.decode(start, tag, &payload[2..], payload_start);
        self.payload = payload;
        decoded.map(Some)
    }

    fn decode(
        &mut self,
        start: u64,
        tag: ChunkTag,
        body: &[u8],
        base: u64,
    ) -> Result<Option<Chunk>> {
        match tag {
            ChunkTag::FileHeader => Ok(Some(Chunk::FileHeader(xml_payload(body, base)?))),
            ChunkTag::Boundary => {
                if body != BOUNDARY_SIGNATURE {
                    self.warnings.push(ParseWarning::BadBoundary { offset: start });
                }
                Ok(Some(Chunk::Boundary))
            }
            ChunkTag::StreamHeader => {
                let id = stream_id(body, base)?;
                let tree = xml_payload(&body[4..], base + 4)?;
                let info = StreamInfo::from_header(id, tree)
                    .map_err(|m| FormatError::malformed(start, m))?;
                if self.layouts.contains_key(&id) {
                    self.warnings.push(ParseWarning::DuplicateStreamHeader {
                        offset: start,
                        stream_id: id,
                    });
                    return Ok(None);
                }
                self.layouts
                    .insert(id, (info.channel_format, info.channel_count));
                Ok(Some(Chunk::StreamHeader(info)))
            }
            ChunkTag::Samples => {
                let id = stream_id(body, base)?;
                let Some(&(format, channels)) = self.layouts.get(&id) else {
                    self.warnings.push(ParseWarning::UnknownStream {
                        offset: start,
                        stream_id: id,
                    });
                    return Ok(None);
                };
                let (block, bad_utf8) = decode_samples(id, &body[4..], format, channels)
                    .map_err(|e| e.rebase(base + 4))?;
                if bad_utf8 {
                    self.warnings.push(ParseWarning::InvalidUtf8 {
                        offset: start,
                        stream_id: id,
                    });
                }
                Ok(Some(Chunk::Samples(block)))
            }
            ChunkTag::ClockOffset => {
                let id = stream_id(body, base)?;
                if body.len() != 20 {
                    return Err(FormatError::malformed(
                        start,
                        format!("clock offset payload is {} bytes, expected 20", body.len()),
                    ));
                }
                let collection_time = f64::from_le_bytes(body[4..12].try_into().unwrap());
                let offset = f64::from_le_bytes(body[12..20].try_into().unwrap());
                if !(collection_time.is_finite() && offset.is_finite()) {
                    return Err(FormatError::malformed(start, "non-finite clock offset"));
                }
                if !self.layouts.contains_key(&id) {
                    self.warnings.push(ParseWarning::UnknownStream {
                        offset: start,
                        stream_id: id,
                    });
                    return Ok(None);
                }
                Ok(Some(Chunk::ClockOffset(ClockOffsetRecord {
                    stream_id: id,
                    collection_time,
                    offset,
                })))
            }
            ChunkTag::StreamFooter => {
                let id = stream_id(body, base)?;
                let tree = xml_payload(&body[4..], base + 4)?;
                if !self.layouts.contains_key(&id) {
                    self.warnings.push(ParseWarning::UnknownStream {
                        offset: start,
                        stream_id: id,
                    });
                    return Ok(None);
                }
                let footer = StreamFooter::from_tree(tree)
                    .map_err(|m| FormatError::malformed(start, m))?;
                Ok(Some(Chunk::StreamFooter {
                    stream_id: id,
                    footer,
                }))
            }
        }
    }

    /// Skips to just past the next Boundary signature after `start`.
    fn resync(&mut self, start: u64, cause: FormatError) -> Result<()> {
        // Push back everything the failed chunk consumed, minus its first byte.
        let mut consumed = std::mem::take(&mut self.header);
        if self.payload_read {
            consumed.extend_from_slice(&self.payload);
        }
        debug_assert_eq!(consumed.len() as u64, self.src.pos - start);
        if consumed.len() > 1 {
            self.src.unread(&consumed[1..]);
        }
        consumed.clear();
        self.header = consumed;
        let mut window = [0u8; 16];
        let mut seen = 0usize;
        while let Some(b) = self.src.read_byte()? {
            window.rotate_left(1);
            window[15] = b;
            seen += 1;
            if seen >= 16 && window == BOUNDARY_SIGNATURE {
                self.warnings.push(ParseWarning::Recovered {
                    offset: start,
                    skipped: self.src.pos - start,
                    cause: cause.to_string(),
                });
                return Ok(());
            }
        }
        self.warnings.push(ParseWarning::Unrecoverable {
            offset: start,
            cause: cause.to_string(),
        });
        self.finished = true;
        Ok(())
    }
}

fn stream_id(body: &[u8], base: u64) -> Result<u32> {
    match body.get(..4) {
        Some(b) => Ok(u32::from_le_bytes(b.try_into().unwrap())),
        None => Err(FormatError::Truncated {
            offset: base,
            needed: 4,
            available: body.len() as u64,
        }),
    }
}

fn xml_payload(body: &[u8], base: u64) -> Result<XmlNode> {
    let text = String::from_utf8_lossy(body);
    parse_xml(&text).map_err(|e| match e {
        FormatError::Xml { position, message } => FormatError::Xml {
            position: position + base as usize,
            message,
        },
        other => other,
    })
}

/// Decodes a Samples payload that starts after the stream id.
///
/// Returns the block and whether any string value held invalid UTF-8.
fn decode_samples(
    stream_id: u32,
    payload: &[u8],
    format: ChannelFormat,
    channels: usize,
) -> Result<(SampleBlock, bool)> {
    let (count, mut pos) = read_varlen(payload)?;
    let truncated = |pos: usize, needed: usize| FormatError::Truncated {
        offset: pos as u64,
        needed: needed as u64,
        available: (payload.len() - pos.min(payload.len())) as u64,
    };
    // Every row takes at least one flag byte plus one byte per channel.
    let max_rows = (payload.len() - pos) / (1 + channels.min(payload.len()));
    if count > max_rows as u64 {
        return Err(truncated(pos, max_rows + 1));
    }
    let count = count as usize;
    let mut timestamps = Vec::with_capacity(count);
    let mut values = BlockValues::empty(format);
    let mut bad_utf8 = false;
    macro_rules! numeric {
        ($vec:expr, $ty:ty) => {{
            const W: usize = std::mem::size_of::<$ty>();
            $vec.reserve(count * channels);
            for _ in 0..count {
                pos = read_stamp(payload, pos, &mut timestamps)?;
                let end = pos + W * channels;
                let bytes = payload.get(pos..end).ok_or_else(|| truncated(pos, W * channels))?;
                $vec.extend(
                    bytes
                        .chunks_exact(W)
                        .map(|c| <$ty>::from_le_bytes(c.try_into().unwrap())),
                );
                pos = end;
            }
        }};
    }
    match &mut values {
        BlockValues::Int8(v) => numeric!(v, i8),
        BlockValues::Int16(v) => numeric!(v, i16),
        BlockValues::Int32(v) => numeric!(v, i32),
        BlockValues::Int64(v) => numeric!(v, i64),
        BlockValues::Float32(v) => numeric!(v, f32),
        BlockValues::Double64(v) => numeric!(v, f64),
        BlockValues::String(v) => {
            for _ in 0..count {
                pos = read_stamp(payload, pos, &mut timestamps)?;
                for _ in 0..channels {
                    let (len, used) = read_varlen(&payload[pos..]).map_err(|e| e.rebase(pos as u64))?;
                    pos += used;
                    let end = pos
                        .checked_add(usize::try_from(len).unwrap_or(usize::MAX))
                        .filter(|&e| e <= payload.len())
                        .ok_or_else(|| truncated(pos, len.min(usize::MAX as u64) as usize))?;
                    let bytes = &payload[pos..end];
                    match std::str::from_utf8(bytes) {
                        Ok(s) => v.push(s.to_owned()),
                        Err(_) => {
                            bad_utf8 = true;
                            v.push(String::from_utf8_lossy(bytes).into_owned());
                        }
                    }
                    pos = end;
                }
            }
        }
    }
    if pos != payload.len() {
        return Err(FormatError::malformed(
            pos as u64,
            format!("{} trailing bytes after samples", payload.len() - pos),
        ));
    }
    Ok((
        SampleBlock {
            stream_id,
            channel_count: channels,
            timestamps,
            values,
        },
        bad_utf8,
    ))
}

#[inline]
fn read_stamp(payload: &[u8], pos: usize, out: &mut Vec<Option<f64>>) -> Result<usize> {
    match payload.get(pos) {
        Some(0) => {
            out.push(None);
            Ok(pos + 1)
        }
        Some(8) => {
            let bytes = payload.get(pos + 1..pos + 9).ok_or(FormatError::Truncated {
                offset: pos as u64 + 1,
                needed: 8,
                available: (payload.len() - pos - 1) as u64,
            })?;
            let t = f64::from_le_bytes(bytes.try_into().unwrap());
            if !t.is_finite() {
                return Err(FormatError::malformed(pos as u64, "non-finite timestamp"));
            }
            out.push(Some(t));
            Ok(pos + 9)
        }
        Some(&flag) => Err(FormatError::Flag {
            offset: pos as u64,
            flag,
        }),
        None => Err(FormatError::Truncated {
            offset: pos as u64,
            needed: 1,
            available: 0,
        }),
    }
}

/// Decodes a Samples payload (after the 4-byte stream id) for `info`.
pub fn parse_samples_payload(
    payload: &[u8],
    info: &StreamInfo,
) -> Result<(SampleBlock, Vec<ParseWarning>)> {
    let (block, bad_utf8) =
        decode_samples(info.stream_id, payload, info.channel_format, info.channel_count)?;
    let warnings = if bad_utf8 {
        vec![ParseWarning::InvalidUtf8 {
            offset: 0,
            stream_id: info.stream_id,
        }]
    } else {
        Vec::new()
    };
    Ok((block, warnings))
}

/// Single-pass parse handing every chunk to `sink`; nothing is retained.
pub fn parse_streaming<R, F>(
    source: R,
    options: ParseOptions,
    mut sink: F,
) -> Result<Vec<ParseWarning>>
where
    R: Read,
    F: FnMut(u64, Chunk),
{
    let mut reader = XdfReader::new(source, options)?;
    while let Some((offset, chunk)) = reader.next_chunk()? {
        sink(offset, chunk);
    }
    Ok(reader.into_warnings())
}

pub fn parse_recording<R: Read>(source: R) -> Result<(Recording, Vec<ParseWarning>)> {
    parse_recording_with(source, ParseOptions::default())
}

pub fn parse_bytes(bytes: &[u8]) -> Result<(Recording, Vec<ParseWarning>)> {
    parse_recording(bytes)
}

pub fn parse_recording_with<R: Read>(
    source: R,
    options: ParseOptions,
) -> Result<(Recording, Vec<ParseWarning>)> {
    let mut reader = XdfReader::new(source, options)?;
    let mut file_header: Option<XmlNode> = None;
    let mut rec = Recording::new(XmlNode::new("info"));
    while let Some((offset, chunk)) = reader.next_chunk()? {
        match chunk {
            Chunk::FileHeader(tree) => {
                // later duplicates are ignored
                file_header.get_or_insert(tree);
            }
            Chunk::StreamHeader(info) => {
                rec.streams.insert(info.stream_id, Stream::new(info));
            }
            Chunk::Samples(block) => {
                if let Some(s) = rec.streams.get_mut(&block.stream_id) {
                    s.blocks.push(block);
                }
            }
            Chunk::ClockOffset(record) => {
                if let Some(s) = rec.streams.get_mut(&record.stream_id) {
                    s.offsets.push(record);
                }
            }
            Chunk::Boundary => rec.boundary_offsets.push(offset),
            Chunk::StreamFooter { stream_id, footer } => {
                if let Some(s) = rec.streams.get_mut(&stream_id) {
                    s.info.footer = Some(footer);
                }
            }
        }
    }
    rec.source_length = reader.position();
    let mut warnings = reader.into_warnings();
    if let Some(h) = file_header {
        rec.file_header = h;
    }
    for stream in rec.streams.values_mut() {
        stream
            .offsets
            .sort_by(|a, b| a.collection_time.total_cmp(&b.collection_time));
        if let Some(footer) = &stream.info.footer {
            let decoded = stream.sample_count() as u64;
            if footer.sample_count != decoded {
                warnings.push(ParseWarning::FooterMismatch {
                    stream_id: stream.info.stream_id,
                    declared: footer.sample_count,
                    decoded,
                });
            }
            if footer.first_timestamp > footer.last_timestamp {
                warnings.push(ParseWarning::FooterOrder {
                    stream_id: stream.info.stream_id,
                });
            }
        }
    }
    Ok((rec, warnings))
}
