use std::io::Write;

use super::error::Result;
use super::types::{BlockValues, ChunkTag, ClockOffsetRecord, Recording, SampleBlock, StreamFooter, StreamInfo};
use super::varlen::push_varlen;
use super::xml::XmlNode;
use super::{BOUNDARY_SIGNATURE, MAGIC};

/// Low-level chunk emitter. Callers are responsible for chunk order.
pub struct ChunkWriter<W> {
    out: W,
    scratch: Vec<u8>,
    written: u64,
}

impl<W: Write> ChunkWriter<W> {
    /// Wraps `out` without writing the magic (for appending to existing files).
    pub fn new(out: W) -> Self {
        ChunkWriter {
            out,
            scratch: Vec::new(),
            written: 0,
        }
    }

    pub fn write_magic(&mut self) -> Result<()> {
        self.out.write_all(MAGIC)?;
        self.written += MAGIC.len() as u64;
        Ok(())
    }

    pub fn bytes_written(&self) -> u64 {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    fn emit(&mut self, tag: ChunkTag) -> Result<()> {
        let mut head = Vec::with_capacity(11);
        push_varlen(&mut head, self.scratch.len() as u64 + 2);
        head.extend_from_slice(&tag.code().to_le_bytes());
        self.out.write_all(&head)?;
        self.out.write_all(&self.scratch)?;
        self.written += (head.len() + self.scratch.len()) as u64;
        self.scratch.clear();
        Ok(())
    }

    pub fn write_file_header(&mut self, tree: &XmlNode) -> Result<()> {
        self.scratch.extend_from_slice(tree.to_document().as_bytes());
        self.emit(ChunkTag::FileHeader)
    }

    pub fn write_stream_header(&mut self, info: &StreamInfo) -> Result<()> {
        self.scratch.extend_from_slice(&info.stream_id.to_le_bytes());
        self.scratch
            .extend_from_slice(info.header_tree.to_document().as_bytes());
        self.emit(ChunkTag::StreamHeader)
    }

    pub fn write_samples(&mut self, block: &SampleBlock) -> Result<()> {
        encode_samples(block, &mut self.scratch);
        self.emit(ChunkTag::Samples)
    }

    pub fn write_clock_offset(&mut self, record: &ClockOffsetRecord) -> Result<()> {
        self.scratch.extend_from_slice(&record.stream_id.to_le_bytes());
        self.scratch
            .extend_from_slice(&record.collection_time.to_le_bytes());
        self.scratch.extend_from_slice(&record.offset.to_le_bytes());
        self.emit(ChunkTag::ClockOffset)
    }

    pub fn write_boundary(&mut self) -> Result<()> {
        self.scratch.extend_from_slice(&BOUNDARY_SIGNATURE);
        self.emit(ChunkTag::Boundary)
    }

    pub fn write_footer(&mut self, stream_id: u32, footer: &StreamFooter) -> Result<()> {
        self.scratch.extend_from_slice(&stream_id.to_le_bytes());
        self.scratch
            .extend_from_slice(footer.tree.to_document().as_bytes());
        self.emit(ChunkTag::StreamFooter)
    }
}

fn encode_samples(block: &SampleBlock, out: &mut Vec<u8>) {
    out.extend_from_slice(&block.stream_id.to_le_bytes());
    push_varlen(out, block.len() as u64);
    let cc = block.channel_count;
    macro_rules! numeric {
        ($vec:expr) => {
            for (row, chunk) in $vec.chunks_exact(cc).enumerate() {
                push_stamp(out, block.timestamps[row]);
                for v in chunk {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        };
    }
    match &block.values {
        BlockValues::Int8(v) => numeric!(v),
        BlockValues::Int16(v) => numeric!(v),
        BlockValues::Int32(v) => numeric!(v),
        BlockValues::Int64(v) => numeric!(v),
        BlockValues::Float32(v) => numeric!(v),
        BlockValues::Double64(v) => numeric!(v),
        BlockValues::String(v) => {
            for (row, chunk) in v.chunks_exact(cc).enumerate() {
                push_stamp(out, block.timestamps[row]);
                for s in chunk {
                    push_varlen(out, s.len() as u64);
                    out.extend_from_slice(s.as_bytes());
                }
            }
        }
    }
}

fn push_stamp(out: &mut Vec<u8>, stamp: Option<f64>) {
    match stamp {
        Some(t) => {
            out.push(8);
            out.extend_from_slice(&t.to_le_bytes());
        }
        None => out.push(0),
    }
}

/// Encodes a Recording as XDF bytes.
///
/// Order: magic, FileHeader, StreamHeaders (ascending id), Samples (per
/// stream, original block partitioning), ClockOffsets, StreamFooters. As many
/// Boundary chunks as the recording lists are spread evenly between the
/// Samples chunks.
pub fn serialize_recording(rec: &Recording) -> Vec<u8> {
    let mut w = ChunkWriter::new(Vec::new());
    // writes into a Vec cannot fail
    write_recording(rec, &mut w).expect("in-memory write");
    w.into_inner()
}

fn write_recording<W: Write>(rec: &Recording, w: &mut ChunkWriter<W>) -> Result<()> {
    w.write_magic()?;
    w.write_file_header(&rec.file_header)?;
    for stream in rec.streams.values() {
        w.write_stream_header(&stream.info)?;
    }
    let total_blocks: usize = rec.streams.values().map(|s| s.blocks.len()).sum();
    let boundaries = rec.boundary_offsets.len();
    let boundary_after = |j: usize| (j + 1) * total_blocks / (boundaries + 1);
    let mut next_boundary = 0;
    let mut emitted = 0;
    let mut flush = |w: &mut ChunkWriter<W>, emitted: usize| -> Result<()> {
        while next_boundary < boundaries && boundary_after(next_boundary) <= emitted {
            w.write_boundary()?;
            next_boundary += 1;
        }
        Ok(())
    };
    for stream in rec.streams.values() {
        for block in &stream.blocks {
            w.write_samples(block)?;
            emitted += 1;
            flush(w, emitted)?;
        }
    }
    flush(w, emitted)?;
    for stream in rec.streams.values() {
        for record in &stream.offsets {
            w.write_clock_offset(record)?;
        }
    }
    for stream in rec.streams.values() {
        if let Some(footer) = &stream.info.footer {
            w.write_footer(stream.info.stream_id, footer)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{parse_bytes, ChannelFormat, Stream};

    #[test]
    fn header_only_round_trip() {
        let rec = Recording::new(Recording::default_header());
        let bytes = serialize_recording(&rec);
        assert_eq!(&bytes[..4], b"XDF:");
        let (back, warnings) = parse_bytes(&bytes).unwrap();
        assert!(warnings.is_empty());
        assert!(back.same_content(&rec));
        assert_eq!(back.source_length, bytes.len() as u64);
    }

    #[test]
    fn boundaries_are_preserved_in_count() {
        let mut rec = Recording::new(Recording::default_header());
        let info = StreamInfo::new(3, "x", "EEG", 1, 10.0, ChannelFormat::Int32);
        let mut stream = Stream::new(info);
        for i in 0..5 {
            stream.blocks.push(
                SampleBlock::new(3, 1, vec![Some(i as f64)], BlockValues::Int32(vec![i])).unwrap(),
            );
        }
        rec.streams.insert(3, stream);
        rec.boundary_offsets = vec![0, 0];
        let (back, _) = parse_bytes(&serialize_recording(&rec)).unwrap();
        assert_eq!(back.boundary_offsets.len(), 2);
        assert!(back.same_content(&rec));
    }
}
