//! XDF container model, streaming reader and writer.
//!
//! A file is the magic `XDF:` followed by chunks. Each chunk is a varlen
//! length (covering tag and payload), a little-endian `u16` tag and the
//! payload. See [`ChunkTag`] for the chunk kinds.

mod error;
mod reader;
mod types;
mod varlen;
mod writer;
pub mod xml;

pub use error::{FormatError, ParseWarning, Result};
pub use reader::{
    parse_bytes, parse_recording, parse_recording_with, parse_samples_payload, parse_streaming,
    Chunk, ParseOptions, XdfReader,
};
pub use types::{
    BlockValues, ChannelFormat, ChunkTag, ClockOffsetRecord, Recording, SampleBlock, Stream,
    StreamFooter, StreamInfo,
};
pub use varlen::{read_varlen, write_varlen};
pub use writer::{serialize_recording, ChunkWriter};
pub use xml::{parse_xml, XmlNode};

/// File magic.
pub const MAGIC: &[u8; 4] = b"XDF:";

/// Payload of every Boundary chunk.
pub const BOUNDARY_SIGNATURE: [u8; 16] = [
    0x43, 0xA5, 0x46, 0xDC, 0xCB, 0xF5, 0x41, 0x0F, 0xB3, 0x0E, 0xD5, 0x46, 0x73, 0x83, 0xCB, 0xE4,
];
