use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::error::FormatError;
use super::xml::XmlNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ChunkTag {
    FileHeader = 1,
    StreamHeader = 2,
    Samples = 3,
    ClockOffset = 4,
    Boundary = 5,
    StreamFooter = 6,
}

impl ChunkTag {
    pub fn from_code(code: u16) -> Option<Self> {
        Some(match code {
            1 => ChunkTag::FileHeader,
            2 => ChunkTag::StreamHeader,
            3 => ChunkTag::Samples,
            4 => ChunkTag::ClockOffset,
            5 => ChunkTag::Boundary,
            6 => ChunkTag::StreamFooter,
            _ => return None,
        })
    }

    pub fn code(self) -> u16 {
        self as u16
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelFormat {
    Int8,
    Int16,
    Int32,
    Int64,
    Float32,
    Double64,
    String,
}

impl ChannelFormat {
    pub const ALL: [ChannelFormat; 7] = [
        ChannelFormat::Int8,
        ChannelFormat::Int16,
        ChannelFormat::Int32,
        ChannelFormat::Int64,
        ChannelFormat::Float32,
        ChannelFormat::Double64,
        ChannelFormat::String,
    ];

    /// Byte width of one value; `None` for strings.
    pub fn width(self) -> Option<usize> {
        match self {
            ChannelFormat::Int8 => Some(1),
            ChannelFormat::Int16 => Some(2),
            ChannelFormat::Int32 | ChannelFormat::Float32 => Some(4),
            ChannelFormat::Int64 | ChannelFormat::Double64 => Some(8),
            ChannelFormat::String => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelFormat::Int8 => "int8",
            ChannelFormat::Int16 => "int16",
            ChannelFormat::Int32 => "int32",
            ChannelFormat::Int64 => "int64",
            ChannelFormat::Float32 => "float32",
            ChannelFormat::Double64 => "double64",
            ChannelFormat::String => "string",
        }
    }

    pub fn is_numeric(self) -> bool {
        self != ChannelFormat::String
    }
}

impl fmt::Display for ChannelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChannelFormat::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown channel format {s:?}"))
    }
}

/// Summary written at the end of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFooter {
    pub first_timestamp: f64,
    pub last_timestamp: f64,
    pub sample_count: u64,
    pub tree: XmlNode,
}

impl StreamFooter {
    pub fn new(first_timestamp: f64, last_timestamp: f64, sample_count: u64) -> Self {
        let mut tree = XmlNode::new("info");
        tree.push(XmlNode::with_text("first_timestamp", first_timestamp.to_string()))
            .push(XmlNode::with_text("last_timestamp", last_timestamp.to_string()))
            .push(XmlNode::with_text("sample_count", sample_count.to_string()));
        StreamFooter {
            first_timestamp,
            last_timestamp,
            sample_count,
            tree,
        }
    }

    pub fn from_tree(tree: XmlNode) -> Result<Self, String> {
        fn field<T: FromStr>(tree: &XmlNode, name: &str) -> Result<T, String> {
            tree.child_text(name)
                .ok_or_else(|| format!("footer lacks <{name}>"))?
                .parse()
                .map_err(|_| format!("footer <{name}> is not a number"))
        }
        Ok(StreamFooter {
            first_timestamp: field(&tree, "first_timestamp")?,
            last_timestamp: field(&tree, "last_timestamp")?,
            sample_count: field(&tree, "sample_count")?,
            tree,
        })
    }
}

/// Per-stream metadata decoded from a StreamHeader (and optional footer).
///
/// `header_tree` is what gets written back; the typed fields are read from it.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamInfo {
    pub stream_id: u32,
    pub name: String,
    pub content_type: String,
    pub channel_count: usize,
    pub nominal_srate: f64,
    pub channel_format: ChannelFormat,
    pub header_tree: XmlNode,
    pub footer: Option<StreamFooter>,
}

impl StreamInfo {
    pub fn new(
        stream_id: u32,
        name: &str,
        content_type: &str,
        channel_count: usize,
        nominal_srate: f64,
        channel_format: ChannelFormat,
    ) -> Self {
        let mut tree = XmlNode::new("info");
        tree.push(XmlNode::with_text("name", name))
            .push(XmlNode::with_text("type", content_type))
            .push(XmlNode::with_text("channel_count", channel_count.to_string()))
            .push(XmlNode::with_text("nominal_srate", nominal_srate.to_string()))
            .push(XmlNode::with_text("channel_format", channel_format.as_str()));
        StreamInfo {
            stream_id,
            name: name.to_owned(),
            content_type: content_type.to_owned(),
            channel_count,
            nominal_srate,
            channel_format,
            header_tree: tree,
            footer: None,
        }
    }

    /// Reads the typed fields out of a StreamHeader XML tree.
    pub fn from_header(stream_id: u32, tree: XmlNode) -> Result<Self, String> {
        let channel_count: usize = tree
            .child_text("channel_count")
            .ok_or("stream header lacks <channel_count>")?
            .parse()
            .map_err(|_| "invalid <channel_count>")?;
        if channel_count == 0 {
            return Err("channel_count must be at least 1".into());
        }
        let nominal_srate: f64 = match tree.child_text("nominal_srate") {
            None | Some("") => 0.0,
            Some(s) => s.parse().map_err(|_| format!("invalid <nominal_srate> {s:?}"))?,
        };
        if !(nominal_srate.is_finite() && nominal_srate >= 0.0) {
            return Err(format!("nominal_srate {nominal_srate} out of range"));
        }
        let channel_format = tree
            .child_text("channel_format")
            .ok_or("stream header lacks <channel_format>")?
            .parse()?;
        Ok(StreamInfo {
            stream_id,
            name: tree.child_text("name").unwrap_or_default().to_owned(),
            content_type: tree.child_text("type").unwrap_or_default().to_owned(),
            channel_count,
            nominal_srate,
            channel_format,
            header_tree: tree,
            footer: None,
        })
    }

    pub fn is_regular(&self) -> bool {
        self.nominal_srate > 0.0
    }

    /// Irregular-rate string streams carry discrete events.
    pub fn is_marker(&self) -> bool {
        self.channel_format == ChannelFormat::String && !self.is_regular()
    }
}

/// Row-major sample values of one block, typed by channel format.
#[derive(Debug, Clone)]
pub enum BlockValues {
    Int8(Vec<i8>),
    Int16(Vec<i16>),
    Int32(Vec<i32>),
    Int64(Vec<i64>),
    Float32(Vec<f32>),
    Double64(Vec<f64>),
    String(Vec<String>),
}

impl BlockValues {
    pub fn empty(format: ChannelFormat) -> Self {
        match format {
            ChannelFormat::Int8 => BlockValues::Int8(Vec::new()),
            ChannelFormat::Int16 => BlockValues::Int16(Vec::new()),
            ChannelFormat::Int32 => BlockValues::Int32(Vec::new()),
            ChannelFormat::Int64 => BlockValues::Int64(Vec::new()),
            ChannelFormat::Float32 => BlockValues::Float32(Vec::new()),
            ChannelFormat::Double64 => BlockValues::Double64(Vec::new()),
            ChannelFormat::String => BlockValues::String(Vec::new()),
        }
    }

    pub fn format(&self) -> ChannelFormat {
        match self {
            BlockValues::Int8(_) => ChannelFormat::Int8,
            BlockValues::Int16(_) => ChannelFormat::Int16,
            BlockValues::Int32(_) => ChannelFormat::Int32,
            BlockValues::Int64(_) => ChannelFormat::Int64,
            BlockValues::Float32(_) => ChannelFormat::Float32,
            BlockValues::Double64(_) => ChannelFormat::Double64,
            BlockValues::String(_) => ChannelFormat::String,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BlockValues::Int8(v) => v.len(),
            BlockValues::Int16(v) => v.len(),
            BlockValues::Int32(v) => v.len(),
            BlockValues::Int64(v) => v.len(),
            BlockValues::Float32(v) => v.len(),
            BlockValues::Double64(v) => v.len(),
            BlockValues::String(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value at flat index as `f64`; `None` for strings.
    pub fn get_f64(&self, index: usize) -> Option<f64> {
        Some(match self {
            BlockValues::Int8(v) => v[index] as f64,
            BlockValues::Int16(v) => v[index] as f64,
            BlockValues::Int32(v) => v[index] as f64,
            BlockValues::Int64(v) => v[index] as f64,
            BlockValues::Float32(v) => v[index] as f64,
            BlockValues::Double64(v) => v[index],
            BlockValues::String(_) => return None,
        })
    }
}

/// Bitwise equality: NaN payloads compare equal to themselves.
impl PartialEq for BlockValues {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (BlockValues::Int8(a), BlockValues::Int8(b)) => a == b,
            (BlockValues::Int16(a), BlockValues::Int16(b)) => a == b,
            (BlockValues::Int32(a), BlockValues::Int32(b)) => a == b,
            (BlockValues::Int64(a), BlockValues::Int64(b)) => a == b,
            (BlockValues::Float32(a), BlockValues::Float32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (BlockValues::Double64(a), BlockValues::Double64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (BlockValues::String(a), BlockValues::String(b)) => a == b,
            _ => false,
        }
    }
}

/// Decoded payload of one Samples chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    pub stream_id: u32,
    pub channel_count: usize,
    /// One entry per row; `None` where the file omitted the stamp.
    pub timestamps: Vec<Option<f64>>,
    pub values: BlockValues,
}

impl SampleBlock {
    pub fn new(
        stream_id: u32,
        channel_count: usize,
        timestamps: Vec<Option<f64>>,
        values: BlockValues,
    ) -> Result<Self, FormatError> {
        if channel_count == 0 || values.len() != timestamps.len() * channel_count {
            return Err(FormatError::malformed(
                0,
                format!(
                    "{} values do not fill {} rows of {} channels",
                    values.len(),
                    timestamps.len(),
                    channel_count
                ),
            ));
        }
        if timestamps.iter().flatten().any(|t| !t.is_finite()) {
            return Err(FormatError::malformed(0, "non-finite timestamp"));
        }
        Ok(SampleBlock {
            stream_id,
            channel_count,
            timestamps,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn numeric(&self, row: usize, channel: usize) -> Option<f64> {
        self.values.get_f64(row * self.channel_count + channel)
    }

    pub fn string(&self, row: usize, channel: usize) -> Option<&str> {
        match &self.values {
            BlockValues::String(v) => Some(&v[row * self.channel_count + channel]),
            _ => None,
        }
    }
}

/// One clock-offset measurement: `offset = recorder_time - stream_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClockOffsetRecord {
    pub stream_id: u32,
    pub collection_time: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub info: StreamInfo,
    pub blocks: Vec<SampleBlock>,
    /// Sorted by collection time.
    pub offsets: Vec<ClockOffsetRecord>,
}

impl Stream {
    pub fn new(info: StreamInfo) -> Self {
        Stream {
            info,
            blocks: Vec::new(),
            offsets: Vec::new(),
        }
    }

    pub fn sample_count(&self) -> usize {
        self.blocks.iter().map(SampleBlock::len).sum()
    }

    /// All values of one channel across blocks, as `f64`. Empty for strings.
    pub fn channel_f64(&self, channel: usize) -> Vec<f64> {
        if !self.info.channel_format.is_numeric() || channel >= self.info.channel_count {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(self.sample_count());
        for block in &self.blocks {
            for row in 0..block.len() {
                out.extend(block.numeric(row, channel));
            }
        }
        out
    }

    /// First-channel strings across blocks. Empty for numeric streams.
    pub fn labels(&self) -> Vec<&str> {
        self.blocks
            .iter()
            .flat_map(|b| (0..b.len()).filter_map(move |r| b.string(r, 0)))
            .collect()
    }
}

/// In-memory model of one XDF file.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub file_header: XmlNode,
    pub streams: BTreeMap<u32, Stream>,
    /// Byte offsets of Boundary chunks in the source.
    pub boundary_offsets: Vec<u64>,
    pub source_length: u64,
}

impl Recording {
    pub fn new(file_header: XmlNode) -> Self {
        Recording {
            file_header,
            streams: BTreeMap::new(),
            boundary_offsets: Vec::new(),
            source_length: 0,
        }
    }

    /// Default file header `<info><version>1.0</version></info>`.
    pub fn default_header() -> XmlNode {
        let mut header = XmlNode::new("info");
        header.push(XmlNode::with_text("version", "1.0"));
        header
    }

    /// Equality of decoded content, ignoring byte layout (boundary
    /// positions and source length).
    pub fn same_content(&self, other: &Recording) -> bool {
        self.file_header == other.file_header && self.streams == other.streams
    }

    pub fn stream(&self, id: u32) -> Option<&Stream> {
        self.streams.get(&id)
    }

    pub fn stream_by_name(&self, name: &str) -> Option<&Stream> {
        self.streams.values().find(|s| s.info.name == name)
    }
}
