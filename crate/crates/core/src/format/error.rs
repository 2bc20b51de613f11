use std::fmt;

use thiserror::Error;

/// Errors raised while decoding or encoding XDF bytes.
///
/// Offsets are absolute byte positions in the source where known.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("missing \"XDF:\" magic at start of file")]
    Magic,
    #[error("invalid varlen width byte {width} at offset {offset} (expected 1, 4 or 8)")]
    Width { offset: u64, width: u8 },
    #[error("truncated data at offset {offset}: needed {needed} bytes, {available} available")]
    Truncated {
        offset: u64,
        needed: u64,
        available: u64,
    },
    #[error("invalid timestamp flag {flag} at offset {offset} (expected 0 or 8)")]
    Flag { offset: u64, flag: u8 },
    #[error("malformed chunk at offset {offset}: {message}")]
    Malformed { offset: u64, message: String },
    #[error("malformed XML at byte {position}: {message}")]
    Xml { position: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    pub(crate) fn malformed(offset: u64, message: impl Into<String>) -> Self {
        FormatError::Malformed {
            offset,
            message: message.into(),
        }
    }

    /// Shift a payload-relative offset to an absolute one.
    pub(crate) fn rebase(self, base: u64) -> Self {
        match self {
            FormatError::Width { offset, width } => FormatError::Width {
                offset: offset + base,
                width,
            },
            FormatError::Truncated {
                offset,
                needed,
                available,
            } => FormatError::Truncated {
                offset: offset + base,
                needed,
                available,
            },
            FormatError::Flag { offset, flag } => FormatError::Flag {
                offset: offset + base,
                flag,
            },
            FormatError::Malformed { offset, message } => FormatError::Malformed {
                offset: offset + base,
                message,
            },
            other => other,
        }
    }
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

/// Non-fatal conditions found while parsing.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseWarning {
    UnknownChunkTag { offset: u64, tag: u16 },
    UnknownStream { offset: u64, stream_id: u32 },
    DuplicateStreamHeader { offset: u64, stream_id: u32 },
    InvalidUtf8 { offset: u64, stream_id: u32 },
    BadBoundary { offset: u64 },
    FooterMismatch { stream_id: u32, declared: u64, decoded: u64 },
    FooterOrder { stream_id: u32 },
    Recovered { offset: u64, skipped: u64, cause: String },
    Unrecoverable { offset: u64, cause: String },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::UnknownChunkTag { offset, tag } => {
                write!(f, "offset {offset}: unknown chunk tag {tag}, skipped")
            }
            ParseWarning::UnknownStream { offset, stream_id } => write!(
                f,
                "offset {offset}: chunk references undeclared stream {stream_id}, skipped"
            ),
            ParseWarning::DuplicateStreamHeader { offset, stream_id } => write!(
                f,
                "offset {offset}: duplicate header for stream {stream_id}, ignored"
            ),
            ParseWarning::InvalidUtf8 { offset, stream_id } => write!(
                f,
                "offset {offset}: invalid UTF-8 in stream {stream_id}, replaced"
            ),
            ParseWarning::BadBoundary { offset } => {
                write!(f, "offset {offset}: boundary chunk with unexpected signature")
            }
            ParseWarning::FooterMismatch {
                stream_id,
                declared,
                decoded,
            } => write!(
                f,
                "stream {stream_id}: footer declares {declared} samples, {decoded} decoded"
            ),
            ParseWarning::FooterOrder { stream_id } => write!(
                f,
                "stream {stream_id}: footer first_timestamp exceeds last_timestamp"
            ),
            ParseWarning::Recovered {
                offset,
                skipped,
                cause,
            } => write!(
                f,
                "offset {offset}: {cause}; resynchronized after skipping {skipped} bytes"
            ),
            ParseWarning::Unrecoverable { offset, cause } => write!(
                f,
                "offset {offset}: {cause}; no later boundary found, rest of file ignored"
            ),
        }
    }
}
