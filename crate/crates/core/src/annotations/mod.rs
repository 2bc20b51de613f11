//! Events decoded from marker streams or added by the user, CSV exchange, and
//! append-only write-back into the source file.

mod csv_io;
mod events;
mod writeback;

use thiserror::Error;

pub use csv_io::{export_csv, import_csv, CSV_HEADER};
pub use events::{derive_events, Event, EventSet, Origin};
pub use writeback::{
    append_events, append_to_file, write_back, ANNOTATION_STREAM_NAME, DURATION_TAG,
};

use crate::format::FormatError;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("invalid event: {0}")]
    Validation(String),
    #[error("CSV header must be exactly `{CSV_HEADER}`")]
    Header,
    #[error("CSV line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("no event with id {0}")]
    NotFound(u64),
    #[error("event {0} was decoded from the recording and cannot be removed")]
    Immutable(u64),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = AnnotationError> = std::result::Result<T, E>;
