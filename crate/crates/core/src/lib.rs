//! Toolkit for multi-stream biosignal recordings stored as XDF.
//!
//! - [`format`]: streaming reader and writer for the chunked container.
//! - [`timeline`]: timestamp resolution, clock synchronization, effective
//!   rates, rational resampling and display envelopes.
//! - [`annotations`]: event model, CSV exchange and append-only write-back.
//! - [`synthlab`]: simulated 10 Hz phase-prediction experiment and its
//!   post-hoc phase verification.

pub mod annotations;
pub mod format;
pub mod synthlab;
pub mod timeline;

pub use format::{parse_bytes, parse_recording, serialize_recording, Recording};
