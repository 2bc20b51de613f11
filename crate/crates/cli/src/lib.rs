//! Command implementations and the local HTTP service behind the `xdfkit`
//! binary. Every command writes to a caller-supplied sink so its output can
//! be reproduced from library calls.

pub mod commands;
pub mod service;
pub mod summary;

pub use commands::Exit;
