//! Simulated phase-prediction experiment.
//!
//! [`generate`] produces a five-stream recording: the noisy 10 Hz raw signal,
//! its zero-phase band-passed version, the running phase estimate, the phase
//! predicted `horizon` seconds ahead, and trigger markers placed where the
//! predicted phase crosses the target. [`verify`] re-estimates the true phase
//! at every trigger from the raw signal and summarizes the errors.

mod filter;
mod generate;
mod phase;
mod verify;

use thiserror::Error;

pub use filter::{BandPass, Biquad};
pub use generate::{generate, stage_names, SynthConfig};
pub use phase::{
    circular_stats, oracle_phase, predict_phase, wrap_phase, PhasePredictor, ORACLE_CYCLES,
};
pub use verify::{verify, EventPhase, PhaseReport};

use crate::timeline::TimelineError;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("fit window holds {got} samples, at least {need} required")]
    Window { need: usize, got: usize },
    #[error("t = {t} s is closer than two cycles to a signal edge")]
    Edge { t: f64 },
    #[error("no oscillation found (fitted amplitude {amplitude:e})")]
    PhaseUndefined { amplitude: f64 },
    #[error("recording has no {0} stream")]
    MissingStream(&'static str),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;
