//! Jitter-compensated averaging of stimulus-locked trials.
//!
//! Trials are aligned to a reference average by a length-preserving dynamic
//! time warp, low-pass filtered to remove the artifacts of the warp, and
//! averaged. The crate also provides the evaluation measures, a synthetic
//! trial generator, a template-distance classifier and the batch commands
//! used by the `erpalign` binary.

pub mod accum;
pub mod classify;
pub mod commands;
pub mod config;
pub mod error;
pub mod filters;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod signal;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
