//! Bell-test audit toolkit.
//!
//! Builds explicit common-cause (local hidden variable) models for
//! single-setting and communication-assisted scenarios, computes Bell and
//! chained-inequality bounds with and without Franson-style postselection,
//! simulates time-bin interferometer runs, and audits experiment schedules
//! for causal loopholes and minimum hypothetical-influence speeds.

pub mod bell;
pub mod correlations;
pub mod error;
pub mod franson;
pub mod lhv;
pub mod numeric;
pub mod spacetime;

pub use error::{Error, Result};
