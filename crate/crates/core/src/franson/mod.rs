//! Two-photon interferometer experiment engine: quantum postselected
//! predictions, Monte Carlo time-bin coincidence simulation,
//! postselection-aware local-bound search, and the switching-rate
//! calculator.

pub mod postselect;
pub mod sim;
pub mod switching;

use serde::{Deserialize, Serialize};

use crate::correlations::CorrelationTable;
use crate::error::{Error, Result};

pub use postselect::{
    postselected_value, search_postselected_bound, search_postselected_bound_capped, Path,
    PathStrategy, SearchOutcome, StrategyClass,
};
pub use sim::{
    fit_fringe, fringe_from_summary, scan_fringe, simulate_records, simulate_run, write_fringe_csv,
    FringePoint, RunRecord, RunSummary, Slot,
};
pub use switching::{required_switching_rate, BindingConstraint, StationGeometry, SwitchingReport};

/// Default one-way fiber length, meters.
pub const DEFAULT_FIBER_LENGTH: f64 = 17_500.0;
/// Default fiber refractive index.
pub const DEFAULT_REFRACTIVE_INDEX: f64 = 1.468;

/// Configuration of one unbalanced-interferometer run.
///
/// The two analyzers sit at the ends of long fibers; each has a short and a
/// long arm differing by `delta_t` of propagation. Phases are the analyzer
/// settings: side A scans `phases_a` while side B holds one of `phases_b`
/// (a single entry models a setting that is never switched).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FransonConfig {
    /// Long-minus-short arm propagation difference, seconds.
    pub delta_t: f64,
    /// Source-to-A fiber length, meters.
    pub fiber_length_a: f64,
    /// Source-to-B fiber length, meters.
    pub fiber_length_b: f64,
    pub refractive_index: f64,
    /// Analyzer phases on side A, radians.
    pub phases_a: Vec<f64>,
    /// Analyzer phases on side B, radians.
    pub phases_b: Vec<f64>,
    /// Interference visibility in [0, 1].
    pub visibility: f64,
    /// Per-photon detection probability in (0, 1].
    pub detector_efficiency: f64,
    /// Width of the coincidence acceptance window, seconds.
    pub coincidence_window: f64,
    pub n_pairs: u64,
    pub seed: u64,
}

impl FransonConfig {
    /// An ideal-detector, unit-visibility configuration with default fibers
    /// and a window of `delta_t / 2`.
    pub fn ideal(
        delta_t: f64,
        phases_a: Vec<f64>,
        phases_b: Vec<f64>,
        n_pairs: u64,
        seed: u64,
    ) -> Self {
        FransonConfig {
            delta_t,
            fiber_length_a: DEFAULT_FIBER_LENGTH,
            fiber_length_b: DEFAULT_FIBER_LENGTH,
            refractive_index: DEFAULT_REFRACTIVE_INDEX,
            phases_a,
            phases_b,
            visibility: 1.0,
            detector_efficiency: 1.0,
            coincidence_window: delta_t / 2.0,
            n_pairs,
            seed,
        }
    }

    /// Checks every type invariant.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta_t", self.delta_t),
            ("fiber_length_a", self.fiber_length_a),
            ("fiber_length_b", self.fiber_length_b),
            ("refractive_index", self.refractive_index),
            ("visibility", self.visibility),
            ("detector_efficiency", self.detector_efficiency),
            ("coincidence_window", self.coincidence_window),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if !(self.coincidence_window > 0.0) {
            return Err(Error::Config(format!(
                "coincidence_window must be positive, got {}",
                self.coincidence_window
            )));
        }
        if !(self.delta_t > self.coincidence_window / 2.0) {
            return Err(Error::Config(format!(
                "arm imbalance delta_t = {} must exceed half the coincidence window = {}; \
                 otherwise the three arrival peaks overlap",
                self.delta_t,
                self.coincidence_window / 2.0
            )));
        }
        if self.phases_a.is_empty() || self.phases_b.is_empty() {
            return Err(Error::Config("phase lists must be non-empty".into()));
        }
        if self
            .phases_a
            .iter()
            .chain(&self.phases_b)
            .any(|p| !p.is_finite())
        {
            return Err(Error::Config("phases must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::Config(format!(
                "visibility must lie in [0, 1], got {}",
                self.visibility
            )));
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(Error::Config(format!(
                "detector_efficiency must lie in (0, 1], got {}",
                self.detector_efficiency
            )));
        }
        if self.fiber_length_a < 0.0 || self.fiber_length_b < 0.0 {
            return Err(Error::Config("fiber lengths must be non-negative".into()));
        }
        if self.refractive_index < 1.0 {
            return Err(Error::Config(format!(
                "refractive_index must be at least 1, got {}",
                self.refractive_index
            )));
        }
        if self.n_pairs == 0 {
            return Err(Error::Config("n_pairs must be positive".into()));
        }
        Ok(())
    }
}

/// The quantum prediction for the kept (central-slot) coincidences:
/// a binary-outcome table over `phases_a x phases_b` with
/// `E(phi_A, phi_B) = V cos(phi_A + phi_B)`, i.e. each joint probability
/// `(1 +/- V cos(phi_A + phi_B)) / 4`.
pub fn quantum_postselected_table(config: &FransonConfig) -> Result<CorrelationTable> {
    config.validate()?;
    let v = config.visibility;
    let pa = &config.phases_a;
    let pb = &config.phases_b;
    CorrelationTable::from_fn(pa.len(), pb.len(), 2, 2, |x, y, a, b| {
        let sign = if a == b { 1.0 } else { -1.0 };
        (1.0 + sign * v * (pa[x] + pb[y]).cos()) / 4.0
    })
}
