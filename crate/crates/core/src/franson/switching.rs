//! Switching-rate requirements for a genuinely setting-switched
//! interferometer experiment.

use serde::{Deserialize, Serialize};

use super::FransonConfig;
use crate::error::{Error, Result};
use crate::spacetime::SPEED_OF_LIGHT;

/// Lab-frame positions of the two analyzers and the photon source, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationGeometry {
    pub position_a: [f64; 3],
    pub position_b: [f64; 3],
    pub position_source: [f64; 3],
}

fn distance(p: [f64; 3], q: [f64; 3]) -> f64 {
    let mut d2 = 0.0;
    for k in 0..3 {
        let d = p[k] - q[k];
        d2 += d * d;
    }
    d2.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConstraint {
    /// The setting must change between the early and late wave-packet
    /// passages: rate >= 1/delta_t.
    ArmImbalance,
    /// Side A's choice window (outside the emission's future cone and the
    /// remote outcome's past cone) is the shortest timescale.
    ChoiceWindowA,
    /// Side B's choice window is the shortest timescale.
    ChoiceWindowB,
}

/// The computed requirement. This is a rule-based criterion derived from
/// the geometry, not a measured property: the setting must (a) change
/// faster than the arm imbalance and (b) be refreshed inside the window in
/// which a choice is spacelike from both the emission and the remote
/// outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingReport {
    /// Minimal switching rate in Hz; None when no rate can satisfy the
    /// light-cone constraints.
    pub required_rate_hz: Option<f64>,
    pub impossible: bool,
    pub binding_constraint: Option<BindingConstraint>,
    /// 1 / delta_t.
    pub arm_rate_hz: f64,
    /// Duration of side A's valid choice window, seconds (may be <= 0).
    pub choice_window_a_s: f64,
    pub choice_window_b_s: f64,
    pub detail: String,
}

/// Computes the switching rate a genuine test would need with this config
/// and geometry.
///
/// Photons reach each side after `refractive_index * fiber_length / c`.
/// A fresh setting choice on side A must be made after the emission could
/// influence it (outside the emission's future light cone through free
/// space) and before it could influence the remote outcome: that window is
/// `(d_SA + d_AB - n L_B) / c`, and symmetrically for side B. The rate must
/// beat the arm imbalance and both windows.
pub fn required_switching_rate(
    config: &FransonConfig,
    geometry: &StationGeometry,
) -> Result<SwitchingReport> {
    config.validate()?;
    let d_sa = distance(geometry.position_a, geometry.position_source);
    let d_sb = distance(geometry.position_b, geometry.position_source);
    let d_ab = distance(geometry.position_a, geometry.position_b);
    let fiber_a = config.refractive_index * config.fiber_length_a;
    let fiber_b = config.refractive_index * config.fiber_length_b;
    if fiber_a < d_sa || fiber_b < d_sb {
        return Err(Error::Domain(format!(
            "inconsistent geometry: optical path (A: {fiber_a} m, B: {fiber_b} m) shorter \
             than the straight-line distance (A: {d_sa} m, B: {d_sb} m); the photon would \
             have to outrun light"
        )));
    }

    let arm_rate_hz = 1.0 / config.delta_t;
    // Choice on A must happen after t_E + d_SA/c and before t_B - d_AB/c,
    // with t_B = t_E + n L_B / c.
    let window_a = (d_sa + d_ab - fiber_b) / SPEED_OF_LIGHT;
    let window_b = (d_sb + d_ab - fiber_a) / SPEED_OF_LIGHT;

    if window_a <= 0.0 || window_b <= 0.0 {
        let mut blocked = Vec::new();
        if window_a <= 0.0 {
            blocked.push("A");
        }
        if window_b <= 0.0 {
            blocked.push("B");
        }
        return Ok(SwitchingReport {
            required_rate_hz: None,
            impossible: true,
            binding_constraint: None,
            arm_rate_hz,
            choice_window_a_s: window_a,
            choice_window_b_s: window_b,
            detail: format!(
                "side {} has no moment that is both outside the emission's future \
                 light cone and outside the remote outcome's past light cone; no \
                 switching rate can help this geometry",
                blocked.join(" and side ")
            ),
        });
    }

    let candidates = [
        (BindingConstraint::ArmImbalance, arm_rate_hz),
        (BindingConstraint::ChoiceWindowA, 1.0 / window_a),
        (BindingConstraint::ChoiceWindowB, 1.0 / window_b),
    ];
    let (binding, rate) = candidates
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three candidates");

    Ok(SwitchingReport {
        required_rate_hz: Some(rate),
        impossible: false,
        binding_constraint: Some(binding),
        arm_rate_hz,
        choice_window_a_s: window_a,
        choice_window_b_s: window_b,
        detail: match binding {
            BindingConstraint::ArmImbalance => format!(
                "the setting must change between the early and late passages: \
                 1/delta_t = {rate:.6e} Hz"
            ),
            BindingConstraint::ChoiceWindowA => format!(
                "side A's causally valid choice window is {window_a:.6e} s, \
                 requiring {rate:.6e} Hz"
            ),
            BindingConstraint::ChoiceWindowB => format!(
                "side B's causally valid choice window is {window_b:.6e} s, \
                 requiring {rate:.6e} Hz"
            ),
        },
    })
}
