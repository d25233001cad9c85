//! Special-relativistic event algebra: intervals, light-cone classification,
//! boosts, minimum influence speeds, and the causal audit of an experiment
//! schedule.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact SI speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default tolerance on s² for light-cone classification, m². Engineered
/// null intervals land within float noise of zero; one square meter keeps
/// them Lightlike without misclassifying anything physical.
pub const INTERVAL_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Emission,
    SettingChoice,
    Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
    Source,
}

/// A labeled spacetime point in the shared lab frame (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub label: String,
    pub kind: EventKind,
    pub side: Side,
    /// Meters.
    pub position: [f64; 3],
    /// Seconds on the shared lab-frame clock.
    pub time: f64,
}

impl Event {
    pub fn new(
        label: impl Into<String>,
        kind: EventKind,
        side: Side,
        position: [f64; 3],
        time: f64,
    ) -> Self {
        Event {
            label: label.into(),
            kind,
            side,
            position,
            time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalClass {
    Timelike,
    Lightlike,
    Spacelike,
}

/// Squared Minkowski interval in signature (+,−,−,−):
/// `s² = c²Δt² − |Δx|²`, in meters². Symmetric in its arguments.
pub fn interval_squared(e1: &Event, e2: &Event) -> f64 {
    let dt = e1.time - e2.time;
    let mut dx2 = 0.0;
    for k in 0..3 {
        let d = e1.position[k] - e2.position[k];
        dx2 += d * d;
    }
    (SPEED_OF_LIGHT * dt) * (SPEED_OF_LIGHT * dt) - dx2
}

/// Light-cone classification with an explicit tolerance on s² (m²).
pub fn classify_with_tolerance(e1: &Event, e2: &Event, tolerance: f64) -> IntervalClass {
    let s2 = interval_squared(e1, e2);
    if s2 > tolerance {
        IntervalClass::Timelike
    } else if s2 < -tolerance {
        IntervalClass::Spacelike
    } else {
        IntervalClass::Lightlike
    }
}

/// Light-cone classification at the default tolerance.
pub fn classify(e1: &Event, e2: &Event) -> IntervalClass {
    classify_with_tolerance(e1, e2, INTERVAL_TOLERANCE)
}

/// The slowest signal speed that could connect the two events, in units of
/// c: `(|Δx| / |Δt|) / c`. Simultaneous distant events need an infinitely
/// fast influence; coincident events need none.
pub fn min_influence_speed(e1: &Event, e2: &Event) -> f64 {
    let dt = (e1.time - e2.time).abs();
    let mut dx2 = 0.0;
    for k in 0..3 {
        let d = e1.position[k] - e2.position[k];
        dx2 += d * d;
    }
    let dx = dx2.sqrt();
    if dt == 0.0 {
        if dx > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        (dx / dt) / SPEED_OF_LIGHT
    }
}

/// Boosts an event into the frame moving at velocity `beta` (units of c)
/// relative to the lab frame. Errors when |beta| >= 1.
pub fn lorentz_boost(e: &Event, beta: [f64; 3]) -> Result<Event> {
    let b2 = beta[0] * beta[0] + beta[1] * beta[1] + beta[2] * beta[2];
    if !(b2 < 1.0) {
        return Err(Error::Domain(format!(
            "boost speed |beta| = {} must be below 1",
            b2.sqrt()
        )));
    }
    if b2 == 0.0 {
        return Ok(e.clone());
    }
    let gamma = 1.0 / (1.0 - b2).sqrt();
    let bx = beta[0] * e.position[0] + beta[1] * e.position[1] + beta[2] * e.position[2];
    let time = gamma * (e.time - bx / SPEED_OF_LIGHT);
    let coef = (gamma - 1.0) * bx / b2 - gamma * SPEED_OF_LIGHT * e.time;
    let mut position = e.position;
    for k in 0..3 {
        position[k] += coef * beta[k];
    }
    Ok(Event {
        label: e.label.clone(),
        kind: e.kind,
        side: e.side,
        position,
        time,
    })
}

/// Boosts the pair into each listed frame and reports the minimum influence
/// speed seen there. For a spacelike pair some frame makes the events
/// simultaneous, sending the required speed to infinity.
pub fn frame_speed_scan(
    e1: &Event,
    e2: &Event,
    betas: &[[f64; 3]],
) -> Result<Vec<([f64; 3], f64)>> {
    let mut out = Vec::with_capacity(betas.len());
    for &beta in betas {
        let b1 = lorentz_boost(e1, beta)?;
        let b2 = lorentz_boost(e2, beta)?;
        out.push((beta, min_influence_speed(&b1, &b2)));
    }
    Ok(out)
}

/// A lab-frame description of one experimental run's causal structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSchedule {
    pub events: Vec<Event>,
    pub settings_count_a: usize,
    pub settings_count_b: usize,
}

impl ExperimentSchedule {
    pub fn new(
        events: Vec<Event>,
        settings_count_a: usize,
        settings_count_b: usize,
    ) -> Result<Self> {
        let schedule = ExperimentSchedule {
            events,
            settings_count_a,
            settings_count_b,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Checks the type invariants: non-empty, finite coordinates,
    /// non-negative times, unique labels, at most one Emission, at least one
    /// Outcome on each measurement side, positive settings counts.
    pub fn validate(&self) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::Domain("schedule has no events".into()));
        }
        if self.settings_count_a == 0 || self.settings_count_b == 0 {
            return Err(Error::Domain("settings counts must be positive".into()));
        }
        let mut emissions = 0;
        let mut outcome_a = false;
        let mut outcome_b = false;
        for (i, e) in self.events.iter().enumerate() {
            if !e.time.is_finite() || e.position.iter().any(|p| !p.is_finite()) {
                return Err(Error::Domain(format!(
                    "event '{}' has non-finite coordinates",
                    e.label
                )));
            }
            if e.time < 0.0 {
                return Err(Error::Domain(format!(
                    "event '{}' has negative time {}",
                    e.label, e.time
                )));
            }
            if self.events[..i].iter().any(|o| o.label == e.label) {
                return Err(Error::Domain(format!(
                    "duplicate event label '{}'",
                    e.label
                )));
            }
            match (e.kind, e.side) {
                (EventKind::Emission, _) => emissions += 1,
                (EventKind::Outcome, Side::A) => outcome_a = true,
                (EventKind::Outcome, Side::B) => outcome_b = true,
                _ => {}
            }
        }
        if emissions > 1 {
            return Err(Error::Domain("schedule has more than one emission".into()));
        }
        if !outcome_a || !outcome_b {
            return Err(Error::Domain(
                "schedule needs at least one outcome event on each side".into(),
            ));
        }
        Ok(())
    }

    fn events_matching(&self, kind: EventKind, side: Side) -> Vec<&Event> {
        self.events
            .iter()
            .filter(|e| e.kind == kind && e.side == side)
            .collect()
    }
}

/// Machine-readable audit findings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FindingCode {
    #[serde(rename = "SINGLE_SETTING_NO_BELL_TEST")]
    SingleSettingNoBellTest,
    #[serde(rename = "CHOICE_NOT_SPACELIKE_FROM_REMOTE_OUTCOME")]
    ChoiceNotSpacelikeFromRemoteOutcome,
    #[serde(rename = "OUTCOMES_NOT_SPACELIKE")]
    OutcomesNotSpacelike,
    #[serde(rename = "POSTSELECTION_PRESENT_CHSH_INVALID")]
    PostselectionPresentChshInvalid,
    #[serde(rename = "OK")]
    Ok,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::SingleSettingNoBellTest => "SINGLE_SETTING_NO_BELL_TEST",
            FindingCode::ChoiceNotSpacelikeFromRemoteOutcome => {
                "CHOICE_NOT_SPACELIKE_FROM_REMOTE_OUTCOME"
            }
            FindingCode::OutcomesNotSpacelike => "OUTCOMES_NOT_SPACELIKE",
            FindingCode::PostselectionPresentChshInvalid => "POSTSELECTION_PRESENT_CHSH_INVALID",
            FindingCode::Ok => "OK",
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    pub detail: String,
}

/// A speed in units of c that may be infinite; serialized as a JSON number
/// or the string "infinite".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedInC(pub f64);

impl Serialize for SpeedInC {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("infinite")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for SpeedInC {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(SpeedInC(v)),
            Raw::Word(w) if w == "infinite" => Ok(SpeedInC(f64::INFINITY)),
            Raw::Word(w) => Err(D::Error::custom(format!("unrecognized speed '{w}'"))),
        }
    }
}

/// Interval class and minimum influence speed for one unordered event pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairClassification {
    pub event_1: String,
    pub event_2: String,
    pub class: IntervalClass,
    pub min_influence_speed: SpeedInC,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub pair_classifications: Vec<PairClassification>,
    pub findings: Vec<Finding>,
}

impl AuditReport {
    pub fn has(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    /// Adds a finding, dropping any OK entry first (OK means "no findings").
    pub fn add_finding(&mut self, code: FindingCode, detail: impl Into<String>) {
        if code != FindingCode::Ok {
            self.findings.retain(|f| f.code != FindingCode::Ok);
        }
        self.findings.push(Finding {
            code,
            detail: detail.into(),
        });
    }
}

/// Audits a schedule's causal structure: classifies every event pair and
/// checks the preconditions a Bell test rests on — freely repeated setting
/// choices on both sides, each choice spacelike from the remote outcome, and
/// spacelike outcome separation.
pub fn audit_experiment(schedule: &ExperimentSchedule) -> Result<AuditReport> {
    schedule.validate()?;

    let mut pair_classifications = Vec::new();
    for (i, e1) in schedule.events.iter().enumerate() {
        for e2 in schedule.events.iter().skip(i + 1) {
            let (first, second) = if e1.label <= e2.label {
                (e1, e2)
            } else {
                (e2, e1)
            };
            pair_classifications.push(PairClassification {
                event_1: first.label.clone(),
                event_2: second.label.clone(),
                class: classify(first, second),
                min_influence_speed: SpeedInC(min_influence_speed(first, second)),
            });
        }
    }
    pair_classifications.sort_by(|p, q| {
        (p.event_1.as_str(), p.event_2.as_str()).cmp(&(q.event_1.as_str(), q.event_2.as_str()))
    });

    let mut report = AuditReport {
        pair_classifications,
        findings: Vec::new(),
    };

    if schedule.settings_count_a < 2 || schedule.settings_count_b < 2 {
        let mut fixed = Vec::new();
        if schedule.settings_count_a < 2 {
            fixed.push("A");
        }
        if schedule.settings_count_b < 2 {
            fixed.push("B");
        }
        report.add_finding(
            FindingCode::SingleSettingNoBellTest,
            format!(
                "side {} ran with a single fixed setting; every inequality test needs \
                 at least two settings per side, so these data admit a common-cause \
                 explanation by construction",
                fixed.join(" and side ")
            ),
        );
    }

    let mut choice_problems: Vec<String> = Vec::new();
    for (own, remote, count) in [
        (Side::A, Side::B, schedule.settings_count_a),
        (Side::B, Side::A, schedule.settings_count_b),
    ] {
        let choices = schedule.events_matching(EventKind::SettingChoice, own);
        if count >= 2 && choices.is_empty() {
            choice_problems.push(format!(
                "side {own:?} claims {count} settings but its schedule has no setting-choice event"
            ));
            continue;
        }
        for choice in choices {
            for outcome in schedule.events_matching(EventKind::Outcome, remote) {
                let class = classify(choice, outcome);
                if class != IntervalClass::Spacelike {
                    choice_problems.push(format!(
                        "choice '{}' is {:?} from remote outcome '{}'",
                        choice.label, class, outcome.label
                    ));
                }
            }
        }
    }
    if !choice_problems.is_empty() {
        report.add_finding(
            FindingCode::ChoiceNotSpacelikeFromRemoteOutcome,
            choice_problems.join("; "),
        );
    }

    let mut outcome_problems: Vec<String> = Vec::new();
    for oa in schedule.events_matching(EventKind::Outcome, Side::A) {
        for ob in schedule.events_matching(EventKind::Outcome, Side::B) {
            let class = classify(oa, ob);
            if class != IntervalClass::Spacelike {
                outcome_problems.push(format!(
                    "outcomes '{}' and '{}' are {:?}",
                    oa.label, ob.label, class
                ));
            }
        }
    }
    if !outcome_problems.is_empty() {
        report.add_finding(
            FindingCode::OutcomesNotSpacelike,
            outcome_problems.join("; "),
        );
    }

    if report.findings.is_empty() {
        report.add_finding(
            FindingCode::Ok,
            "schedule satisfies the causal prerequisites of a Bell test",
        );
    }
    Ok(report)
}
