//! JSON run-configuration schema: stations, events, and simulation settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bellaudit::franson::{FransonConfig, DEFAULT_FIBER_LENGTH, DEFAULT_REFRACTIVE_INDEX};
use bellaudit::spacetime::{Event, EventKind, ExperimentSchedule, Side};
use bellaudit::{Error, Result};

/// Top-level configuration file: one master seed plus optional sections for
/// the causality audit and the interferometer simulation. Unknown keys are
/// rejected so typos fail loudly before any computation starts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolConfig {
    /// Master seed; all simulation randomness derives from it and it is
    /// echoed into every output that consumed it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub franson: Option<FransonSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

/// Spatial layout and timeline of one experimental run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub stations: Vec<StationDef>,
    pub events: Vec<EventDef>,
    /// Number of analyzer settings used on side A over the whole run.
    pub settings_count_a: usize,
    /// Number of analyzer settings used on side B over the whole run.
    pub settings_count_b: usize,
    /// Whether the analysis keeps only a subset of detection events
    /// (coincidence postselection). Flagged by the audit: standard two-setting
    /// Bell bounds do not apply when the kept subensemble can depend on the
    /// local settings.
    #[serde(default)]
    pub inherent_postselection: bool,
}

/// A named location; events reference stations by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationDef {
    pub name: String,
    pub position_m: [f64; 3],
}

/// One timeline entry, placed at a named station.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventDef {
    pub label: String,
    pub kind: EventKind,
    pub side: Side,
    pub station: String,
    pub time_s: f64,
}

/// Interferometer simulation settings. Mirrors the simulator configuration,
/// with explicit units in every key name; each phase list is given in exactly
/// one unit (`*_rad` or `*_deg`, never both).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FransonSection {
    /// Long-short arm imbalance of the analysis interferometers, seconds.
    pub delta_t_s: f64,
    #[serde(default = "default_fiber_length")]
    pub fiber_length_a_m: f64,
    #[serde(default = "default_fiber_length")]
    pub fiber_length_b_m: f64,
    #[serde(default = "default_refractive_index")]
    pub refractive_index: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases_a_rad: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases_a_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases_b_rad: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases_b_deg: Option<Vec<f64>>,
    pub visibility: f64,
    #[serde(default = "default_efficiency")]
    pub detector_efficiency: f64,
    /// Coincidence window, seconds; defaults to half the arm imbalance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coincidence_window_s: Option<f64>,
    pub n_pairs: u64,
}

/// Default file destinations; command-line flags override these.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit_json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fringe_csv: Option<PathBuf>,
}

fn default_fiber_length() -> f64 {
    DEFAULT_FIBER_LENGTH
}

fn default_refractive_index() -> f64 {
    DEFAULT_REFRACTIVE_INDEX
}

fn default_efficiency() -> f64 {
    1.0
}

impl ToolConfig {
    /// Loads and schema-validates a configuration file. Every failure is a
    /// configuration error carrying the file name and, for JSON problems,
    /// the offending line and column.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let config: ToolConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Cheap structural checks that do not need the core types: station
    /// references resolve, phase units are unambiguous.
    pub fn validate(&self) -> Result<()> {
        if let Some(experiment) = &self.experiment {
            experiment.check_station_references()?;
        }
        if let Some(franson) = &self.franson {
            franson.phases_a()?;
            franson.phases_b()?;
        }
        Ok(())
    }

    /// The experiment section, or a configuration error naming what is
    /// missing.
    pub fn experiment(&self) -> Result<&ExperimentSection> {
        self.experiment
            .as_ref()
            .ok_or_else(|| Error::Config("config has no \"experiment\" section".into()))
    }

    /// The franson section, or a configuration error naming what is missing.
    pub fn franson(&self) -> Result<&FransonSection> {
        self.franson
            .as_ref()
            .ok_or_else(|| Error::Config("config has no \"franson\" section".into()))
    }

    /// Output-path defaults (an empty section if none was given).
    pub fn output(&self) -> OutputSection {
        self.output.clone().unwrap_or_default()
    }
}

impl ExperimentSection {
    fn check_station_references(&self) -> Result<()> {
        let mut seen: Vec<&str> = Vec::new();
        for station in &self.stations {
            if seen.contains(&station.name.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate station name {:?}",
                    station.name
                )));
            }
            seen.push(&station.name);
        }
        for event in &self.events {
            if !seen.contains(&event.station.as_str()) {
                return Err(Error::Config(format!(
                    "event {:?} references unknown station {:?}",
                    event.label, event.station
                )));
            }
        }
        Ok(())
    }

    /// Resolves station references and builds the validated schedule.
    pub fn schedule(&self) -> Result<ExperimentSchedule> {
        self.check_station_references()?;
        let events = self
            .events
            .iter()
            .map(|def| {
                let station = self
                    .stations
                    .iter()
                    .find(|s| s.name == def.station)
                    .expect("checked above");
                Event::new(
                    def.label.clone(),
                    def.kind,
                    def.side,
                    station.position_m,
                    def.time_s,
                )
            })
            .collect();
        ExperimentSchedule::new(events, self.settings_count_a, self.settings_count_b)
            .map_err(|e| Error::Config(format!("experiment section: {e}")))
    }
}

impl FransonSection {
    /// Side-A phases in radians, whichever unit the file used.
    pub fn phases_a(&self) -> Result<Vec<f64>> {
        resolve_phases(&self.phases_a_rad, &self.phases_a_deg, "phases_a")
    }

    /// Side-B phases in radians, whichever unit the file used.
    pub fn phases_b(&self) -> Result<Vec<f64>> {
        resolve_phases(&self.phases_b_rad, &self.phases_b_deg, "phases_b")
    }

    /// Builds the simulator configuration, seeding it from `seed` and
    /// revalidating everything.
    pub fn to_franson_config(&self, seed: u64) -> Result<FransonConfig> {
        let config = FransonConfig {
            delta_t: self.delta_t_s,
            fiber_length_a: self.fiber_length_a_m,
            fiber_length_b: self.fiber_length_b_m,
            refractive_index: self.refractive_index,
            phases_a: self.phases_a()?,
            phases_b: self.phases_b()?,
            visibility: self.visibility,
            detector_efficiency: self.detector_efficiency,
            coincidence_window: self.coincidence_window_s.unwrap_or(self.delta_t_s / 2.0),
            n_pairs: self.n_pairs,
            seed,
        };
        config
            .validate()
            .map_err(|e| Error::Config(format!("franson section: {e}")))?;
        Ok(config)
    }
}

fn resolve_phases(rad: &Option<Vec<f64>>, deg: &Option<Vec<f64>>, key: &str) -> Result<Vec<f64>> {
    match (rad, deg) {
        (Some(values), None) => Ok(values.clone()),
        (None, Some(values)) => Ok(values.iter().map(|v| v.to_radians()).collect()),
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "give exactly one of {key}_rad and {key}_deg, not both"
        ))),
        (None, None) => Err(Error::Config(format!(
            "missing phases: give {key}_rad or {key}_deg"
        ))),
    }
}
