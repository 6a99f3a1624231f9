//! Scenario configuration, derived cardinalities and validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt;
use std::path::Path;

use crate::error::{Result, SimError};
use crate::mobility::MatrixVariant;
use crate::routing::{CaregiverRelay, RoutingMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub side_cells: u32,
    pub cell_size_ft: f64,
}

impl GridSpec {
    pub fn total_cells(&self) -> u64 {
        u64::from(self.side_cells) * u64::from(self.side_cells)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            side_cells: 820,
            cell_size_ft: 10.0,
        }
    }
}

/// Every parameter of one simulation run.
///
/// Missing keys in a JSON document take their default value; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: RoutingMode,
    pub seed: u64,
    pub duration_steps: u32,
    pub step_minutes: u32,
    pub grid: GridSpec,
    pub n_patients: u32,
    pub n_caregivers: u32,
    pub n_clinical_staff: u32,
    pub n_destinations: u32,
    pub n_pois: u32,
    pub participation_ratio: f64,
    pub internet_ratio: f64,
    pub employed_ratio: f64,
    pub adult_population: u32,
    pub range_mean_cells: f64,
    pub range_sd_cells: f64,
    pub caregiver_colocated: bool,
    pub messages_per_patient: u32,
    /// Message lifetime; a message is live while `step - created <= ttl_steps`.
    pub ttl_steps: u32,
    /// Which reading of the built-in transition tables to use.
    pub matrix_variant: MatrixVariant,
    /// Treat POIs as stationary relays instead of bare locations.
    pub poi_relays: bool,
    pub caregiver_relay: CaregiverRelay,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mode: RoutingMode::Hybrid,
            seed: 0,
            duration_steps: 48,
            step_minutes: 30,
            grid: GridSpec::default(),
            n_patients: 10,
            n_caregivers: 10,
            n_clinical_staff: 2,
            n_destinations: 1,
            n_pois: 25,
            participation_ratio: 0.3,
            internet_ratio: 0.2,
            employed_ratio: 0.935,
            adult_population: 400,
            range_mean_cells: 60.0,
            range_sd_cells: 20.0,
            caregiver_colocated: true,
            messages_per_patient: 1,
            ttl_steps: 48,
            matrix_variant: MatrixVariant::AsPrinted,
            poi_relays: false,
            caregiver_relay: CaregiverRelay::Any,
        }
    }
}

/// Round half up. The epsilon absorbs products like `0.35 * 10` landing
/// just below the half.
pub fn round_half_up(x: f64) -> u32 {
    (x + 0.5 + 1e-9).floor().max(0.0) as u32
}

impl ScenarioConfig {
    /// `|I|`: number of participating intermediaries.
    pub fn n_intermediaries(&self) -> u32 {
        round_half_up(self.participation_ratio * f64::from(self.adult_population))
    }

    pub fn n_employed(&self) -> u32 {
        round_half_up(self.employed_ratio * f64::from(self.n_intermediaries()))
    }

    /// Number of intermediary/staff nodes flagged Internet-capable.
    pub fn n_internet_capable(&self) -> u32 {
        let pool = self.n_intermediaries() + self.n_clinical_staff;
        round_half_up(self.internet_ratio * f64::from(pool))
    }

    pub fn n_nodes(&self) -> u32 {
        self.n_patients
            + self.n_caregivers
            + self.n_clinical_staff
            + self.n_intermediaries()
            + self.n_pois
            + self.n_destinations
    }

    pub fn n_messages(&self) -> u32 {
        self.n_patients * self.messages_per_patient
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(s)?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| SimError::ConfigField {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    /// Load a JSON document, apply `key=value` overrides, and deserialize.
    /// Validation is left to the caller.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut value: Value = serde_json::from_str(&text)?;
        apply_overrides(&mut value, overrides)?;
        Self::from_value(value)
    }

    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        apply_overrides(&mut value, overrides)?;
        Self::from_value(value)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse `KEY=VALUE`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| SimError::InvalidConfig(format!("override `{s}` is not KEY=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Apply dotted-key overrides (e.g. `grid.side_cells=100`) to a config
/// document. Keys must name a field of [`ScenarioConfig`].
pub fn apply_overrides(doc: &mut Value, overrides: &[(String, String)]) -> Result<()> {
    let schema = serde_json::to_value(ScenarioConfig::default())?;
    for (key, raw) in overrides {
        let parts: Vec<&str> = key.split('.').collect();
        let mut probe = &schema;
        for p in &parts {
            probe = probe
                .get(p)
                .ok_or_else(|| SimError::UnknownOverride(key.clone()))?;
        }
        let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.clone()));

        let mut slot = &mut *doc;
        for p in &parts[..parts.len() - 1] {
            let obj = slot
                .as_object_mut()
                .ok_or_else(|| SimError::UnknownOverride(key.clone()))?;
            slot = obj
                .entry(p.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
        slot.as_object_mut()
            .ok_or_else(|| SimError::UnknownOverride(key.clone()))?
            .insert(parts[parts.len() - 1].to_string(), parsed);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub severity: Severity,
    pub field: &'static str,
    pub message: String,
}

impl Issue {
    fn error(field: &'static str, message: impl Into<String>) -> Self {
        Issue {
            severity: Severity::Error,
            field,
            message: message.into(),
        }
    }

    fn warning(field: &'static str, message: impl Into<String>) -> Self {
        Issue {
            severity: Severity::Warning,
            field,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.field, self.message)
    }
}

/// Check every config invariant. Ordering violations among node classes are
/// errors; a thin intermediary network (`|I| <= 2|C|`) is a warning.
pub fn validate_config(c: &ScenarioConfig) -> Vec<Issue> {
    let mut out = Vec::new();

    if c.grid.side_cells == 0 {
        out.push(Issue::error("grid.side_cells", "must be positive"));
    }
    if !(c.grid.cell_size_ft.is_finite() && c.grid.cell_size_ft > 0.0) {
        out.push(Issue::error("grid.cell_size_ft", "must be a positive number"));
    }
    if c.step_minutes == 0 {
        out.push(Issue::error("step_minutes", "must be positive"));
    }
    if c.duration_steps == 0 {
        out.push(Issue::error("duration_steps", "must be positive"));
    }
    if !(c.participation_ratio > 0.0 && c.participation_ratio <= 1.0) {
        out.push(Issue::error("participation_ratio", "must lie in (0, 1]"));
    }
    if !(0.0..=1.0).contains(&c.internet_ratio) {
        out.push(Issue::error("internet_ratio", "must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&c.employed_ratio) {
        out.push(Issue::error("employed_ratio", "must lie in [0, 1]"));
    }
    if !(c.range_mean_cells.is_finite() && c.range_mean_cells >= 1.0) {
        out.push(Issue::error("range_mean_cells", "must be at least 1 cell"));
    }
    if !(c.range_sd_cells.is_finite() && c.range_sd_cells >= 0.0) {
        out.push(Issue::error("range_sd_cells", "must be non-negative"));
    }
    if c.n_destinations == 0 {
        out.push(Issue::error("n_destinations", "at least one destination is required"));
    }
    if c.n_pois == 0 {
        out.push(Issue::error("n_pois", "at least one POI is required"));
    }
    if c.n_caregivers > 0 && c.n_patients == 0 {
        out.push(Issue::error("n_caregivers", "caregivers need a patient to attach to"));
    }

    let n_i = c.n_intermediaries();
    if c.participation_ratio > 0.0 && n_i == 0 {
        out.push(Issue::error(
            "participation_ratio",
            format!(
                "derived |I| = round({} x {}) is 0",
                c.participation_ratio, c.adult_population
            ),
        ));
    }

    // |D| <= |S| <= |A| <= |C| <= |I|. With no patients there is nothing to
    // deliver and the A-relative links are vacuous.
    let (d, s, a, cg) = (c.n_destinations, c.n_clinical_staff, c.n_patients, c.n_caregivers);
    let mut broken = Vec::new();
    if d > s {
        broken.push(format!("|D|={d} > |S|={s}"));
    }
    if a > 0 {
        if s > a {
            broken.push(format!("|S|={s} > |A|={a}"));
        }
        if a > cg {
            broken.push(format!("|A|={a} > |C|={cg}"));
        }
    }
    if cg > n_i {
        broken.push(format!("|C|={cg} > |I|={n_i}"));
    }
    if !broken.is_empty() {
        out.push(Issue::error(
            "n_*",
            format!(
                "node-class ordering |D| <= |S| <= |A| <= |C| <= |I| violated: {}",
                broken.join(", ")
            ),
        ));
    } else if cg > 0 && n_i <= 2 * cg {
        out.push(Issue::warning(
            "participation_ratio",
            format!("intermediary network is thin: |I|={n_i} <= 2|C|={}", 2 * cg),
        ));
    }

    let stationary = u64::from(c.n_pois) + u64::from(c.n_destinations);
    if c.grid.side_cells > 0 && stationary > c.grid.total_cells() {
        out.push(Issue::error(
            "grid.side_cells",
            format!(
                "{} cells cannot hold {stationary} distinct stationary nodes",
                c.grid.total_cells()
            ),
        ));
    }

    out
}

/// Validate and fail on the first set of errors, logging warnings.
pub fn ensure_valid(c: &ScenarioConfig) -> Result<Vec<Issue>> {
    let issues = validate_config(c);
    let errors: Vec<String> = issues
        .iter()
        .filter(|i| i.is_error())
        .map(|i| format!("{}: {}", i.field, i.message))
        .collect();
    if !errors.is_empty() {
        return Err(SimError::InvalidConfig(errors.join("; ")));
    }
    Ok(issues)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_clean() {
        let c = ScenarioConfig::default();
        assert_eq!(c.n_intermediaries(), 120);
        assert_eq!(c.n_internet_capable(), 24);
        assert_eq!(c.duration_steps * c.step_minutes, 24 * 60);
        assert!(validate_config(&c).is_empty());
    }

    #[test]
    fn destination_above_staff_is_an_error() {
        let c = ScenarioConfig {
            n_destinations: 2,
            n_clinical_staff: 1,
            ..Default::default()
        };
        let issues = validate_config(&c);
        assert!(issues
            .iter()
            .any(|i| i.is_error() && i.message.contains("ordering")));
    }

    #[test]
    fn thin_intermediary_network_warns() {
        let c = ScenarioConfig {
            participation_ratio: 0.05,
            ..Default::default()
        };
        assert_eq!(c.n_intermediaries(), 20);
        let issues = validate_config(&c);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].severity, Severity::Warning);
        assert!(issues[0].message.contains("|I|=20"));
    }

    #[test]
    fn zero_patients_is_valid() {
        let c = ScenarioConfig {
            n_patients: 0,
            n_caregivers: 0,
            ..Default::default()
        };
        assert!(ensure_valid(&c).is_ok());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(24.4), 24);
        assert_eq!(round_half_up(24.5), 25);
        assert_eq!(round_half_up(0.35 * 10.0), 4);
        assert_eq!(round_half_up(0.935 * 120.0), 112);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ScenarioConfig::from_json_str(r#"{"n_patient": 3}"#).unwrap_err();
        assert!(err.to_string().contains("n_patient"), "{err}");
    }

    #[test]
    fn negative_grid_names_the_field() {
        let err =
            ScenarioConfig::from_json_str(r#"{"grid": {"side_cells": -5, "cell_size_ft": 10}}"#)
                .unwrap_err();
        assert!(err.to_string().contains("grid.side_cells"), "{err}");
    }

    #[test]
    fn overrides_apply_and_reject_unknown() {
        let c = ScenarioConfig::default()
            .with_overrides(&[
                ("grid.side_cells".into(), "100".into()),
                ("mode".into(), "upn".into()),
            ])
            .unwrap();
        assert_eq!(c.grid.side_cells, 100);
        assert_eq!(c.mode, RoutingMode::Upn);
        let err = ScenarioConfig::default()
            .with_overrides(&[("grid.sides".into(), "1".into())])
            .unwrap_err();
        assert!(matches!(err, SimError::UnknownOverride(_)));
    }

    #[test]
    fn json_round_trip() {
        let c = ScenarioConfig::default();
        let back = ScenarioConfig::from_json_str(&c.to_json_pretty()).unwrap();
        assert_eq!(c, back);
    }
}
