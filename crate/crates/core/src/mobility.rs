//! Period-switched Markov mobility over Home / Work / POI.
//!
//! Each mobile node belongs to one of two classification groups and, for the
//! period of the day the step falls in, draws its next activity from that
//! group's 3×3 transition matrix. Stationary classes (POIs, destinations)
//! never move.

use rand::Rng;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Result, SimError};
use crate::node::{Cell, MobilityState, NodeClass, NodeRecord};

pub const MINUTES_PER_DAY: u32 = 24 * 60;
const ROW_SUM_TOLERANCE: f64 = 0.05;

/// DTMC state index: Home = 0, Work = 1, POI = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Activity {
    Home,
    Work,
    Poi,
}

impl Activity {
    pub const ALL: [Activity; 3] = [Activity::Home, Activity::Work, Activity::Poi];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Activity {
        Activity::ALL[i]
    }

    /// Inverse-CDF pick: the first state whose cumulative probability
    /// exceeds `u`. Zero-probability states are never returned.
    pub fn from_cdf(probs: &[f64; 3], u: f64) -> Activity {
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                cum += p;
                last_positive = i;
                if u < cum {
                    return Activity::from_index(i);
                }
            }
        }
        Activity::from_index(last_positive)
    }

    pub fn to_state(self) -> MobilityState {
        match self {
            Activity::Home => MobilityState::Home,
            Activity::Work => MobilityState::Work,
            Activity::Poi => MobilityState::Poi,
        }
    }

    pub fn from_state(s: MobilityState) -> Option<Activity> {
        match s {
            MobilityState::Home => Some(Activity::Home),
            MobilityState::Work => Some(Activity::Work),
            MobilityState::Poi => Some(Activity::Poi),
            MobilityState::Stationary => None,
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activity::Home => "Home",
            Activity::Work => "Work",
            Activity::Poi => "POI",
        })
    }
}

/// Classification groups sharing a transition matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    /// Caregivers, unemployed intermediaries, patients.
    #[serde(rename = "cua")]
    Cua,
    /// Employed intermediaries and clinical staff.
    #[serde(rename = "es")]
    Es,
}

impl Group {
    pub fn of(class: NodeClass) -> Option<Group> {
        match class {
            NodeClass::Caregiver | NodeClass::IntermediaryUnemployed | NodeClass::Patient => {
                Some(Group::Cua)
            }
            NodeClass::IntermediaryEmployed | NodeClass::ClinicalStaff => Some(Group::Es),
            NodeClass::Poi | NodeClass::Destination => None,
        }
    }

    pub fn parse(s: &str) -> Option<Group> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cua" => Some(Group::Cua),
            "es" => Some(Group::Es),
            _ => None,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Cua => "cua",
            Group::Es => "es",
        })
    }
}

/// Minutes after midnight, serialized as `HH:MM`. `24:00` is accepted as an
/// end-of-day marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClockTime(pub u32);

impl ClockTime {
    pub fn parse(s: &str) -> Option<ClockTime> {
        let s = s.trim();
        let (h, m) = match s.split_once(':') {
            Some((h, m)) => (h, m),
            None if s.len() == 4 => s.split_at(2),
            None => return None,
        };
        let h: u32 = h.parse().ok()?;
        let m: u32 = m.parse().ok()?;
        if m >= 60 || h > 24 || (h == 24 && m != 0) {
            return None;
        }
        Some(ClockTime(h * 60 + m))
    }
}

impl fmt::Display for ClockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl Serialize for ClockTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClockTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ClockTime::parse(&s).ok_or_else(|| de::Error::custom(format!("bad clock time `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Period {
    pub index: usize,
    pub start: ClockTime,
    pub end: ClockTime,
}

impl Period {
    fn contains(&self, minute: u32) -> bool {
        let (s, e) = (self.start.0 % MINUTES_PER_DAY, self.end.0 % MINUTES_PER_DAY);
        if s < e {
            (s..e).contains(&minute)
        } else {
            minute >= s || minute < e
        }
    }

    fn len_minutes(&self) -> u32 {
        let (s, e) = (self.start.0 % MINUTES_PER_DAY, self.end.0 % MINUTES_PER_DAY);
        (e + MINUTES_PER_DAY - s) % MINUTES_PER_DAY
    }
}

/// Ordered periods partitioning the 24-hour day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeriodSchedule {
    pub periods: Vec<Period>,
}

impl Default for PeriodSchedule {
    fn default() -> Self {
        let p = |index, start, end| Period {
            index,
            start: ClockTime::parse(start).unwrap(),
            end: ClockTime::parse(end).unwrap(),
        };
        PeriodSchedule {
            periods: vec![
                p(1, "19:00", "06:30"),
                p(2, "06:30", "09:30"),
                p(3, "09:30", "16:30"),
                p(4, "16:30", "19:00"),
            ],
        }
    }
}

impl PeriodSchedule {
    /// A single period covering the whole day.
    pub fn whole_day() -> Self {
        PeriodSchedule {
            periods: vec![Period {
                index: 1,
                start: ClockTime(0),
                end: ClockTime(MINUTES_PER_DAY),
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(SimError::InvalidMatrices("empty period schedule".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.periods {
            if !seen.insert(p.index) {
                return Err(SimError::InvalidMatrices(format!(
                    "duplicate period index {}",
                    p.index
                )));
            }
        }
        if self.periods.len() == 1 {
            let p = &self.periods[0];
            if p.start.0 % MINUTES_PER_DAY != p.end.0 % MINUTES_PER_DAY {
                return Err(SimError::InvalidMatrices(
                    "a single period must span the whole day".into(),
                ));
            }
            return Ok(());
        }
        let total: u32 = self.periods.iter().map(Period::len_minutes).sum();
        if total != MINUTES_PER_DAY {
            return Err(SimError::InvalidMatrices(format!(
                "periods cover {total} minutes, not a full day"
            )));
        }
        for minute in (0..MINUTES_PER_DAY).step_by(1) {
            let n = self.periods.iter().filter(|p| p.contains(minute)).count();
            if n != 1 {
                return Err(SimError::InvalidMatrices(format!(
                    "minute {} is covered by {n} periods",
                    ClockTime(minute)
                )));
            }
        }
        Ok(())
    }

    /// Index of the period containing the wall-clock minute (taken mod 24 h).
    pub fn period_at(&self, minute: u32) -> usize {
        let m = minute % MINUTES_PER_DAY;
        if self.periods.len() == 1 {
            return self.periods[0].index;
        }
        self.periods
            .iter()
            .find(|p| p.contains(m))
            .map(|p| p.index)
            .expect("schedule partitions the day")
    }

    pub fn get(&self, index: usize) -> Option<&Period> {
        self.periods.iter().find(|p| p.index == index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub initial: [f64; 3],
    pub matrix: [[f64; 3]; 3],
}

/// Per-period, per-group initial vectors and transition matrices, as loaded
/// or estimated (not necessarily stochastic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionMatrixSet {
    pub schedule: PeriodSchedule,
    pub periods: BTreeMap<usize, BTreeMap<Group, TransitionEntry>>,
}

impl TransitionMatrixSet {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix set serializes")
    }

    pub fn entry(&self, period: usize, group: Group) -> Option<&TransitionEntry> {
        self.periods.get(&period)?.get(&group)
    }
}

/// Which reading of the built-in tables to use. The printed table has an
/// `{E,S}` late-afternoon Work→POI entry of 0.78 that makes its row sum to
/// 1.702; `Corrected` reads it as 0.078.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixVariant {
    #[default]
    AsPrinted,
    Corrected,
}

/// Built-in matrices derived from time-use survey data, four periods.
pub fn default_matrices(variant: MatrixVariant) -> TransitionMatrixSet {
    let e = |initial: [f64; 3], matrix: [[f64; 3]; 3]| TransitionEntry { initial, matrix };
    let late_work_poi = match variant {
        MatrixVariant::AsPrinted => 0.78,
        MatrixVariant::Corrected => 0.078,
    };
    let table = [
        (
            1,
            e(
                [0.85, 0.0, 0.015],
                [[0.94, 0.0, 0.064], [0.0, 1.0, 0.0], [0.37, 0.0, 0.63]],
            ),
            e(
                [0.70, 0.079, 0.22],
                [[0.85, 0.019, 0.13], [0.14, 0.81, 0.043], [0.39, 0.32, 0.58]],
            ),
        ),
        (
            2,
            e(
                [0.93, 0.0, 0.070],
                [[0.97, 0.0, 0.032], [0.0, 1.0, 0.0], [0.59, 0.0, 0.41]],
            ),
            e(
                [0.71, 0.16, 0.13],
                [[0.86, 0.079, 0.061], [0.17, 0.61, 0.21], [0.51, 0.18, 0.31]],
            ),
        ),
        (
            3,
            e(
                [0.76, 0.0, 0.24],
                [[0.89, 0.0, 0.11], [0.0, 1.0, 0.0], [0.36, 0.0, 0.64]],
            ),
            e(
                [0.50, 0.33, 0.13],
                [[0.80, 0.083, 0.12], [0.063, 0.90, 0.037], [0.30, 0.057, 0.64]],
            ),
        ),
        (
            4,
            e(
                [0.77, 0.0, 0.23],
                [[0.91, 0.0, 0.086], [0.0, 1.0, 0.0], [0.30, 0.0, 0.70]],
            ),
            e(
                [0.48, 0.20, 0.32],
                [
                    [0.80, 0.027, 0.17],
                    [0.042, 0.88, late_work_poi],
                    [0.28, 0.058, 0.66],
                ],
            ),
        ),
    ];
    let periods = table
        .into_iter()
        .map(|(k, cua, es)| (k, BTreeMap::from([(Group::Cua, cua), (Group::Es, es)])))
        .collect();
    TransitionMatrixSet {
        schedule: PeriodSchedule::default(),
        periods,
    }
}

/// A matrix set whose rows and initial vectors are probability vectors.
/// Only obtainable through [`normalize_matrix_set`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrixSet {
    inner: TransitionMatrixSet,
}

impl NormalizedMatrixSet {
    pub fn schedule(&self) -> &PeriodSchedule {
        &self.inner.schedule
    }

    pub fn as_set(&self) -> &TransitionMatrixSet {
        &self.inner
    }

    pub fn entry(&self, period: usize, group: Group) -> Result<&TransitionEntry> {
        let by_group = self
            .inner
            .periods
            .get(&period)
            .ok_or(SimError::UnknownPeriod(period))?;
        by_group.get(&group).ok_or_else(|| {
            SimError::InvalidMatrices(format!("no `{group}` entry for period {period}"))
        })
    }

    /// Every scheduled period has an entry for both groups.
    pub fn ensure_complete(&self) -> Result<()> {
        for p in &self.inner.schedule.periods {
            for g in [Group::Cua, Group::Es] {
                self.entry(p.index, g)?;
            }
        }
        Ok(())
    }
}

fn normalize_vector(v: &mut [f64; 3], what: &str, warnings: &mut Vec<String>) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(SimError::InvalidMatrices(format!(
            "{what} has a negative or non-finite entry: {v:?}"
        )));
    }
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        return Err(SimError::InvalidMatrices(format!("{what} is all zero")));
    }
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        warnings.push(format!("{what} sums to {sum:.4}; rescaled"));
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    Ok(())
}

/// Rescale every row and initial vector to sum to one.
///
/// Returns the normalized set and a warning for each vector whose original
/// sum was off by more than 0.05. Negative entries, all-zero rows, and
/// `{C,U,A}` matrices that can enter Work are rejected.
pub fn normalize_matrix_set(
    raw: &TransitionMatrixSet,
) -> Result<(NormalizedMatrixSet, Vec<String>)> {
    raw.schedule.validate()?;
    let mut set = raw.clone();
    let mut warnings = Vec::new();
    for (period, by_group) in set.periods.iter_mut() {
        if raw.schedule.get(*period).is_none() {
            return Err(SimError::InvalidMatrices(format!(
                "period {period} is not in the schedule"
            )));
        }
        for (group, entry) in by_group.iter_mut() {
            normalize_vector(
                &mut entry.initial,
                &format!("period {period} {group} initial vector"),
                &mut warnings,
            )?;
            for (i, row) in entry.matrix.iter_mut().enumerate() {
                normalize_vector(
                    row,
                    &format!("period {period} {group} row {}", Activity::from_index(i)),
                    &mut warnings,
                )?;
            }
            if *group == Group::Cua {
                let work = Activity::Work.index();
                if entry.initial[work] > 0.0
                    || entry.matrix[Activity::Home.index()][work] > 0.0
                    || entry.matrix[Activity::Poi.index()][work] > 0.0
                {
                    return Err(SimError::InvalidMatrices(format!(
                        "period {period} cua entry allows entering Work"
                    )));
                }
            }
        }
    }
    Ok((NormalizedMatrixSet { inner: set }, warnings))
}

/// Initial activity for a node given a uniform draw `u` in `[0, 1)`.
pub fn initial_state_at(
    class: NodeClass,
    period: usize,
    matrices: &NormalizedMatrixSet,
    u: f64,
) -> Result<MobilityState> {
    let Some(group) = Group::of(class) else {
        return Ok(MobilityState::Stationary);
    };
    let entry = matrices.entry(period, group)?;
    Ok(Activity::from_cdf(&entry.initial, u).to_state())
}

pub fn initial_state<R: Rng + ?Sized>(
    class: NodeClass,
    period: usize,
    matrices: &NormalizedMatrixSet,
    rng: &mut R,
) -> Result<MobilityState> {
    if class.is_stationary() {
        return Ok(MobilityState::Stationary);
    }
    initial_state_at(class, period, matrices, rng.random())
}

/// Next activity given a uniform draw `u` in `[0, 1)`.
pub fn step_state_at(
    current: MobilityState,
    class: NodeClass,
    period: usize,
    matrices: &NormalizedMatrixSet,
    u: f64,
) -> Result<MobilityState> {
    let (Some(group), Some(act)) = (Group::of(class), Activity::from_state(current)) else {
        return Ok(MobilityState::Stationary);
    };
    let entry = matrices.entry(period, group)?;
    Ok(Activity::from_cdf(&entry.matrix[act.index()], u).to_state())
}

pub fn step_state<R: Rng + ?Sized>(
    current: MobilityState,
    class: NodeClass,
    period: usize,
    matrices: &NormalizedMatrixSet,
    rng: &mut R,
) -> Result<MobilityState> {
    if class.is_stationary() {
        return Ok(MobilityState::Stationary);
    }
    step_state_at(current, class, period, matrices, rng.random())
}

/// Move `node` into `new_state` and return its new cell.
///
/// Entering the POI state picks a POI uniformly (`floor(u * |P|)`); staying
/// in it keeps the current POI. One draw is consumed only on entry.
pub fn place_node<R: Rng + ?Sized>(
    node: &mut NodeRecord,
    new_state: MobilityState,
    pois: &[Cell],
    rng: &mut R,
) -> Result<Cell> {
    let cell = match new_state {
        MobilityState::Stationary => node.home_cell,
        MobilityState::Home => node.home_cell,
        MobilityState::Work => node.work_cell.ok_or(SimError::NoWorkCell(node.id))?,
        MobilityState::Poi => {
            let idx = match (node.current_state, node.current_poi) {
                (MobilityState::Poi, Some(i)) => i,
                _ => {
                    let u: f64 = rng.random();
                    ((u * pois.len() as f64) as usize).min(pois.len() - 1)
                }
            };
            node.current_poi = Some(idx);
            pois[idx]
        }
    };
    if new_state != MobilityState::Poi {
        node.current_poi = None;
    }
    node.current_state = new_state;
    node.current_cell = cell;
    Ok(cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::assert_close;

    mod approx_eq {
        macro_rules! assert_close {
            ($a:expr, $b:expr, $tol:expr) => {{
                let (a, b): (f64, f64) = ($a, $b);
                assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
            }};
        }
        pub(crate) use assert_close;
    }

    fn normalized() -> NormalizedMatrixSet {
        normalize_matrix_set(&default_matrices(MatrixVariant::AsPrinted))
            .unwrap()
            .0
    }

    #[test]
    fn default_schedule_partitions_day() {
        let s = PeriodSchedule::default();
        s.validate().unwrap();
        assert_eq!(s.period_at(0), 1);
        assert_eq!(s.period_at(6 * 60 + 29), 1);
        assert_eq!(s.period_at(6 * 60 + 30), 2);
        assert_eq!(s.period_at(9 * 60 + 30), 3);
        assert_eq!(s.period_at(16 * 60 + 30), 4);
        assert_eq!(s.period_at(19 * 60), 1);
        assert_eq!(s.period_at(MINUTES_PER_DAY + 7 * 60), 2);
    }

    #[test]
    fn overlapping_schedule_rejected() {
        let mut s = PeriodSchedule::default();
        s.periods[1].end = ClockTime::parse("10:00").unwrap();
        assert!(s.validate().is_err());
    }

    #[test]
    fn normalizes_es_late_row() {
        let (m, warnings) = normalize_matrix_set(&default_matrices(MatrixVariant::AsPrinted)).unwrap();
        let row = m.entry(4, Group::Es).unwrap().matrix[1];
        assert_close!(row[0], 0.042 / 1.702, 1e-12);
        assert_close!(row[0], 0.02468, 5e-6);
        assert_close!(row[1], 0.51704, 5e-6);
        assert_close!(row[2], 0.45828, 5e-6);
        assert!(warnings.iter().any(|w| w.contains("period 4 es row Work")));

        let init = m.entry(1, Group::Cua).unwrap().initial;
        assert_close!(init[0], 0.98266, 5e-6);
        assert_eq!(init[1], 0.0);
        assert_close!(init[2], 0.01734, 5e-6);
        assert!(warnings.iter().any(|w| w.contains("period 1 cua initial")));
    }

    #[test]
    fn all_rows_stochastic_after_normalization() {
        for variant in [MatrixVariant::AsPrinted, MatrixVariant::Corrected] {
            let (m, _) = normalize_matrix_set(&default_matrices(variant)).unwrap();
            m.ensure_complete().unwrap();
            for by_group in m.as_set().periods.values() {
                for e in by_group.values() {
                    assert!((e.initial.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    for row in &e.matrix {
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                        assert!(row.iter().all(|&x| x >= 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn identity_unchanged_without_warning() {
        let mut raw = default_matrices(MatrixVariant::AsPrinted);
        for by_group in raw.periods.values_mut() {
            for e in by_group.values_mut() {
                e.initial = [1.0, 0.0, 0.0];
                e.matrix = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            }
        }
        let (m, warnings) = normalize_matrix_set(&raw).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(m.as_set(), &raw);
    }

    #[test]
    fn rejects_bad_rows() {
        let mut raw = default_matrices(MatrixVariant::AsPrinted);
        raw.periods.get_mut(&2).unwrap().get_mut(&Group::Es).unwrap().matrix[0] = [0.0; 3];
        assert!(normalize_matrix_set(&raw).is_err());

        let mut raw = default_matrices(MatrixVariant::AsPrinted);
        raw.periods.get_mut(&2).unwrap().get_mut(&Group::Es).unwrap().matrix[0][1] = -0.1;
        assert!(normalize_matrix_set(&raw).is_err());

        let mut raw = default_matrices(MatrixVariant::AsPrinted);
        raw.periods.get_mut(&3).unwrap().get_mut(&Group::Cua).unwrap().matrix[0][1] = 0.2;
        assert!(normalize_matrix_set(&raw).is_err());
    }

    #[test]
    fn corrected_variant_is_nearly_stochastic() {
        let (_, warnings) = normalize_matrix_set(&default_matrices(MatrixVariant::Corrected)).unwrap();
        assert!(!warnings.iter().any(|w| w.contains("period 4 es row Work")));
    }

    #[test]
    fn initial_state_examples() {
        let m = normalized();
        assert_eq!(
            initial_state_at(NodeClass::ClinicalStaff, 3, &m, 0.40).unwrap(),
            MobilityState::Home
        );
        assert_eq!(
            initial_state_at(NodeClass::Caregiver, 2, &m, 0.999).unwrap(),
            MobilityState::Poi
        );
        assert_eq!(
            initial_state_at(NodeClass::Destination, 2, &m, 0.5).unwrap(),
            MobilityState::Stationary
        );
        assert!(matches!(
            initial_state_at(NodeClass::Patient, 9, &m, 0.5),
            Err(SimError::UnknownPeriod(9))
        ));
        assert_eq!(Activity::from_cdf(&[1.0, 0.0, 0.0], 0.999_999), Activity::Home);
    }

    #[test]
    fn step_state_examples() {
        let m = normalized();
        let row = m.entry(2, Group::Cua).unwrap().matrix[0];
        assert_close!(row[0], 0.96806, 5e-6);
        assert_close!(row[2], 0.03194, 5e-6);
        assert_eq!(
            step_state_at(MobilityState::Home, NodeClass::Patient, 2, &m, 0.99).unwrap(),
            MobilityState::Poi
        );
        assert_eq!(
            step_state_at(MobilityState::Home, NodeClass::Patient, 2, &m, 0.5).unwrap(),
            MobilityState::Home
        );
        let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for u in [0.0, 0.3, 0.999] {
            assert_eq!(Activity::from_cdf(&identity[1], u), Activity::Work);
        }
    }

    #[test]
    fn cua_never_enters_work() {
        let m = normalized();
        let mut rng = crate::rng::derive_stream(1, crate::rng::StreamName::Mobility);
        for period in 1..=4 {
            let mut s = MobilityState::Home;
            for _ in 0..2000 {
                s = step_state(s, NodeClass::Caregiver, period, &m, &mut rng).unwrap();
                assert_ne!(s, MobilityState::Work);
            }
        }
    }

    fn node(class: NodeClass) -> NodeRecord {
        NodeRecord {
            id: 3,
            class,
            home_cell: Cell::new(1, 2),
            work_cell: class.has_work().then_some(Cell::new(50, 60)),
            internet_capable: false,
            radio_range_cells: 60.0,
            current_state: MobilityState::Home,
            current_cell: Cell::new(1, 2),
            linked_patient: None,
            current_poi: None,
        }
    }

    #[test]
    fn place_node_examples() {
        let pois: Vec<Cell> = (0..25).map(|i| Cell::new(i * 10, 0)).collect();
        let mut rng = Uniforms(vec![]);

        let mut e = node(NodeClass::IntermediaryEmployed);
        assert_eq!(place_node(&mut e, MobilityState::Work, &pois, &mut rng).unwrap(), Cell::new(50, 60));

        let mut p = node(NodeClass::Patient);
        assert_eq!(place_node(&mut p, MobilityState::Home, &pois, &mut rng).unwrap(), Cell::new(1, 2));
        assert!(matches!(
            place_node(&mut p, MobilityState::Work, &pois, &mut rng),
            Err(SimError::NoWorkCell(3))
        ));
    }

    /// Draws a fixed sequence of uniforms.
    struct Uniforms(Vec<f64>);

    impl rand::RngCore for Uniforms {
        fn next_u32(&mut self) -> u32 {
            (self.next_u64() >> 32) as u32
        }
        fn next_u64(&mut self) -> u64 {
            // rand's f64 sampling keeps the top 53 bits
            let u = self.0.remove(0);
            ((u * (1u64 << 53) as f64) as u64) << 11
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            rand::rand_core::impls::fill_bytes_via_next(self, dst)
        }
    }

    #[test]
    fn poi_choice_on_entry_only() {
        let pois: Vec<Cell> = (0..25).map(|i| Cell::new(i * 10, 0)).collect();
        let mut c = node(NodeClass::Caregiver);
        let mut rng = Uniforms(vec![0.041, 0.9]);
        assert_eq!(place_node(&mut c, MobilityState::Poi, &pois, &mut rng).unwrap(), pois[1]);
        // staying put keeps the POI and consumes nothing
        assert_eq!(place_node(&mut c, MobilityState::Poi, &pois, &mut rng).unwrap(), pois[1]);
        assert_eq!(rng.0.len(), 1);
        place_node(&mut c, MobilityState::Home, &pois, &mut rng).unwrap();
        assert_eq!(c.current_poi, None);
        assert_eq!(place_node(&mut c, MobilityState::Poi, &pois, &mut rng).unwrap(), pois[22]);
    }

    #[test]
    fn matrix_json_round_trip() {
        let raw = default_matrices(MatrixVariant::AsPrinted);
        let back = TransitionMatrixSet::from_json_str(&raw.to_json_pretty()).unwrap();
        assert_eq!(raw, back);
        assert_eq!(raw.schedule.periods[0].start.to_string(), "19:00");
    }
}
