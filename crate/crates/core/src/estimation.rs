//! Estimating period transition matrices from timestamped activity logs.
//!
//! Logs are discretized into fixed intervals (each interval takes the state
//! occupied at its start), then transitions are counted per period and
//! classification group and row-normalized.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{Result, SimError};
use crate::mobility::{
    Activity, ClockTime, Group, PeriodSchedule, TransitionEntry, TransitionMatrixSet,
    MINUTES_PER_DAY,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityRecord {
    /// Source line, for error messages (0 when synthesized).
    pub line: u64,
    pub start: ClockTime,
    pub end: ClockTime,
    pub state: Activity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Individual {
    pub id: String,
    pub group: Group,
    /// Sorted by start time, non-overlapping.
    pub records: Vec<ActivityRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActivityLog {
    pub individuals: Vec<Individual>,
}

fn parse_state(s: &str) -> Option<Activity> {
    match s.trim().to_ascii_lowercase().as_str() {
        "home" => Some(Activity::Home),
        "work" => Some(Activity::Work),
        "poi" => Some(Activity::Poi),
        _ => None,
    }
}

impl ActivityLog {
    /// Read `individual_id,group,start_hhmm,end_hhmm,state` rows.
    ///
    /// Rejects malformed fields, records that end before they start,
    /// individuals listed under two groups, and overlapping records, citing
    /// the offending line.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut by_id: BTreeMap<String, (Group, Vec<ActivityRecord>)> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let err = |message: String| SimError::ActivityLog { line, message };
            if rec.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", rec.len())));
            }
            let id = rec[0].to_string();
            let group = Group::parse(&rec[1])
                .ok_or_else(|| err(format!("unknown group `{}` (expected cua or es)", &rec[1])))?;
            let start = ClockTime::parse(&rec[2]).ok_or_else(|| err(format!("bad start time `{}`", &rec[2])))?;
            let end = ClockTime::parse(&rec[3]).ok_or_else(|| err(format!("bad end time `{}`", &rec[3])))?;
            let state = parse_state(&rec[4])
                .ok_or_else(|| err(format!("unknown state `{}` (expected home, work or poi)", &rec[4])))?;
            if end <= start {
                return Err(err(format!("record ends ({end}) before it starts ({start})")));
            }
            let entry = by_id.entry(id.clone()).or_insert_with(|| (group, Vec::new()));
            if entry.0 != group {
                return Err(err(format!("individual `{id}` listed under groups {} and {group}", entry.0)));
            }
            entry.1.push(ActivityRecord { line, start, end, state });
        }

        let mut individuals = Vec::with_capacity(by_id.len());
        for (id, (group, mut records)) in by_id {
            records.sort_by_key(|r| (r.start, r.line));
            for w in records.windows(2) {
                if w[1].start < w[0].end {
                    return Err(SimError::ActivityLog {
                        line: w[1].line,
                        message: format!(
                            "record {}-{} for `{id}` overlaps line {} ({}-{})",
                            w[1].start, w[1].end, w[0].line, w[0].start, w[0].end
                        ),
                    });
                }
            }
            individuals.push(Individual { id, group, records });
        }
        Ok(ActivityLog { individuals })
    }
}

/// One state per interval of the day; `None` outside the observation window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSequence {
    pub individual: String,
    pub group: Group,
    pub interval_minutes: u32,
    pub states: Vec<Option<Activity>>,
}

fn check_interval(interval_minutes: u32) -> Result<usize> {
    if interval_minutes == 0 || MINUTES_PER_DAY % interval_minutes != 0 {
        return Err(SimError::InvalidConfig(format!(
            "interval of {interval_minutes} minutes does not divide 24 h"
        )));
    }
    Ok((MINUTES_PER_DAY / interval_minutes) as usize)
}

/// Discretize each individual's records; each interval reports the state
/// held at the interval's start. Gaps between records are rejected.
pub fn discretize(log: &ActivityLog, interval_minutes: u32) -> Result<Vec<StateSequence>> {
    let n = check_interval(interval_minutes)?;
    let mut out = Vec::with_capacity(log.individuals.len());
    for ind in &log.individuals {
        for w in ind.records.windows(2) {
            if w[1].start > w[0].end {
                return Err(SimError::CoverageGap {
                    individual: ind.id.clone(),
                    from: w[0].end.to_string(),
                    to: w[1].start.to_string(),
                });
            }
            if w[1].start < w[0].end {
                return Err(SimError::ActivityLog {
                    line: w[1].line,
                    message: format!("overlaps line {}", w[0].line),
                });
            }
        }
        let mut states = vec![None; n];
        for r in &ind.records {
            let first = r.start.0.div_ceil(interval_minutes);
            let mut i = first;
            while i * interval_minutes < r.end.0 && (i as usize) < n {
                states[i as usize] = Some(r.state);
                i += 1;
            }
        }
        out.push(StateSequence {
            individual: ind.id.clone(),
            group: ind.group,
            interval_minutes,
            states,
        });
    }
    Ok(out)
}

/// Build a minimal record list reproducing `seq` under [`discretize`].
pub fn synthesize(seq: &StateSequence) -> Individual {
    let iv = seq.interval_minutes;
    let mut records: Vec<ActivityRecord> = Vec::new();
    for (i, s) in seq.states.iter().enumerate() {
        let Some(state) = *s else { continue };
        let start = ClockTime(i as u32 * iv);
        let end = ClockTime((i as u32 + 1) * iv);
        match records.last_mut() {
            Some(last) if last.state == state && last.end == start => last.end = end,
            _ => records.push(ActivityRecord { line: 0, start, end, state }),
        }
    }
    Individual {
        id: seq.individual.clone(),
        group: seq.group,
        records,
    }
}

/// How per-individual transitions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Pool transition counts across individuals, then normalize.
    #[default]
    Pooled,
    /// Normalize each individual's counts, then average the matrices.
    Averaged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub matrices: TransitionMatrixSet,
    pub warnings: Vec<String>,
}

type Counts = [[f64; 3]; 3];

fn first_interval_of(period_start: u32, interval: u32, n: usize) -> usize {
    (period_start.div_ceil(interval) as usize) % n
}

/// Estimate initial vectors and transition matrices for every
/// (period, group) cell of `schedule`.
///
/// Transitions are attributed to the period of their source interval.
/// Rows with no observations fall back to identity; groups with no
/// individuals are left out with a warning.
pub fn estimate_matrices(
    sequences: &[StateSequence],
    schedule: &PeriodSchedule,
    aggregation: Aggregation,
) -> Result<Estimate> {
    schedule.validate()?;
    let mut warnings = Vec::new();
    let Some(interval) = sequences.first().map(|s| s.interval_minutes) else {
        warnings.push("no individuals in log".to_string());
        return Ok(Estimate {
            matrices: TransitionMatrixSet {
                schedule: schedule.clone(),
                periods: BTreeMap::new(),
            },
            warnings,
        });
    };
    let n = check_interval(interval)?;
    if sequences.iter().any(|s| s.interval_minutes != interval || s.states.len() != n) {
        return Err(SimError::InvalidConfig("sequences use different intervals".into()));
    }
    let period_of: Vec<usize> = (0..n)
        .map(|i| schedule.period_at(i as u32 * interval))
        .collect();

    let mut periods: BTreeMap<usize, BTreeMap<Group, TransitionEntry>> = BTreeMap::new();
    for group in [Group::Cua, Group::Es] {
        let members: Vec<&StateSequence> = sequences.iter().filter(|s| s.group == group).collect();
        if members.is_empty() {
            warnings.push(format!("group {group} has no individuals; its entries are omitted"));
            continue;
        }
        for period in &schedule.periods {
            let k = period.index;
            let individual_counts: Vec<Counts> = members
                .iter()
                .map(|s| {
                    let mut c = [[0.0; 3]; 3];
                    for i in 0..n - 1 {
                        if period_of[i] != k {
                            continue;
                        }
                        if let (Some(a), Some(b)) = (s.states[i], s.states[i + 1]) {
                            c[a.index()][b.index()] += 1.0;
                        }
                    }
                    c
                })
                .collect();

            let mut matrix = [[0.0; 3]; 3];
            for from in 0..3 {
                let row = match aggregation {
                    Aggregation::Pooled => {
                        let mut row = [0.0; 3];
                        for c in &individual_counts {
                            for to in 0..3 {
                                row[to] += c[from][to];
                            }
                        }
                        let total: f64 = row.iter().sum();
                        (total > 0.0).then(|| row.map(|x| x / total))
                    }
                    Aggregation::Averaged => {
                        let rows: Vec<[f64; 3]> = individual_counts
                            .iter()
                            .filter_map(|c| {
                                let total: f64 = c[from].iter().sum();
                                (total > 0.0).then(|| c[from].map(|x| x / total))
                            })
                            .collect();
                        (!rows.is_empty()).then(|| {
                            let mut avg = [0.0; 3];
                            for r in &rows {
                                for to in 0..3 {
                                    avg[to] += r[to] / rows.len() as f64;
                                }
                            }
                            avg
                        })
                    }
                };
                matrix[from] = row.unwrap_or_else(|| {
                    warnings.push(format!(
                        "period {k} {group}: no transitions out of {}; using identity row",
                        Activity::from_index(from)
                    ));
                    let mut id = [0.0; 3];
                    id[from] = 1.0;
                    id
                });
            }

            let i0 = first_interval_of(period.start.0 % MINUTES_PER_DAY, interval, n);
            let mut occupancy = [0.0; 3];
            for s in &members {
                if let Some(a) = s.states[i0] {
                    occupancy[a.index()] += 1.0;
                }
            }
            let total: f64 = occupancy.iter().sum();
            let initial = if total > 0.0 {
                occupancy.map(|x| x / total)
            } else {
                warnings.push(format!(
                    "period {k} {group}: nobody observed at {}; initial vector set to Home",
                    ClockTime(i0 as u32 * interval)
                ));
                [1.0, 0.0, 0.0]
            };

            if group == Group::Cua
                && (initial[Activity::Work.index()] > 0.0
                    || matrix[Activity::Home.index()][Activity::Work.index()] > 0.0
                    || matrix[Activity::Poi.index()][Activity::Work.index()] > 0.0)
            {
                warnings.push(format!(
                    "period {k} cua: Work observed; the simulator rejects cua matrices that enter Work"
                ));
            }
            periods
                .entry(k)
                .or_default()
                .insert(group, TransitionEntry { initial, matrix });
        }
    }

    Ok(Estimate {
        matrices: TransitionMatrixSet {
            schedule: schedule.clone(),
            periods,
        },
        warnings,
    })
}
