//! Running scenarios: one seed, several routing modes over one shared
//! trace, and parameter sweeps over seeds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::config::{ensure_valid, Issue, ScenarioConfig};
use crate::contact::{contacts_at_step, ContactEvent};
use crate::error::{Result, SimError};
use crate::metrics::{aggregate_seeds, Gap, MessageOutcome, MetricsReport, RunMetrics};
use crate::mobility::{
    default_matrices, initial_state, normalize_matrix_set, place_node, step_state,
    NormalizedMatrixSet, TransitionMatrixSet,
};
use crate::node::{NodeClass, NodeRecord};
use crate::population::{build_population, poi_cells};
use crate::rng::Streams;
use crate::routing::{MessageRecord, Roles, Router, RoutingMode};

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config_digest: String,
    pub seed: u64,
    pub mode: RoutingMode,
    pub step_minutes: u32,
    /// Index of the period the run started in.
    pub start_period: usize,
    pub outcomes: Vec<MessageOutcome>,
    /// Number of contacts at each step `0..=duration_steps`.
    pub contact_counts: Vec<u32>,
    /// Full contact trace, when requested.
    pub contacts: Option<Vec<ContactEvent>>,
    pub wall_clock: Duration,
}

impl RunResult {
    pub fn metrics(&self) -> RunMetrics {
        RunMetrics::from_outcomes(self.seed, &self.outcomes, self.step_minutes)
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        RunResult {
            wall_clock: Duration::ZERO,
            ..self.clone()
        } == RunResult {
            wall_clock: Duration::ZERO,
            ..other.clone()
        }
    }
}

/// A validated configuration bound to a normalized matrix set.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    matrices: NormalizedMatrixSet,
    matrices_digest: String,
    digest: String,
    issues: Vec<Issue>,
    matrix_warnings: Vec<String>,
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn digest(config: &ScenarioConfig, matrices_digest: &str) -> String {
    let config_json = serde_json::to_vec(config).expect("config serializes");
    sha256_hex(&[&config_json, b"\0", matrices_digest.as_bytes()])
}

/// Run `work` on a pool of `threads` workers, or on rayon's global pool.
fn in_pool<T: Send>(threads: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?
            .install(work)),
        None => Ok(work()),
    }
}

impl Scenario {
    pub fn new(config: ScenarioConfig, matrices: &TransitionMatrixSet) -> Result<Self> {
        let issues = ensure_valid(&config)?;
        let (normalized, matrix_warnings) = normalize_matrix_set(matrices)?;
        normalized.ensure_complete()?;
        let matrices_digest = sha256_hex(&[&serde_json::to_vec(matrices)?]);
        let digest = digest(&config, &matrices_digest);
        Ok(Scenario {
            config,
            matrices: normalized,
            matrices_digest,
            digest,
            issues,
            matrix_warnings,
        })
    }

    /// Use the built-in matrices selected by `config.matrix_variant`.
    pub fn with_default_matrices(config: ScenarioConfig) -> Result<Self> {
        let raw = default_matrices(config.matrix_variant);
        Self::new(config, &raw)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn matrices(&self) -> &NormalizedMatrixSet {
        &self.matrices
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Validation warnings (errors are rejected in [`Scenario::new`]).
    pub fn warnings(&self) -> &[Issue] {
        &self.issues
    }

    pub fn matrix_warnings(&self) -> &[String] {
        &self.matrix_warnings
    }

    /// Same scenario under another seed.
    pub fn with_seed(&self, seed: u64) -> Scenario {
        let mut sc = self.clone();
        sc.config.seed = seed;
        sc.digest = digest(&sc.config, &sc.matrices_digest);
        sc
    }

    /// Run each seed of `seeds` with [`Scenario::run_paired`], in seed order.
    pub fn run_seeds(
        &self,
        seeds: RangeInclusive<u64>,
        modes: &[RoutingMode],
        record_contacts: bool,
        threads: Option<usize>,
    ) -> Result<Vec<Vec<RunResult>>> {
        let seeds: Vec<u64> = seeds.collect();
        in_pool(threads, || {
            seeds
                .par_iter()
                .map(|&s| self.with_seed(s).run_paired(modes, record_contacts))
                .collect::<Result<Vec<_>>>()
        })?
    }

    pub fn run(&self) -> Result<RunResult> {
        Ok(self.run_paired(&[self.config.mode], false)?.remove(0))
    }

    /// Simulate mobility and contacts once and apply each mode's routing
    /// rules to that same trace.
    pub fn run_paired(&self, modes: &[RoutingMode], record_contacts: bool) -> Result<Vec<RunResult>> {
        let started = Instant::now();
        let c = &self.config;
        let mut streams = Streams::new(c.seed);
        let mut nodes = build_population(c, &mut streams)?;
        let pois = poi_cells(&nodes);
        let roles = Roles::from_nodes(&nodes);
        let schedule = self.matrices.schedule();

        let start_idx = streams.period_start.random_range(0..schedule.periods.len());
        let start_period = &schedule.periods[start_idx];
        let clock0 = start_period.start.0;

        let messages = make_messages(c, &nodes);
        let mut routers: Vec<Router> = modes
            .iter()
            .map(|&m| Router::new(m, c.caregiver_relay, messages.clone()))
            .collect();

        for node in nodes.iter_mut().filter(|n| !n.class.is_stationary()) {
            let s = initial_state(node.class, start_period.index, &self.matrices, &mut streams.mobility)?;
            place_node(node, s, &pois, &mut streams.poi_choice)?;
        }

        let mut contact_counts = Vec::with_capacity(c.duration_steps as usize + 1);
        let mut trace = record_contacts.then(Vec::new);
        for step in 0..=c.duration_steps {
            if step > 0 {
                let clock = clock0 + (step - 1) * c.step_minutes;
                let period = schedule.period_at(clock);
                for node in nodes.iter_mut().filter(|n| !n.class.is_stationary()) {
                    let s = step_state(node.current_state, node.class, period, &self.matrices, &mut streams.mobility)?;
                    place_node(node, s, &pois, &mut streams.poi_choice)?;
                }
            }
            let events = contacts_at_step(&nodes, step, c.poi_relays);
            contact_counts.push(events.len() as u32);
            for r in &mut routers {
                r.step(step, &events, &roles);
            }
            if let Some(t) = trace.as_mut() {
                t.extend_from_slice(&events);
            }
        }

        let wall_clock = started.elapsed();
        Ok(routers
            .into_iter()
            .map(|r| RunResult {
                config_digest: self.digest.clone(),
                seed: c.seed,
                mode: r.mode,
                step_minutes: c.step_minutes,
                start_period: start_period.index,
                outcomes: r.messages.iter().map(|m| m.outcome(c.step_minutes)).collect(),
                contact_counts: contact_counts.clone(),
                contacts: trace.clone(),
                wall_clock,
            })
            .collect())
    }
}

fn make_messages(c: &ScenarioConfig, nodes: &[NodeRecord]) -> Vec<MessageRecord> {
    let mut out = Vec::new();
    for patient in nodes.iter().filter(|n| n.class == NodeClass::Patient) {
        for _ in 0..c.messages_per_patient {
            out.push(MessageRecord::new(
                out.len() as u32,
                patient.id,
                0,
                c.ttl_steps,
                nodes.len(),
            ));
        }
    }
    out
}

/// Run `config` with the built-in matrices.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunResult> {
    Scenario::with_default_matrices(config.clone())?.run()
}

/// Run several modes over one shared mobility/contact trace.
pub fn run_paired_modes(config: &ScenarioConfig, modes: &[RoutingMode]) -> Result<Vec<RunResult>> {
    Scenario::with_default_matrices(config.clone())?.run_paired(modes, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// 2, 4, ..., 10 patients (caregivers track patients).
    Patients,
    /// 0.1, 0.2, ..., 1.0 of the adult population.
    Participation,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Patients => "patients",
            SweepAxis::Participation => "participation",
        }
    }

    pub fn values(self) -> Vec<f64> {
        match self {
            SweepAxis::Patients => (1..=5).map(|k| f64::from(2 * k)).collect(),
            SweepAxis::Participation => (1..=10).map(|k| f64::from(k) / 10.0).collect(),
        }
    }

    pub fn apply(self, base: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::Patients => {
                c.n_patients = value as u32;
                c.n_caregivers = value as u32;
            }
            SweepAxis::Participation => c.participation_ratio = value,
        }
        c
    }

    /// Value reported for `mode`. Along the participation axis UPN rows are
    /// labelled with the Internet-connected share of the population.
    pub fn reported_value(self, base: &ScenarioConfig, mode: RoutingMode, value: f64) -> f64 {
        match (self, mode) {
            (SweepAxis::Participation, RoutingMode::Upn) => {
                (value * base.internet_ratio * 1e6).round() / 1e6
            }
            _ => value,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "patients" => Ok(SweepAxis::Patients),
            "participation" => Ok(SweepAxis::Participation),
            other => Err(format!("unknown axis `{other}` (expected patients or participation)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub seeds: RangeInclusive<u64>,
    pub modes: Vec<RoutingMode>,
    /// Worker threads; `None` uses rayon's global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub axis_value: f64,
    pub seed: u64,
    pub mode: RoutingMode,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub mode: RoutingMode,
    pub axis_name: &'static str,
    pub axis_value: f64,
    /// The swept value before any per-mode relabelling.
    #[serde(skip)]
    pub swept_value: f64,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub axis_value: f64,
    /// Hybrid minus DTN mean delivery.
    pub delivery: Gap,
    /// DTN minus Hybrid mean latency, relative to DTN.
    pub latency: Option<Gap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub modes: Vec<RoutingMode>,
    pub seeds: RangeInclusive<u64>,
    /// Ordered by (axis value, seed, mode).
    pub runs: Vec<SweepRun>,
    /// Ordered by (axis value, mode).
    pub summary: Vec<SummaryRow>,
    pub gaps: Vec<GapRow>,
}

impl SweepTable {
    pub fn row(&self, mode: RoutingMode, swept_value: f64) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.mode == mode && r.swept_value == swept_value)
    }
}

/// Run every (axis value, seed) pair, all modes sharing one trace per pair.
pub fn run_sweep(
    base: &ScenarioConfig,
    matrices: &TransitionMatrixSet,
    spec: &SweepSpec,
) -> Result<SweepTable> {
    if spec.modes.is_empty() {
        return Err(SimError::InvalidConfig("no routing modes selected".into()));
    }
    let values = spec.axis.values();
    let scenarios: Vec<Scenario> = values
        .iter()
        .map(|&v| Scenario::new(spec.axis.apply(base, v), matrices))
        .collect::<Result<_>>()?;
    let units: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|i| spec.seeds.clone().map(move |s| (i, s)))
        .collect();

    let work = || {
        units
            .par_iter()
            .map(|&(i, seed)| {
                scenarios[i].with_seed(seed).run_paired(&spec.modes, false)
            })
            .collect::<Result<Vec<Vec<RunResult>>>>()
    };
    let results = in_pool(spec.threads, work)??;

    let mut runs = Vec::with_capacity(results.len() * spec.modes.len());
    for (&(i, _), per_mode) in units.iter().zip(&results) {
        for r in per_mode {
            runs.push(SweepRun {
                axis_value: values[i],
                seed: r.seed,
                mode: r.mode,
                metrics: r.metrics(),
            });
        }
    }

    let mut summary = Vec::new();
    for &v in &values {
        for &mode in &spec.modes {
            let per_seed: Vec<RunMetrics> = runs
                .iter()
                .filter(|r| r.axis_value == v && r.mode == mode)
                .map(|r| r.metrics.clone())
                .collect();
            summary.push(SummaryRow {
                mode,
                axis_name: spec.axis.name(),
                axis_value: spec.axis.reported_value(base, mode, v),
                swept_value: v,
                report: aggregate_seeds(&per_seed),
            });
        }
    }

    let mut table = SweepTable {
        axis: spec.axis,
        modes: spec.modes.clone(),
        seeds: spec.seeds.clone(),
        runs,
        summary,
        gaps: Vec::new(),
    };
    if spec.modes.contains(&RoutingMode::Dtn) && spec.modes.contains(&RoutingMode::Hybrid) {
        table.gaps = values
            .iter()
            .filter_map(|&v| {
                let d = table.row(RoutingMode::Dtn, v)?;
                let h = table.row(RoutingMode::Hybrid, v)?;
                let delivery = Gap::between(h.report.delivery?.mean, d.report.delivery?.mean);
                let latency = match (d.report.mean_latency_minutes, h.report.mean_latency_minutes) {
                    (Some(dl), Some(hl)) => Some(Gap::between(dl.mean, hl.mean)),
                    _ => None,
                };
                Some(GapRow {
                    axis_value: v,
                    delivery,
                    latency,
                })
            })
            .collect();
    }
    Ok(table)
}
