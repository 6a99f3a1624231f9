//! CSV and JSON outputs.
//!
//! All CSVs are comma-separated with a header row, LF line endings and `.`
//! decimal points. Floats are written in shortest round-trip form, so equal
//! inputs give byte-identical files.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::{Read, Write};

use crate::contact::ContactEvent;
use crate::engine::{GapRow, RunResult, SweepTable};
use crate::error::{Result, SimError};
use crate::metrics::MessageOutcome;
use crate::mobility::TransitionMatrixSet;
use crate::routing::RoutingMode;
use crate::ScenarioConfig;

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const OUTCOME_HEADER: [&str; 8] = [
    "message_id",
    "origin",
    "created_step",
    "delivered",
    "delivered_step",
    "latency_minutes",
    "mode",
    "seed",
];

/// Per-message outcomes of one run.
pub fn write_outcomes_csv<W: Write>(w: W, run: &RunResult) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(OUTCOME_HEADER)?;
    for o in &run.outcomes {
        out.write_record([
            o.message_id.to_string(),
            o.origin.to_string(),
            o.created_step.to_string(),
            o.delivered.to_string(),
            opt(o.delivered_step),
            opt(o.latency_minutes),
            run.mode.to_string(),
            run.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Read back a file written by [`write_outcomes_csv`].
pub fn read_outcomes_csv<R: Read>(r: R) -> Result<Vec<MessageOutcome>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let bad = |what: &str| SimError::CsvRecord {
            line,
            message: format!("bad {what}"),
        };
        let num = |k: usize| -> Option<u64> {
            let f = rec.get(k)?;
            if f.is_empty() {
                None
            } else {
                f.parse().ok()
            }
        };
        out.push(MessageOutcome {
            message_id: num(0).ok_or_else(|| bad("message_id"))? as u32,
            origin: num(1).ok_or_else(|| bad("origin"))? as u32,
            created_step: num(2).ok_or_else(|| bad("created_step"))? as u32,
            delivered: rec.get(3).ok_or_else(|| bad("delivered"))?.parse().map_err(|_| bad("delivered"))?,
            delivered_step: num(4).map(|v| v as u32),
            latency_minutes: num(5),
        });
    }
    Ok(out)
}

pub fn write_contacts_csv<W: Write>(w: W, events: &[ContactEvent]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["step", "node_a", "node_b"])?;
    for e in events {
        out.write_record([e.step.to_string(), e.node_a.to_string(), e.node_b.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "mode",
    "axis_name",
    "axis_value",
    "n_seeds",
    "delivery_mean",
    "delivery_sem",
    "latency_mean_h",
    "latency_sem_h",
    "latency_max_h",
];

/// One row per (axis value, mode).
pub fn write_summary_csv<W: Write>(w: W, table: &SweepTable) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for row in &table.summary {
        let r = &row.report;
        let lat = r.mean_latency_minutes;
        out.write_record([
            row.mode.to_string(),
            row.axis_name.to_string(),
            row.axis_value.to_string(),
            r.n_seeds.to_string(),
            opt(r.delivery.map(|d| d.mean)),
            opt(r.delivery.and_then(|d| d.sem)),
            opt(lat.map(|l| l.mean / 60.0)),
            opt(lat.and_then(|l| l.sem).map(|s| s / 60.0)),
            opt(r.max_latency_minutes.map(|m| m / 60.0)),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per (axis value, seed, mode).
pub fn write_runs_csv<W: Write>(w: W, table: &SweepTable) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "axis_name",
        "axis_value",
        "seed",
        "mode",
        "n_generated",
        "n_delivered",
        "delivery_probability",
        "latency_mean_minutes",
        "latency_max_minutes",
    ])?;
    for run in &table.runs {
        let m = &run.metrics;
        out.write_record([
            table.axis.name().to_string(),
            run.axis_value.to_string(),
            run.seed.to_string(),
            run.mode.to_string(),
            m.n_generated.to_string(),
            m.n_delivered.to_string(),
            opt(m.delivery_probability),
            opt(m.latency.map(|l| l.mean_minutes)),
            opt(m.latency.map(|l| l.max_minutes)),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Content hash in git's object framing (`blob <len>\0<bytes>`), SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Hash of the built-in defaults (config and both matrix variants).
pub fn defaults_hash() -> String {
    use crate::mobility::{default_matrices, MatrixVariant};
    let mut doc = ScenarioConfig::default().to_json_pretty();
    doc.push_str(&default_matrices(MatrixVariant::AsPrinted).to_json_pretty());
    doc.push_str(&default_matrices(MatrixVariant::Corrected).to_json_pretty());
    content_hash(doc.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRange {
    pub first: u64,
    pub last: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanGap {
    pub delivery_absolute: f64,
    pub delivery_relative: Option<f64>,
    pub latency_absolute_minutes: Option<f64>,
    pub latency_relative: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepManifest {
    pub tool: String,
    pub config_digest: String,
    pub matrices_hash: String,
    pub defaults_hash: String,
    pub axis: String,
    pub axis_values: Vec<f64>,
    pub modes: Vec<RoutingMode>,
    pub seeds: SeedRange,
    pub n_runs: usize,
    pub dtn_vs_hybrid: Vec<GapRow>,
    pub dtn_vs_hybrid_mean: Option<MeanGap>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl SweepManifest {
    pub fn new(base: &ScenarioConfig, matrices: &TransitionMatrixSet, table: &SweepTable) -> Self {
        let config_json = serde_json::to_vec(base).expect("config serializes");
        let matrices_json = serde_json::to_vec(matrices).expect("matrices serialize");
        let g = &table.gaps;
        let dtn_vs_hybrid_mean = (!g.is_empty()).then(|| MeanGap {
            delivery_absolute: mean(&g.iter().map(|r| r.delivery.absolute).collect::<Vec<_>>()).unwrap(),
            delivery_relative: mean(&g.iter().filter_map(|r| r.delivery.relative).collect::<Vec<_>>()),
            latency_absolute_minutes: mean(
                &g.iter().filter_map(|r| r.latency.map(|l| l.absolute)).collect::<Vec<_>>(),
            ),
            latency_relative: mean(
                &g.iter().filter_map(|r| r.latency.and_then(|l| l.relative)).collect::<Vec<_>>(),
            ),
        });
        SweepManifest {
            tool: concat!("opsim ", env!("CARGO_PKG_VERSION")).to_string(),
            config_digest: content_hash(&config_json),
            matrices_hash: content_hash(&matrices_json),
            defaults_hash: defaults_hash(),
            axis: table.axis.name().to_string(),
            axis_values: table.axis.values(),
            modes: table.modes.clone(),
            seeds: SeedRange {
                first: *table.seeds.start(),
                last: *table.seeds.end(),
            },
            n_runs: table.runs.len(),
            dtn_vs_hybrid: table.gaps.clone(),
            dtn_vs_hybrid_mean,
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}
