//! `opsim` command-line front end.
//!
//! Exit codes: 0 on success, 2 for bad input (unreadable or malformed files,
//! validation failures), 1 for anything else.

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde_json::{json, Value};
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use opsim::config::{apply_overrides, parse_override, validate_config};
use opsim::engine::{run_sweep, SweepAxis, SweepSpec};
use opsim::estimation::{discretize, estimate_matrices, ActivityLog, Aggregation};
use opsim::io::{
    write_contacts_csv, write_json, write_outcomes_csv, write_runs_csv, write_summary_csv,
    SweepManifest,
};
use opsim::metrics::aggregate_seeds;
use opsim::mobility::{default_matrices, normalize_matrix_set, MatrixVariant, PeriodSchedule, TransitionMatrixSet};
use opsim::{RoutingMode, Scenario, ScenarioConfig, SimError};

#[derive(Debug)]
enum Failure {
    Input(String),
    Runtime(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read_input(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {what} {}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn output_error(path: &Path) -> impl Fn(SimError) -> Failure + '_ {
    move |e| Failure::Runtime(format!("writing {}: {e}", path.display()))
}

fn write_json_file(path: &Path, value: &Value) -> CliResult {
    write_json(create(path)?, value).map_err(output_error(path))
}

fn parse_seeds(s: &str) -> Result<RangeInclusive<u64>, String> {
    let parse = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("bad seed `{x}`: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(format!("empty seed range {a}..{b}"));
            }
            Ok(a..=b)
        }
        None => parse(s).map(|a| a..=a),
    }
}

#[derive(Debug, Clone)]
struct ModeList(Vec<RoutingMode>);

fn parse_modes(s: &str) -> Result<ModeList, String> {
    let mut modes = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let m: RoutingMode = part.parse()?;
        if !modes.contains(&m) {
            modes.push(m);
        }
    }
    if modes.is_empty() {
        return Err("no modes given".into());
    }
    Ok(ModeList(modes))
}

#[derive(Parser)]
#[command(name = "opsim", version, about = "Opportunistic patient-message dissemination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario config JSON; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set grid.side_cells=400`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Transition matrix set JSON; built-in matrices when omitted.
    #[arg(long)]
    matrices: Option<PathBuf>,
}

impl ScenarioArgs {
    fn config(&self) -> CliResult<ScenarioConfig> {
        let overrides = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut doc = match &self.config {
            Some(p) => serde_json::from_str::<Value>(&read_input(p, "config")?)
                .map_err(|e| Failure::Input(format!("malformed config {}: {e}", p.display())))?,
            None => serde_json::to_value(ScenarioConfig::default()).expect("config serializes"),
        };
        apply_overrides(&mut doc, &overrides)?;
        Ok(ScenarioConfig::from_value(doc)?)
    }

    fn matrices(&self, config: &ScenarioConfig) -> CliResult<TransitionMatrixSet> {
        match &self.matrices {
            Some(p) => TransitionMatrixSet::from_json_str(&read_input(p, "matrices")?)
                .map_err(|e| Failure::Input(format!("malformed matrices {}: {e}", p.display()))),
            None => Ok(default_matrices(config.matrix_variant)),
        }
    }

    fn scenario(&self) -> CliResult<(ScenarioConfig, TransitionMatrixSet, Scenario)> {
        let config = self.config()?;
        let matrices = self.matrices(&config)?;
        let scenario = Scenario::new(config.clone(), &matrices)?;
        for issue in scenario.warnings() {
            warn!("{issue}");
        }
        for w in scenario.matrix_warnings() {
            warn!("{w}");
        }
        Ok((config, matrices, scenario))
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum AggregationArg {
    Pooled,
    Averaged,
}

#[derive(Copy, Clone, ValueEnum)]
enum VariantArg {
    AsPrinted,
    Corrected,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config (and matrices) without running anything.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run one scenario and write per-message outcomes and metrics.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Routing modes, comma separated; the config's mode when omitted.
        #[arg(long, alias = "modes", value_parser = parse_modes)]
        mode: Option<ModeList>,
        /// Seed or inclusive range `A..B`; the config's seed when omitted.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<RangeInclusive<u64>>,
        /// Also write the contact trace of each seed.
        #[arg(long)]
        contacts: bool,
        #[arg(long, env = "OPSIM_THREADS")]
        threads: Option<usize>,
    },
    /// Sweep patients or participation over seeds and modes.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_parser = |s: &str| s.parse::<SweepAxis>())]
        axis: SweepAxis,
        #[arg(long, alias = "mode", value_parser = parse_modes, default_value = "dtn,hybrid,upn")]
        modes: ModeList,
        #[arg(long, value_parser = parse_seeds, default_value = "0..99")]
        seeds: RangeInclusive<u64>,
        #[arg(long, env = "OPSIM_THREADS")]
        threads: Option<usize>,
    },
    /// Estimate transition matrices from an activity log CSV.
    Estimate {
        /// CSV with columns individual_id,group,start_hhmm,end_hhmm,state.
        log: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        interval_minutes: u32,
        #[arg(long, value_enum, default_value = "pooled")]
        aggregation: AggregationArg,
        /// Period schedule JSON (list of {index,start,end}); the built-in four periods when omitted.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Write the built-in config and matrices.
    ExportDefaults {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "as-printed")]
        variant: VariantArg,
    },
}

fn ensure_dir(out: &Path) -> CliResult {
    fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))
}

fn cmd_validate(args: &ScenarioArgs) -> CliResult {
    let config = args.config()?;
    let issues = validate_config(&config);
    for issue in &issues {
        println!("{issue}");
    }
    let matrices = args.matrices(&config)?;
    let (normalized, warnings) = normalize_matrix_set(&matrices)?;
    for w in &warnings {
        println!("warning: matrices: {w}");
    }
    let errors = issues.iter().filter(|i| i.is_error()).count();
    if errors > 0 {
        return Err(Failure::Input(format!("{errors} validation error(s)")));
    }
    normalized.ensure_complete()?;
    println!("ok: {} nodes, {} messages", config.n_nodes(), config.n_messages());
    Ok(())
}

fn cmd_run(
    args: &ScenarioArgs,
    out: &Path,
    modes: Option<ModeList>,
    seeds: Option<RangeInclusive<u64>>,
    contacts: bool,
    threads: Option<usize>,
) -> CliResult {
    let (config, _, scenario) = args.scenario()?;
    let modes = modes.map(|m| m.0).unwrap_or_else(|| vec![config.mode]);
    let seeds = seeds.unwrap_or(config.seed..=config.seed);
    ensure_dir(out)?;

    let results = scenario.run_seeds(seeds.clone(), &modes, contacts, threads)?;
    for per_mode in &results {
        for r in per_mode {
            let path = out.join(format!("run_{}_s{}.csv", r.mode, r.seed));
            write_outcomes_csv(create(&path)?, r).map_err(output_error(&path))?;
        }
        if contacts {
            let r = &per_mode[0];
            let path = out.join(format!("contacts_s{}.csv", r.seed));
            let trace = r.contacts.as_deref().unwrap_or_default();
            write_contacts_csv(create(&path)?, trace).map_err(output_error(&path))?;
        }
    }

    let reports: Vec<Value> = modes
        .iter()
        .enumerate()
        .map(|(i, &mode)| {
            let per_seed: Vec<_> = results.iter().map(|per_mode| per_mode[i].metrics()).collect();
            json!({ "mode": mode, "report": aggregate_seeds(&per_seed) })
        })
        .collect();
    let metrics = json!({
        "config_digest": scenario.with_seed(*seeds.start()).digest(),
        "seeds": { "first": seeds.start(), "last": seeds.end() },
        "modes": reports,
    });
    write_json_file(&out.join("metrics.json"), &metrics)?;

    for entry in metrics["modes"].as_array().into_iter().flatten() {
        let r = &entry["report"];
        println!(
            "{}: delivered {}/{} (p = {}), mean latency {} min",
            entry["mode"].as_str().unwrap_or("?"),
            r["n_delivered"],
            r["n_generated"],
            r["delivery_probability"],
            r["mean_latency_minutes"]["mean"],
        );
    }
    Ok(())
}

fn cmd_sweep(
    args: &ScenarioArgs,
    out: &Path,
    axis: SweepAxis,
    modes: ModeList,
    seeds: RangeInclusive<u64>,
    threads: Option<usize>,
) -> CliResult {
    let (config, matrices, _) = args.scenario()?;
    ensure_dir(out)?;
    let spec = SweepSpec {
        axis,
        seeds,
        modes: modes.0,
        threads,
    };
    let table = run_sweep(&config, &matrices, &spec)?;

    let path = out.join("summary.csv");
    write_summary_csv(create(&path)?, &table).map_err(output_error(&path))?;
    let path = out.join("runs.csv");
    write_runs_csv(create(&path)?, &table).map_err(output_error(&path))?;
    let manifest = serde_json::to_value(SweepManifest::new(&config, &matrices, &table))
        .map_err(|e| Failure::Runtime(format!("manifest: {e}")))?;
    write_json_file(&out.join("manifest.json"), &manifest)?;
    println!("{} runs, {} summary rows written to {}", table.runs.len(), table.summary.len(), out.display());
    Ok(())
}

fn cmd_estimate(
    log_path: &Path,
    out: &Path,
    interval: u32,
    aggregation: AggregationArg,
    schedule: Option<&Path>,
) -> CliResult {
    let schedule = match schedule {
        Some(p) => serde_json::from_str::<PeriodSchedule>(&read_input(p, "schedule")?)
            .map_err(|e| Failure::Input(format!("malformed schedule {}: {e}", p.display())))?,
        None => PeriodSchedule::default(),
    };
    let file = File::open(log_path)
        .map_err(|e| Failure::Input(format!("cannot read activity log {}: {e}", log_path.display())))?;
    let log = ActivityLog::from_csv(file)?;
    let sequences = discretize(&log, interval)?;
    let aggregation = match aggregation {
        AggregationArg::Pooled => Aggregation::Pooled,
        AggregationArg::Averaged => Aggregation::Averaged,
    };
    let est = estimate_matrices(&sequences, &schedule, aggregation)?;
    for w in &est.warnings {
        warn!("{w}");
    }
    ensure_dir(out)?;
    let path = out.join("matrices.json");
    fs::write(&path, est.matrices.to_json_pretty() + "\n")
        .map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))?;
    println!("{} individuals, matrices written to {}", sequences.len(), path.display());
    Ok(())
}

fn cmd_export_defaults(out: &Path, variant: VariantArg) -> CliResult {
    let variant = match variant {
        VariantArg::AsPrinted => MatrixVariant::AsPrinted,
        VariantArg::Corrected => MatrixVariant::Corrected,
    };
    ensure_dir(out)?;
    let config = ScenarioConfig {
        matrix_variant: variant,
        ..Default::default()
    };
    for (name, body) in [
        ("config.json", config.to_json_pretty()),
        ("matrices.json", default_matrices(variant).to_json_pretty()),
    ] {
        let path = out.join(name);
        fs::write(&path, body + "\n").map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Run {
            scenario,
            out,
            mode,
            seeds,
            contacts,
            threads,
        } => cmd_run(&scenario, &out, mode, seeds, contacts, threads),
        Command::Sweep {
            scenario,
            out,
            axis,
            modes,
            seeds,
            threads,
        } => cmd_sweep(&scenario, &out, axis, modes, seeds, threads),
        Command::Estimate {
            log,
            out,
            interval_minutes,
            aggregation,
            schedule,
        } => cmd_estimate(&log, &out, interval_minutes, aggregation, schedule.as_deref()),
        Command::ExportDefaults { out, variant } => cmd_export_defaults(&out, variant),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Failure::Input(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e @ Failure::Runtime(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
