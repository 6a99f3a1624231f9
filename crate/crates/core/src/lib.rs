//! Discrete-time Monte-Carlo simulator for delivering patient-monitoring
//! messages over a hybrid network: device-to-device store-carry-forward
//! relaying between people, plus offload through intermittently
//! Internet-connected participants.
//!
//! The pipeline for one run:
//!
//! 1. [`population::build_population`] places patients, caregivers, clinical
//!    staff, intermediaries, points of interest and the destination on an
//!    `M × M` cell grid.
//! 2. Every step, mobile nodes move between Home / Work / POI following a
//!    period-switched Markov chain ([`mobility`]).
//! 3. [`contact::contacts_at_step`] finds all pairs within radio range.
//! 4. [`routing`] spreads message copies epidemically and decides delivery
//!    for the DTN, Hybrid and UPN configurations.
//! 5. [`metrics`] reduces message outcomes to delivery probability and
//!    latency statistics, aggregated across seeds.
//!
//! [`engine`] ties the steps together and runs seed/parameter sweeps;
//! [`estimation`] derives transition matrices from activity logs.

pub mod config;
pub mod contact;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod io;
pub mod metrics;
pub mod mobility;
pub mod node;
pub mod population;
pub mod rng;
pub mod routing;

pub use config::{GridSpec, Issue, ScenarioConfig, Severity};
pub use engine::{run_paired_modes, run_scenario, RunResult, Scenario};
pub use error::{Result, SimError};
pub use metrics::{MessageOutcome, MetricsReport, RunMetrics};
pub use mobility::{NormalizedMatrixSet, TransitionMatrixSet};
pub use node::{Cell, NodeClass, NodeRecord};
pub use routing::RoutingMode;
