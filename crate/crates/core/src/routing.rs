//! Message propagation and delivery rules.
//!
//! * `Dtn` – ideal epidemic flooding; delivery only by reaching a destination
//!   over D2D.
//! * `Hybrid` – the same flooding, but a message also counts as delivered as
//!   soon as any Internet-capable node holds it.
//! * `Upn` – no relaying; the source itself must meet a destination or an
//!   Internet-capable node.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::contact::ContactEvent;
use crate::metrics::MessageOutcome;
use crate::node::{NodeClass, NodeId, NodeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingMode {
    #[serde(alias = "DTN")]
    Dtn,
    #[serde(alias = "Hybrid", alias = "HYBRID")]
    Hybrid,
    #[serde(alias = "UPN")]
    Upn,
}

impl RoutingMode {
    pub const ALL: [RoutingMode; 3] = [RoutingMode::Dtn, RoutingMode::Hybrid, RoutingMode::Upn];

    pub fn as_str(self) -> &'static str {
        match self {
            RoutingMode::Dtn => "dtn",
            RoutingMode::Hybrid => "hybrid",
            RoutingMode::Upn => "upn",
        }
    }

    pub fn relays(self) -> bool {
        !matches!(self, RoutingMode::Upn)
    }
}

impl fmt::Display for RoutingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoutingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dtn" => Ok(RoutingMode::Dtn),
            "hybrid" => Ok(RoutingMode::Hybrid),
            "upn" => Ok(RoutingMode::Upn),
            other => Err(format!("unknown mode `{other}` (expected dtn, hybrid or upn)")),
        }
    }
}

/// Which messages a caregiver is willing to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaregiverRelay {
    #[default]
    Any,
    OwnPatient,
}

/// Dense set of node ids holding a copy of a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarrierSet {
    present: Vec<bool>,
    len: usize,
}

impl CarrierSet {
    pub fn new(n_nodes: usize) -> Self {
        CarrierSet {
            present: vec![false; n_nodes],
            len: 0,
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.present.get(id as usize).copied().unwrap_or(false)
    }

    /// Returns true if `id` was newly added.
    pub fn insert(&mut self, id: NodeId) -> bool {
        let slot = &mut self.present[id as usize];
        if *slot {
            return false;
        }
        *slot = true;
        self.len += 1;
        true
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.present
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(i, _)| i as NodeId)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageRecord {
    pub id: u32,
    pub origin_patient: NodeId,
    pub created_step: u32,
    pub ttl_steps: u32,
    pub carriers: CarrierSet,
    pub delivered: bool,
    pub delivered_step: Option<u32>,
    pub expired: bool,
}

impl MessageRecord {
    pub fn new(id: u32, origin: NodeId, created_step: u32, ttl_steps: u32, n_nodes: usize) -> Self {
        let mut carriers = CarrierSet::new(n_nodes);
        carriers.insert(origin);
        MessageRecord {
            id,
            origin_patient: origin,
            created_step,
            ttl_steps,
            carriers,
            delivered: false,
            delivered_step: None,
            expired: false,
        }
    }

    /// Still eligible for exchange and delivery.
    pub fn is_active(&self) -> bool {
        !self.delivered && !self.expired
    }

    pub fn outcome(&self, step_minutes: u32) -> MessageOutcome {
        MessageOutcome {
            message_id: self.id,
            origin: self.origin_patient,
            created_step: self.created_step,
            delivered: self.delivered,
            delivered_step: self.delivered_step,
            latency_minutes: self
                .delivered_step
                .map(|d| u64::from(d - self.created_step) * u64::from(step_minutes)),
        }
    }
}

/// Per-node facts the routing rules need.
#[derive(Debug, Clone)]
pub struct Roles {
    destination: Vec<bool>,
    internet: Vec<bool>,
    caregiver_of: Vec<Option<NodeId>>,
}

impl Roles {
    pub fn from_nodes(nodes: &[NodeRecord]) -> Self {
        Roles {
            destination: nodes.iter().map(|n| n.class == NodeClass::Destination).collect(),
            internet: nodes
                .iter()
                .map(|n| n.internet_capable || n.class == NodeClass::Destination)
                .collect(),
            caregiver_of: nodes
                .iter()
                .map(|n| match n.class {
                    NodeClass::Caregiver => n.linked_patient,
                    _ => None,
                })
                .collect(),
        }
    }

    pub fn is_destination(&self, id: NodeId) -> bool {
        self.destination[id as usize]
    }

    pub fn is_internet_capable(&self, id: NodeId) -> bool {
        self.internet[id as usize]
    }

    pub fn len(&self) -> usize {
        self.destination.len()
    }

    pub fn is_empty(&self) -> bool {
        self.destination.is_empty()
    }

    fn accepts(&self, id: NodeId, msg: &MessageRecord, policy: CaregiverRelay) -> bool {
        match (policy, self.caregiver_of[id as usize]) {
            (CaregiverRelay::OwnPatient, Some(p)) => p == msg.origin_patient,
            _ => true,
        }
    }
}

/// Copy the message across one contact. In DTN and Hybrid, if exactly one
/// endpoint carries it, the other becomes a carrier; UPN never relays.
/// Returns whether the carrier set grew.
pub fn exchange(msg: &mut MessageRecord, event: &ContactEvent, mode: RoutingMode) -> bool {
    if !mode.relays() || !msg.is_active() {
        return false;
    }
    match (msg.carriers.contains(event.node_a), msg.carriers.contains(event.node_b)) {
        (true, false) => msg.carriers.insert(event.node_b),
        (false, true) => msg.carriers.insert(event.node_a),
        _ => false,
    }
}

fn exchange_with_policy(
    msg: &mut MessageRecord,
    event: &ContactEvent,
    mode: RoutingMode,
    roles: &Roles,
    policy: CaregiverRelay,
) -> bool {
    let receiver = match (msg.carriers.contains(event.node_a), msg.carriers.contains(event.node_b)) {
        (true, false) => event.node_b,
        (false, true) => event.node_a,
        _ => return false,
    };
    if !roles.accepts(receiver, msg, policy) {
        return false;
    }
    exchange(msg, event, mode)
}

/// Decide whether the message is delivered at `step`, given all contacts of
/// the step (after exchanges). Sets `delivered_step` on success.
pub fn check_delivery(
    msg: &mut MessageRecord,
    roles: &Roles,
    events: &[ContactEvent],
    mode: RoutingMode,
    step: u32,
) -> bool {
    if !msg.is_active() {
        return false;
    }
    let reached_destination = || {
        msg.carriers.iter().any(|c| roles.is_destination(c))
            || events.iter().any(|e| {
                (msg.carriers.contains(e.node_a) && roles.is_destination(e.node_b))
                    || (msg.carriers.contains(e.node_b) && roles.is_destination(e.node_a))
            })
    };
    let delivered = match mode {
        RoutingMode::Dtn => reached_destination(),
        RoutingMode::Hybrid => {
            msg.carriers.iter().any(|c| roles.is_internet_capable(c)) || reached_destination()
        }
        RoutingMode::Upn => {
            let origin = msg.origin_patient;
            events
                .iter()
                .filter_map(|e| e.peer(origin))
                .any(|p| roles.is_destination(p) || roles.is_internet_capable(p))
        }
    };
    if delivered {
        msg.delivered = true;
        msg.delivered_step = Some(step);
    }
    delivered
}

/// Mark an undelivered message expired once `step - created_step > ttl_steps`.
pub fn expire(msg: &mut MessageRecord, step: u32) -> bool {
    if msg.delivered || msg.expired {
        return false;
    }
    if step.saturating_sub(msg.created_step) > msg.ttl_steps {
        msg.expired = true;
        return true;
    }
    false
}

/// Routing state of one mode within one run.
#[derive(Debug, Clone)]
pub struct Router {
    pub mode: RoutingMode,
    policy: CaregiverRelay,
    pub messages: Vec<MessageRecord>,
}

impl Router {
    pub fn new(mode: RoutingMode, policy: CaregiverRelay, messages: Vec<MessageRecord>) -> Self {
        Router {
            mode,
            policy,
            messages,
        }
    }

    /// Process one step: expire stale messages, flood copies across the
    /// step's contacts until no carrier set changes, then check delivery.
    pub fn step(&mut self, step: u32, events: &[ContactEvent], roles: &Roles) {
        for msg in &mut self.messages {
            expire(msg, step);
            if !msg.is_active() || step < msg.created_step {
                continue;
            }
            if self.mode.relays() {
                loop {
                    let mut grew = false;
                    for e in events {
                        grew |= exchange_with_policy(msg, e, self.mode, roles, self.policy);
                    }
                    if !grew {
                        break;
                    }
                }
            }
            check_delivery(msg, roles, events, self.mode, step);
        }
    }
}
