//! Node taxonomy and per-node state.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::routing::RoutingMode;

pub type NodeId = u32;

/// A grid coordinate in cell units, `0 <= x, y < side_cells`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }

    /// Euclidean distance between cell centers, in cells.
    pub fn distance(self, other: Cell) -> f64 {
        let dx = self.x.abs_diff(other.x) as u64;
        let dy = self.y.abs_diff(other.y) as u64;
        ((dx * dx + dy * dy) as f64).sqrt()
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeClass {
    Patient,
    Caregiver,
    ClinicalStaff,
    IntermediaryEmployed,
    IntermediaryUnemployed,
    Poi,
    Destination,
}

impl NodeClass {
    /// One-letter tag used in logs and trace files.
    pub fn tag(self) -> char {
        match self {
            NodeClass::Patient => 'A',
            NodeClass::Caregiver => 'C',
            NodeClass::ClinicalStaff => 'S',
            NodeClass::IntermediaryEmployed => 'E',
            NodeClass::IntermediaryUnemployed => 'U',
            NodeClass::Poi => 'P',
            NodeClass::Destination => 'D',
        }
    }

    pub fn is_stationary(self) -> bool {
        matches!(self, NodeClass::Poi | NodeClass::Destination)
    }

    pub fn is_intermediary(self) -> bool {
        matches!(
            self,
            NodeClass::IntermediaryEmployed | NodeClass::IntermediaryUnemployed
        )
    }

    /// Only employed intermediaries and clinical staff have a work location.
    pub fn has_work(self) -> bool {
        matches!(self, NodeClass::IntermediaryEmployed | NodeClass::ClinicalStaff)
    }

    /// Classes that may be flagged Internet-capable.
    pub fn may_be_internet_capable(self) -> bool {
        self.is_intermediary() || self == NodeClass::ClinicalStaff
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConnectivityState {
    InternetAvailable,
    D2DOnly,
}

/// Where a node currently is in its daily routine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MobilityState {
    Home,
    Work,
    Poi,
    /// POIs and destinations never move.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub class: NodeClass,
    pub home_cell: Cell,
    pub work_cell: Option<Cell>,
    pub internet_capable: bool,
    pub radio_range_cells: f64,
    pub current_state: MobilityState,
    pub current_cell: Cell,
    /// Caregivers only.
    pub linked_patient: Option<NodeId>,
    /// Index into the POI list while in the POI state.
    pub current_poi: Option<usize>,
}

impl NodeRecord {
    pub fn connectivity(&self, mode: RoutingMode) -> ConnectivityState {
        if self.class == NodeClass::Destination {
            return ConnectivityState::InternetAvailable;
        }
        match mode {
            RoutingMode::Dtn => ConnectivityState::D2DOnly,
            RoutingMode::Hybrid | RoutingMode::Upn if self.internet_capable => {
                ConnectivityState::InternetAvailable
            }
            _ => ConnectivityState::D2DOnly,
        }
    }
}
