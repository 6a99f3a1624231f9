//! Device-to-device contact detection under a circular-range model.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::node::{Cell, NodeClass, NodeId, NodeRecord};

/// One unordered contact, stored with `node_a < node_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContactEvent {
    pub step: u32,
    pub node_a: NodeId,
    pub node_b: NodeId,
}

impl ContactEvent {
    pub fn new(step: u32, a: NodeId, b: NodeId) -> Self {
        debug_assert_ne!(a, b);
        ContactEvent {
            step,
            node_a: a.min(b),
            node_b: a.max(b),
        }
    }

    pub fn involves(&self, id: NodeId) -> bool {
        self.node_a == id || self.node_b == id
    }

    /// The other endpoint, if `id` is one of them.
    pub fn peer(&self, id: NodeId) -> Option<NodeId> {
        if self.node_a == id {
            Some(self.node_b)
        } else if self.node_b == id {
            Some(self.node_a)
        } else {
            None
        }
    }
}

/// Two nodes are in contact when the distance between their cell centers is
/// within the shorter of the two radio ranges.
pub fn in_contact(cell_a: Cell, cell_b: Cell, range_a: f64, range_b: f64) -> bool {
    cell_a.distance(cell_b) <= range_a.min(range_b)
}

/// A node as seen by the contact detector.
#[derive(Debug, Clone, Copy)]
pub struct Radio {
    pub id: NodeId,
    pub cell: Cell,
    pub range: f64,
}

/// Radios that take part in D2D exchange. POIs are bare locations unless
/// `poi_relays` is set.
pub fn radios(nodes: &[NodeRecord], poi_relays: bool) -> Vec<Radio> {
    nodes
        .iter()
        .filter(|n| poi_relays || n.class != NodeClass::Poi)
        .map(|n| Radio {
            id: n.id,
            cell: n.current_cell,
            range: n.radio_range_cells,
        })
        .collect()
}

/// All contacts among `radios`, sorted by `(node_a, node_b)`.
///
/// Radios are bucketed on a square lattice whose pitch is the largest range,
/// so only the 3×3 block of buckets around each radio can hold a partner.
pub fn find_contacts(radios: &[Radio], step: u32) -> Vec<ContactEvent> {
    let Some(max_range) = radios.iter().map(|r| r.range).reduce(f64::max) else {
        return Vec::new();
    };
    let pitch = max_range.ceil().max(1.0) as u32;

    let mut buckets: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (i, r) in radios.iter().enumerate() {
        buckets
            .entry((r.cell.x / pitch, r.cell.y / pitch))
            .or_default()
            .push(i);
    }

    // Forward half-neighbourhood so each bucket pair is visited once.
    const FORWARD: [(i64, i64); 4] = [(1, -1), (1, 0), (1, 1), (0, 1)];
    let mut out = Vec::new();
    let mut check = |i: usize, j: usize| {
        let (a, b) = (&radios[i], &radios[j]);
        if in_contact(a.cell, b.cell, a.range, b.range) {
            out.push(ContactEvent::new(step, a.id, b.id));
        }
    };
    for (&(bx, by), members) in &buckets {
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                check(i, j);
            }
        }
        for (dx, dy) in FORWARD {
            let (nx, ny) = (bx as i64 + dx, by as i64 + dy);
            if nx < 0 || ny < 0 {
                continue;
            }
            if let Some(others) = buckets.get(&(nx as u32, ny as u32)) {
                for &i in members {
                    for &j in others {
                        check(i, j);
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Contacts among the current placements of `nodes`.
pub fn contacts_at_step(nodes: &[NodeRecord], step: u32, poi_relays: bool) -> Vec<ContactEvent> {
    find_contacts(&radios(nodes, poi_relays), step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(radios: &[Radio], step: u32) -> Vec<ContactEvent> {
        let mut out = Vec::new();
        for i in 0..radios.len() {
            for j in i + 1..radios.len() {
                let (a, b) = (radios[i], radios[j]);
                let d = (((a.cell.x as f64) - (b.cell.x as f64)).powi(2)
                    + ((a.cell.y as f64) - (b.cell.y as f64)).powi(2))
                .sqrt();
                if d <= a.range.min(b.range) {
                    out.push(ContactEvent::new(step, a.id, b.id));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn in_contact_examples() {
        let (a, b) = (Cell::new(100, 100), Cell::new(100, 140));
        assert!(in_contact(a, b, 60.0, 60.0));
        assert!(!in_contact(a, b, 35.0, 60.0));
        assert!(in_contact(a, a, 1.0, 1.0));
        assert!(in_contact(a, b, 40.0, 40.0));
    }

    #[test]
    fn triangle_and_isolated() {
        let r = |id, x, y| Radio {
            id,
            cell: Cell::new(x, y),
            range: 10.0,
        };
        let tri = [r(0, 0, 0), r(1, 5, 0), r(2, 0, 5)];
        assert_eq!(find_contacts(&tri, 3).len(), 3);
        let far = [r(0, 0, 0), r(1, 100, 0), r(2, 0, 100)];
        assert!(find_contacts(&far, 3).is_empty());
        assert!(find_contacts(&[], 0).is_empty());
    }

    #[test]
    fn dense_uniform_matches_brute_force() {
        use rand::Rng;
        let mut rng = crate::rng::derive_stream(99, crate::rng::StreamName::Placement);
        let radios: Vec<Radio> = (0..400)
            .map(|id| Radio {
                id,
                cell: Cell::new(rng.random_range(0..820), rng.random_range(0..820)),
                range: crate::population::sample_range(&mut rng, 60.0, 20.0),
            })
            .collect();
        let fast = find_contacts(&radios, 0);
        assert!(!fast.is_empty());
        assert_eq!(fast, brute_force(&radios, 0));
    }

    fn arb_radios() -> impl Strategy<Value = Vec<Radio>> {
        prop::collection::vec((0u32..300, 0u32..300, 1.0f64..80.0), 0..200).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (x, y, range))| Radio {
                    id: i as NodeId,
                    cell: Cell::new(x, y),
                    range,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn symmetric(ax in 0u32..1000, ay in 0u32..1000, bx in 0u32..1000, by in 0u32..1000,
                     ra in 1.0f64..200.0, rb in 1.0f64..200.0) {
            let (a, b) = (Cell::new(ax, ay), Cell::new(bx, by));
            prop_assert_eq!(in_contact(a, b, ra, rb), in_contact(b, a, rb, ra));
            // enlarging both ranges never removes a contact
            if in_contact(a, b, ra, rb) {
                prop_assert!(in_contact(a, b, ra * 1.5, rb + 3.0));
            }
        }

        #[test]
        fn bucketing_equals_brute_force(radios in arb_radios()) {
            prop_assert_eq!(find_contacts(&radios, 1), brute_force(&radios, 1));
        }
    }
}
