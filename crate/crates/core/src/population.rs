//! Placing the initial population on the grid.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::node::{Cell, MobilityState, NodeClass, NodeId, NodeRecord};
use crate::rng::Streams;

fn uniform_cell<R: Rng + ?Sized>(rng: &mut R, side: u32) -> Cell {
    Cell::new(rng.random_range(0..side), rng.random_range(0..side))
}

/// Normal(mean, sd) truncated below at one cell, by rejection.
pub fn sample_range<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean.max(1.0);
    }
    let normal = Normal::new(mean, sd).expect("validated range parameters");
    loop {
        let r = normal.sample(rng);
        if r >= 1.0 {
            return r;
        }
    }
}

/// Build every node for one run.
///
/// Ids are assigned in class blocks: destinations, clinical staff, patients,
/// caregivers, intermediaries, POIs. The config is assumed valid.
pub fn build_population(config: &ScenarioConfig, streams: &mut Streams) -> Result<Vec<NodeRecord>> {
    let side = config.grid.side_cells;
    let n_dest = config.n_destinations as usize;
    let n_pois = config.n_pois as usize;
    let stationary = n_dest + n_pois;
    let total = config.grid.total_cells();
    if stationary as u64 > total {
        return Err(SimError::GridTooSmall {
            needed: stationary as u64,
            available: total,
        });
    }

    let rng = &mut streams.placement;
    let fixed: Vec<Cell> = index::sample(rng, total as usize, stationary)
        .into_iter()
        .map(|i| Cell::new((i as u64 % u64::from(side)) as u32, (i as u64 / u64::from(side)) as u32))
        .collect();
    let (dest_cells, poi_cells) = fixed.split_at(n_dest);

    let n_staff = config.n_clinical_staff as usize;
    let n_patients = config.n_patients as usize;
    let n_caregivers = config.n_caregivers as usize;
    let n_inter = config.n_intermediaries() as usize;

    let mut nodes = Vec::with_capacity(config.n_nodes() as usize);
    let push = |nodes: &mut Vec<NodeRecord>, class: NodeClass, home: Cell, work: Option<Cell>| {
        let id = nodes.len() as NodeId;
        nodes.push(NodeRecord {
            id,
            class,
            home_cell: home,
            work_cell: work,
            internet_capable: class == NodeClass::Destination,
            radio_range_cells: 1.0,
            current_state: if class.is_stationary() {
                MobilityState::Stationary
            } else {
                MobilityState::Home
            },
            current_cell: home,
            linked_patient: None,
            current_poi: None,
        });
        id
    };

    for &cell in dest_cells {
        push(&mut nodes, NodeClass::Destination, cell, None);
    }
    for j in 0..n_staff {
        let home = uniform_cell(rng, side);
        push(&mut nodes, NodeClass::ClinicalStaff, home, Some(dest_cells[j % n_dest]));
    }
    let patient_ids: Vec<NodeId> = (0..n_patients)
        .map(|_| {
            let home = uniform_cell(rng, side);
            push(&mut nodes, NodeClass::Patient, home, None)
        })
        .collect();
    for j in 0..n_caregivers {
        let patient = patient_ids[j % n_patients];
        let home = if config.caregiver_colocated {
            nodes[patient as usize].home_cell
        } else {
            uniform_cell(rng, side)
        };
        let id = push(&mut nodes, NodeClass::Caregiver, home, None);
        nodes[id as usize].linked_patient = Some(patient);
    }

    let n_employed = config.n_employed() as usize;
    let mut employed = vec![false; n_inter];
    for i in index::sample(rng, n_inter, n_employed.min(n_inter)) {
        employed[i] = true;
    }
    for is_employed in employed {
        let home = uniform_cell(rng, side);
        if is_employed {
            let work = poi_cells[rng.random_range(0..n_pois)];
            push(&mut nodes, NodeClass::IntermediaryEmployed, home, Some(work));
        } else {
            push(&mut nodes, NodeClass::IntermediaryUnemployed, home, None);
        }
    }
    for &cell in poi_cells {
        push(&mut nodes, NodeClass::Poi, cell, None);
    }

    for node in nodes.iter_mut() {
        node.radio_range_cells =
            sample_range(&mut streams.ranges, config.range_mean_cells, config.range_sd_cells);
    }

    let candidates: Vec<usize> = nodes
        .iter()
        .filter(|n| n.class.may_be_internet_capable())
        .map(|n| n.id as usize)
        .collect();
    let n_flag = (config.n_internet_capable() as usize).min(candidates.len());
    for i in index::sample(&mut streams.flags, candidates.len(), n_flag) {
        nodes[candidates[i]].internet_capable = true;
    }

    Ok(nodes)
}

/// Cells of the POI nodes, in id order.
pub fn poi_cells(nodes: &[NodeRecord]) -> Vec<Cell> {
    nodes
        .iter()
        .filter(|n| n.class == NodeClass::Poi)
        .map(|n| n.home_cell)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, StreamName};
    use proptest::prelude::*;
    use rand::Rng;

    fn count(nodes: &[NodeRecord], class: NodeClass) -> usize {
        nodes.iter().filter(|n| n.class == class).count()
    }

    #[test]
    fn class_counts_and_flags() {
        let c = ScenarioConfig::default();
        let nodes = build_population(&c, &mut Streams::new(1)).unwrap();
        assert_eq!(nodes.len() as u32, c.n_nodes());
        assert_eq!(count(&nodes, NodeClass::Patient), 10);
        assert_eq!(count(&nodes, NodeClass::Caregiver), 10);
        assert_eq!(count(&nodes, NodeClass::ClinicalStaff), 2);
        assert_eq!(count(&nodes, NodeClass::Destination), 1);
        assert_eq!(count(&nodes, NodeClass::Poi), 25);
        assert_eq!(count(&nodes, NodeClass::IntermediaryEmployed), 112);
        assert_eq!(count(&nodes, NodeClass::IntermediaryUnemployed), 8);
        let flagged: Vec<_> = nodes
            .iter()
            .filter(|n| n.internet_capable && n.class != NodeClass::Destination)
            .collect();
        assert_eq!(flagged.len(), 24);
        assert!(flagged.iter().all(|n| n.class.may_be_internet_capable()));
        assert!(nodes
            .iter()
            .filter(|n| n.class == NodeClass::Patient)
            .all(|n| !n.internet_capable));
        assert!(nodes
            .iter()
            .filter(|n| n.class == NodeClass::Destination)
            .all(|n| n.internet_capable));
    }

    #[test]
    fn intermediary_count_120_flags_24() {
        let c = ScenarioConfig {
            n_clinical_staff: 0,
            n_destinations: 0,
            ..Default::default()
        };
        assert_eq!(c.n_intermediaries(), 120);
        assert_eq!(c.n_internet_capable(), 24);
    }

    #[test]
    fn work_cells() {
        let c = ScenarioConfig::default();
        let nodes = build_population(&c, &mut Streams::new(3)).unwrap();
        let pois = poi_cells(&nodes);
        let dest = nodes[0].home_cell;
        for n in &nodes {
            assert_eq!(n.work_cell.is_some(), n.class.has_work());
            match n.class {
                NodeClass::ClinicalStaff => assert_eq!(n.work_cell, Some(dest)),
                NodeClass::IntermediaryEmployed => {
                    assert!(pois.contains(&n.work_cell.unwrap()))
                }
                _ => {}
            }
            assert!(n.home_cell.x < 820 && n.home_cell.y < 820);
            assert!(n.radio_range_cells >= 1.0);
        }
        let mut fixed: Vec<Cell> = pois.clone();
        fixed.push(dest);
        fixed.sort();
        fixed.dedup();
        assert_eq!(fixed.len(), 26);
    }

    #[test]
    fn caregivers_colocated_with_patient() {
        let c = ScenarioConfig::default();
        let nodes = build_population(&c, &mut Streams::new(9)).unwrap();
        for n in nodes.iter().filter(|n| n.class == NodeClass::Caregiver) {
            let p = &nodes[n.linked_patient.unwrap() as usize];
            assert_eq!(p.class, NodeClass::Patient);
            assert_eq!(n.home_cell, p.home_cell);
        }
    }

    #[test]
    fn grid_too_small() {
        let c = ScenarioConfig {
            grid: crate::GridSpec {
                side_cells: 5,
                cell_size_ft: 10.0,
            },
            ..Default::default()
        };
        assert!(matches!(
            build_population(&c, &mut Streams::new(0)),
            Err(SimError::GridTooSmall { needed: 26, available: 25 })
        ));
    }

    #[test]
    fn range_distribution() {
        let mut rng = derive_stream(5, StreamName::Ranges);
        let draws: Vec<f64> = (0..10_000).map(|_| sample_range(&mut rng, 60.0, 20.0)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 60.0).abs() / 60.0 < 0.02, "mean {mean}");
        let inside = draws.iter().filter(|&&r| (40.0..=80.0).contains(&r)).count() as f64;
        let frac = inside / draws.len() as f64;
        // 68.27% within one sd
        assert!((frac - 0.6827).abs() < 0.015, "fraction {frac}");
        assert!(draws.iter().all(|&r| r >= 1.0));
    }

    #[test]
    fn extra_draw_in_unrelated_stream_keeps_population() {
        let c = ScenarioConfig::default();
        let base = build_population(&c, &mut Streams::new(11)).unwrap();
        let mut s = Streams::new(11);
        let _: f64 = s.mobility.random();
        let _: f64 = s.period_start.random();
        let _: f64 = s.poi_choice.random();
        assert_eq!(base, build_population(&c, &mut s).unwrap());

        // Perturbing only the flag stream leaves homes and ranges untouched.
        let mut s = Streams::new(11);
        let _: f64 = s.flags.random();
        let other = build_population(&c, &mut s).unwrap();
        for (a, b) in base.iter().zip(&other) {
            assert_eq!(a.home_cell, b.home_cell);
            assert_eq!(a.radio_range_cells, b.radio_range_cells);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn deterministic_and_counts_match(seed in any::<u64>(), patients in 1u32..6, part in 0.1f64..1.0) {
            let c = ScenarioConfig {
                n_patients: patients,
                n_caregivers: patients,
                n_clinical_staff: 1,
                participation_ratio: part,
                ..Default::default()
            };
            let a = build_population(&c, &mut Streams::new(seed)).unwrap();
            let b = build_population(&c, &mut Streams::new(seed)).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(count(&a, NodeClass::Patient) as u32, patients);
            prop_assert_eq!(
                (count(&a, NodeClass::IntermediaryEmployed) + count(&a, NodeClass::IntermediaryUnemployed)) as u32,
                c.n_intermediaries()
            );
            prop_assert_eq!(
                a.iter().filter(|n| n.internet_capable && n.class.may_be_internet_capable()).count() as u32,
                c.n_internet_capable()
            );
        }
    }
}
