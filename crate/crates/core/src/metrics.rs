//! Delivery probability and latency, per run and across seeds.

use serde::{Deserialize, Serialize};

use crate::node::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageOutcome {
    pub message_id: u32,
    pub origin: NodeId,
    pub created_step: u32,
    pub delivered: bool,
    pub delivered_step: Option<u32>,
    pub latency_minutes: Option<u64>,
}

/// Delivered / generated; `None` when nothing was generated.
pub fn delivery_probability(outcomes: &[MessageOutcome]) -> Option<f64> {
    if outcomes.is_empty() {
        return None;
    }
    let delivered = outcomes.iter().filter(|o| o.delivered).count();
    Some(delivered as f64 / outcomes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_minutes: f64,
    pub max_minutes: f64,
}

/// Mean and maximum latency over delivered messages only; `None` when no
/// message was delivered.
pub fn latency_stats(outcomes: &[MessageOutcome], step_minutes: u32) -> Option<LatencyStats> {
    let latencies: Vec<u64> = outcomes
        .iter()
        .filter(|o| o.delivered)
        .filter_map(|o| o.delivered_step.map(|d| u64::from(d - o.created_step) * u64::from(step_minutes)))
        .collect();
    if latencies.is_empty() {
        return None;
    }
    let sum: u64 = latencies.iter().sum();
    Some(LatencyStats {
        mean_minutes: sum as f64 / latencies.len() as f64,
        max_minutes: *latencies.iter().max().unwrap() as f64,
    })
}

/// Metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub n_generated: usize,
    pub n_delivered: usize,
    pub delivery_probability: Option<f64>,
    pub latency: Option<LatencyStats>,
}

impl RunMetrics {
    pub fn from_outcomes(seed: u64, outcomes: &[MessageOutcome], step_minutes: u32) -> Self {
        RunMetrics {
            seed,
            n_generated: outcomes.len(),
            n_delivered: outcomes.iter().filter(|o| o.delivered).count(),
            delivery_probability: delivery_probability(outcomes),
            latency: latency_stats(outcomes, step_minutes),
        }
    }
}

/// Cross-seed mean and standard error of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedStat {
    pub n: usize,
    pub mean: f64,
    /// Sample sd / sqrt(n); absent with fewer than two values.
    pub sem: Option<f64>,
}

impl SeedStat {
    /// Values are summed in sorted order so the result does not depend on
    /// the order seeds arrive in.
    pub fn from_values(values: &[f64]) -> Option<SeedStat> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sem = (v.len() >= 2).then(|| {
            let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
            sq.sort_by(f64::total_cmp);
            let var = sq.iter().sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Some(SeedStat {
            n: v.len(),
            mean,
            sem,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_seeds: usize,
    pub n_generated: usize,
    pub n_delivered: usize,
    /// Pooled delivered / generated over all seeds.
    pub delivery_probability: Option<f64>,
    pub delivery: Option<SeedStat>,
    /// Over seeds with at least one delivery.
    pub mean_latency_minutes: Option<SeedStat>,
    /// Largest single-message latency seen in any seed.
    pub max_latency_minutes: Option<f64>,
    pub per_seed: Vec<RunMetrics>,
}

/// Combine per-seed metrics. Seeds without deliveries count toward the
/// delivery mean but not toward latency.
pub fn aggregate_seeds(per_seed: &[RunMetrics]) -> MetricsReport {
    let n_generated = per_seed.iter().map(|r| r.n_generated).sum::<usize>();
    let n_delivered = per_seed.iter().map(|r| r.n_delivered).sum::<usize>();
    let deliveries: Vec<f64> = per_seed.iter().filter_map(|r| r.delivery_probability).collect();
    let latencies: Vec<f64> = per_seed
        .iter()
        .filter_map(|r| r.latency.map(|l| l.mean_minutes))
        .collect();
    let max_latency = per_seed
        .iter()
        .filter_map(|r| r.latency.map(|l| l.max_minutes))
        .reduce(f64::max);
    MetricsReport {
        n_seeds: per_seed.len(),
        n_generated,
        n_delivered,
        delivery_probability: (n_generated > 0).then(|| n_delivered as f64 / n_generated as f64),
        delivery: SeedStat::from_values(&deliveries),
        mean_latency_minutes: SeedStat::from_values(&latencies),
        max_latency_minutes: max_latency,
        per_seed: per_seed.to_vec(),
    }
}

/// How far DTN trails Hybrid, both as an absolute difference and relative
/// to the Hybrid value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub absolute: f64,
    pub relative: Option<f64>,
}

impl Gap {
    pub fn between(reference: f64, other: f64) -> Gap {
        let absolute = reference - other;
        Gap {
            absolute,
            relative: (reference != 0.0).then(|| absolute / reference),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn outcome(created: u32, delivered: Option<u32>) -> MessageOutcome {
        MessageOutcome {
            message_id: 0,
            origin: 0,
            created_step: created,
            delivered: delivered.is_some(),
            delivered_step: delivered,
            latency_minutes: delivered.map(|d| u64::from(d - created) * 30),
        }
    }

    #[test]
    fn delivery_examples() {
        let mk = |k| {
            (0..10)
                .map(|i| outcome(0, (i < k).then_some(3)))
                .collect::<Vec<_>>()
        };
        assert_eq!(delivery_probability(&mk(8)), Some(0.8));
        assert_eq!(delivery_probability(&mk(10)), Some(1.0));
        assert_eq!(delivery_probability(&mk(0)), Some(0.0));
        assert_eq!(delivery_probability(&[]), None);
    }

    #[test]
    fn latency_examples() {
        // 2 h, 13 h, 5 h at 30-min steps
        let o = [outcome(0, Some(4)), outcome(0, Some(26)), outcome(0, Some(10)), outcome(0, None)];
        let s = latency_stats(&o, 30).unwrap();
        assert!((s.mean_minutes / 60.0 - 6.666_666_666_7).abs() < 1e-9);
        assert_eq!(s.max_minutes, 13.0 * 60.0);

        let s = latency_stats(&[outcome(3, Some(3))], 30).unwrap();
        assert_eq!((s.mean_minutes, s.max_minutes), (0.0, 0.0));

        let s = latency_stats(&[outcome(4, Some(30))], 30).unwrap();
        assert_eq!(s.mean_minutes, 13.0 * 60.0);

        assert!(latency_stats(&[outcome(0, None)], 30).is_none());
    }

    #[test]
    fn aggregate_example() {
        let s = SeedStat::from_values(&[1.0, 0.8, 0.9, 0.9]).unwrap();
        assert!((s.mean - 0.9).abs() < 1e-12);
        // sd = sqrt(0.02 / 3) = 0.0816497, sem = sd / 2
        assert!((s.sem.unwrap() - 0.040_824_829).abs() < 1e-8);

        let s = SeedStat::from_values(&[0.7; 5]).unwrap();
        assert_eq!(s.sem, Some(0.0));
        assert_eq!(SeedStat::from_values(&[0.7]).unwrap().sem, None);
    }

    #[test]
    fn zero_delivery_seeds_excluded_from_latency() {
        let runs = vec![
            RunMetrics::from_outcomes(0, &[outcome(0, Some(2))], 30),
            RunMetrics::from_outcomes(1, &[outcome(0, None)], 30),
        ];
        let r = aggregate_seeds(&runs);
        assert_eq!(r.delivery.unwrap().mean, 0.5);
        let lat = r.mean_latency_minutes.unwrap();
        assert_eq!((lat.n, lat.mean), (1, 60.0));
        assert_eq!(r.max_latency_minutes, Some(60.0));
        assert_eq!(r.delivery_probability, Some(0.5));
    }

    #[test]
    fn gap() {
        let g = Gap::between(0.95, 0.91);
        assert!((g.absolute - 0.04).abs() < 1e-12);
        assert!((g.relative.unwrap() - 0.04 / 0.95).abs() < 1e-12);
        assert_eq!(Gap::between(0.0, 0.0).relative, None);
    }

    proptest! {
        #[test]
        fn aggregation_is_permutation_invariant(
            vals in prop::collection::vec((0usize..=10, 0u32..48), 2..40),
            rot in 0usize..40,
        ) {
            let runs: Vec<RunMetrics> = vals
                .iter()
                .enumerate()
                .map(|(seed, &(k, step))| {
                    let o: Vec<_> = (0..10).map(|i| outcome(0, (i < k).then_some(step))).collect();
                    RunMetrics::from_outcomes(seed as u64, &o, 30)
                })
                .collect();
            let mut shuffled = runs.clone();
            shuffled.rotate_left(rot % runs.len());
            shuffled.reverse();
            let a = aggregate_seeds(&runs);
            let b = aggregate_seeds(&shuffled);
            prop_assert_eq!(a.delivery, b.delivery);
            prop_assert_eq!(a.mean_latency_minutes, b.mean_latency_minutes);
            prop_assert_eq!(a.max_latency_minutes, b.max_latency_minutes);
            let p = a.delivery.unwrap().mean;
            prop_assert!((0.0..=1.0).contains(&p));
            if let Some(m) = a.max_latency_minutes {
                prop_assert!(m <= 48.0 * 30.0);
            }
        }
    }
}
