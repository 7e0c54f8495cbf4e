use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{propagation_delay_s, SimConfig, TwoRayGround};
use crate::graph::{EdgeRecord, NodeState, Snapshot};

/// Distances below this are clamped before evaluating path loss.
const MIN_DISTANCE_M: f64 = 1.0;

/// Samples the edge records of one step. Every ordered pair whose path loss is
/// within `threshold_db + margin_db` emits a Poisson number of records with
/// uniform timestamps inside the step. Records are sorted by timestamp.
pub fn emit_snapshot<R: Rng + ?Sized>(nodes: &[NodeState], config: &SimConfig, t: usize, rng: &mut R) -> Snapshot {
    let model: TwoRayGround = config.propagation();
    let limit = config.threshold_db + config.margin_db;
    let poisson = (config.message_rate > 0.0).then(|| Poisson::new(config.message_rate).expect("rate validated"));
    let mut edges = Vec::new();
    if let Some(poisson) = poisson {
        for a in nodes {
            for b in nodes {
                if a.id == b.id {
                    continue;
                }
                let distance = (a.position[0] - b.position[0]).hypot(a.position[1] - b.position[1]);
                let path_loss = model
                    .path_loss_db(distance.max(MIN_DISTANCE_M))
                    .expect("clamped distance is positive");
                if path_loss > limit {
                    continue;
                }
                let k = poisson.sample(rng) as usize;
                for _ in 0..k {
                    edges.push(EdgeRecord {
                        src: a.id,
                        dst: b.id,
                        distance,
                        path_loss,
                        prop_delay: propagation_delay_s(distance),
                        timestamp: rng.random::<f64>(),
                    });
                }
            }
        }
    }
    edges.sort_by(|x, y| x.timestamp.total_cmp(&y.timestamp));
    Snapshot {
        t,
        nodes: nodes.to_vec(),
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(distances: &[f64]) -> Vec<NodeState> {
        distances
            .iter()
            .enumerate()
            .map(|(id, &x)| NodeState {
                id,
                position: [x, 0.0],
                velocity: [0.0; 2],
            })
            .collect()
    }

    #[test]
    fn zero_rate_emits_nothing() {
        let cfg = SimConfig {
            message_rate: 0.0,
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = emit_snapshot(&line(&[0.0, 10.0, 20.0]), &cfg, 4, &mut rng);
        assert!(s.edges.is_empty());
        assert_eq!(s.t, 4);
    }

    #[test]
    fn records_are_valid_and_out_of_range_pairs_silent() {
        let cfg = SimConfig {
            message_rate: 5.0,
            ..SimConfig::default()
        };
        let far = cfg.propagation().range_m(cfg.threshold_db + cfg.margin_db) + 50.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = emit_snapshot(&line(&[0.0, 2000.0, 2000.0 + far]), &cfg, 0, &mut rng);
        s.validate(1.0).unwrap();
        assert!(!s.edges.is_empty());
        for e in &s.edges {
            assert!(!(e.src == 0 && e.dst == 2) && !(e.src == 2 && e.dst == 0));
            if e.src + e.dst == 1 {
                assert!((e.prop_delay - 2000.0 / 2.998e8).abs() < 1e-15);
            }
        }
        assert!(s.edges.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn mean_records_per_pair_matches_rate() {
        let cfg = SimConfig {
            message_rate: 2.0,
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let nodes = line(&[0.0, 100.0]);
        let total: usize = (0..5000).map(|t| emit_snapshot(&nodes, &cfg, t, &mut rng).edges.len()).sum();
        // two ordered pairs per step
        let mean = total as f64 / 10_000.0;
        assert!((mean - 2.0).abs() < 0.05, "{mean}");
    }
}
