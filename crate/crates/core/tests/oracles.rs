//! Library results checked against independent brute-force recomputations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stged::graph::{hop_counts, label_connectivity, EdgeRecord, NodeState, Snapshot};
use stged::sim::TwoRayGround;
use stged::train::MetricsReport;

fn random_snapshot(rng: &mut ChaCha8Rng, n: usize) -> Snapshot {
    let nodes = (0..n)
        .map(|id| NodeState {
            id,
            position: [0.0, 0.0],
            velocity: [0.0, 0.0],
        })
        .collect();
    let m = rng.random_range(0..=n * n);
    let edges = (0..m)
        .filter_map(|_| {
            let (src, dst) = (rng.random_range(0..n), rng.random_range(0..n));
            (src != dst).then(|| EdgeRecord {
                src,
                dst,
                distance: 10.0,
                path_loss: rng.random_range(100.0..140.0),
                prop_delay: 0.0,
                timestamp: 0.5,
            })
        })
        .collect();
    Snapshot { t: 0, nodes, edges }
}

/// Shortest hops by relaxation over every intermediate node; 0 for unreachable and diagonal.
pub fn floyd_warshall(snapshot: &Snapshot, threshold: f64) -> Vec<Vec<u32>> {
    let n = snapshot.n_nodes();
    let inf = u32::MAX / 2;
    let mut d = vec![vec![inf; n]; n];
    for e in &snapshot.edges {
        if e.path_loss <= threshold {
            d[e.src][e.dst] = 1;
        }
    }
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d.into_iter().map(|r| r.into_iter().map(|x| if x >= inf { 0 } else { x }).collect()).collect()
}

#[test]
#[allow(clippy::needless_range_loop)]
fn hop_counts_match_floyd_warshall() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let s = random_snapshot(&mut rng, n);
        let h = hop_counts(&s, 128.0);
        let fw = floyd_warshall(&s, 128.0);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(h.get(i, j), fw[i][j], "({i},{j}) in {s:?}");
            }
        }
    }
}

#[test]
fn labels_match_direct_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        let s = random_snapshot(&mut rng, n);
        let c = label_connectivity(&s, 128.0);
        for i in 0..n {
            for j in 0..n {
                let direct = i != j && s.edges.iter().any(|e| e.src == i && e.dst == j && e.path_loss <= 128.0);
                assert_eq!(c.get(i, j), direct);
            }
        }
    }
}

#[test]
fn metrics_match_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..100 {
        let len = rng.random_range(1..60);
        let scores: Vec<f64> = (0..len).map(|_| rng.random()).collect();
        let labels: Vec<bool> = (0..len).map(|_| rng.random_bool(0.4)).collect();
        let r = MetricsReport::from_scores(&scores, &labels, 0.5);
        let pred: Vec<bool> = scores.iter().map(|&s| s > 0.5).collect();
        let count = |p: bool, y: bool| pred.iter().zip(&labels).filter(|(&a, &b)| a == p && b == y).count() as u64;
        assert_eq!((r.tp, r.fp, r.fn_, r.tn), (count(true, true), count(true, false), count(false, true), count(false, false)));
        let correct = pred.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64;
        assert_eq!(r.accuracy, correct / len as f64);
        if r.tp + r.fp > 0 && r.tp + r.fn_ > 0 && r.tp > 0 {
            let (p, q) = (r.tp as f64 / (r.tp + r.fp) as f64, r.tp as f64 / (r.tp + r.fn_) as f64);
            assert!((r.f1 - 2.0 * p * q / (p + q)).abs() < 1e-12);
        }
    }
}

#[test]
fn path_loss_matches_closed_forms() {
    let m = TwoRayGround {
        frequency_hz: 3.0e8,
        tx_height_m: 1.5,
        rx_height_m: 1.5,
    };
    let dc = 4.0 * std::f64::consts::PI * 2.25;
    for d in [1.0, 10.0, 28.0, 29.0, 100.0, 2377.0, 1e4] {
        let expected = if d < dc {
            20.0 * (4.0 * std::f64::consts::PI * d).log10()
        } else {
            40.0 * d.log10() - 20.0 * 2.25f64.log10()
        };
        assert!((m.path_loss_db(d).unwrap() - expected).abs() < 1e-9, "{d}");
    }
}
