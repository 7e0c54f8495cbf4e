use super::*;
use crate::graph::{io::write_dataset, label_connectivity, DatasetStats};
use proptest::prelude::*;

#[test]
fn same_seed_gives_identical_bytes() {
    let cfg = SimConfig {
        n_steps: 50,
        seed: 7,
        ..SimConfig::default()
    };
    let bytes = |c: &SimConfig| {
        let mut out = Vec::new();
        write_dataset(&mut out, &simulate(c).unwrap()).unwrap();
        out
    };
    assert_eq!(bytes(&cfg), bytes(&cfg));
    assert_ne!(bytes(&cfg), bytes(&SimConfig { seed: 8, ..cfg.clone() }));
}

#[test]
fn state_counts_match_requested_steps() {
    let grouped = simulate(&SimConfig {
        n_steps: 3998,
        message_rate: 0.0,
        ..SimConfig::grouped()
    })
    .unwrap();
    assert_eq!(DatasetStats::compute(&grouped.snapshots).states, 3998);
    let random = simulate(&SimConfig {
        n_steps: 3599,
        message_rate: 0.0,
        ..SimConfig::default()
    })
    .unwrap();
    assert_eq!(random.snapshots.len(), 3599);
    assert_eq!(random.snapshots.last().unwrap().t, 3598);
}

#[test]
fn default_rate_lands_in_calibration_band() {
    for base in [SimConfig::default(), SimConfig::grouped()] {
        let cfg = SimConfig { n_steps: 600, seed: 11, ..base };
        let stats = DatasetStats::compute(&simulate(&cfg).unwrap().snapshots);
        eprintln!("{} avg edges {:.1}", cfg.mobility, stats.avg_edges);
        assert!(
            (400.0..=1600.0).contains(&stats.avg_edges),
            "{} avg edges {}",
            cfg.mobility,
            stats.avg_edges
        );
        assert_eq!(stats.avg_nodes, 24.0);
    }
}

#[test]
fn rate_change_keeps_trajectories() {
    let a = simulate(&SimConfig { n_steps: 30, ..SimConfig::default() }).unwrap();
    let b = simulate(&SimConfig {
        n_steps: 30,
        message_rate: 3.0,
        ..SimConfig::default()
    })
    .unwrap();
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(x.nodes, y.nodes);
    }
}

#[test]
fn grouped_mode_has_block_structure() {
    let cfg = SimConfig {
        n_steps: 1500,
        seed: 3,
        ..SimConfig::grouped()
    };
    let groups = MobilityState::new(&cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).groups().to_vec();
    let data = simulate(&cfg).unwrap();
    let (mut same, mut same_n, mut cross, mut cross_n) = (0usize, 0usize, 0usize, 0usize);
    for s in &data.snapshots {
        let c = label_connectivity(s, cfg.threshold_db);
        for (i, j, on) in c.off_diagonal() {
            if groups[i] == groups[j] {
                same += on as usize;
                same_n += 1;
            } else {
                cross += on as usize;
                cross_n += 1;
            }
        }
    }
    let (p_same, p_cross) = (same as f64 / same_n as f64, cross as f64 / cross_n as f64);
    assert!(p_same > p_cross, "same {p_same} cross {p_cross}");
}

#[test]
fn connectivity_falls_with_distance() {
    let cfg = SimConfig {
        n_steps: 400,
        seed: 5,
        ..SimConfig::default()
    };
    let data = simulate(&cfg).unwrap();
    let bin_width = 250.0;
    let mut hits = vec![(0usize, 0usize); 24];
    for s in &data.snapshots {
        let c = label_connectivity(s, cfg.threshold_db);
        for (i, j, on) in c.off_diagonal() {
            let (a, b) = (s.nodes[i].position, s.nodes[j].position);
            let bin = (((a[0] - b[0]).hypot(a[1] - b[1])) / bin_width) as usize;
            if bin < hits.len() {
                hits[bin].0 += on as usize;
                hits[bin].1 += 1;
            }
        }
    }
    let p: Vec<f64> = hits
        .iter()
        .filter(|h| h.1 >= 200)
        .map(|h| h.0 as f64 / h.1 as f64)
        .collect();
    // sampling noise only within the in-range bins
    for w in p.windows(2) {
        assert!(w[1] <= w[0] + 0.05, "{p:?}");
    }
    assert_eq!(*p.last().unwrap(), 0.0);
}

#[test]
fn invalid_config_is_rejected() {
    assert!(matches!(
        simulate(&SimConfig { n_nodes: 1, ..SimConfig::default() }),
        Err(SimError::InvalidConfig(_))
    ));
}

proptest! {
    #[test]
    fn path_loss_monotone(d in 0.5f64..20_000.0, step in 0.0f64..500.0) {
        let m = SimConfig::default().propagation();
        let a = m.path_loss_db(d).unwrap();
        let b = m.path_loss_db(d + step).unwrap();
        prop_assert!(b >= a - 1e-12);
    }
}
