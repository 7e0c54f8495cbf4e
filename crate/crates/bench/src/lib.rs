//! Shared fixtures for the benchmarks.

use stged::graph::Snapshot;
use stged::sim::{simulate, SimConfig};

/// Grouped-mobility snapshots at the default node count.
pub fn grouped_snapshots(steps: usize) -> Vec<Snapshot> {
    let cfg = SimConfig {
        n_steps: steps,
        seed: 1,
        ..SimConfig::grouped()
    };
    simulate(&cfg).expect("default config is valid").snapshots
}
