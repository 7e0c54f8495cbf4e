//! Synthetic tactical-network generator: node mobility, two-ray path loss and
//! Poisson message sampling, producing snapshot streams.

mod config;
mod emit;
mod mobility;
mod propagation;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Dataset, GraphError, NodeState, DEFAULT_STEP_SECONDS};

pub use config::{MobilityKind, SimConfig};
pub use emit::emit_snapshot;
pub use mobility::{MobilityState, WaypointState};
pub use propagation::{propagation_delay_s, TwoRayGround, DELAY_SPEED, WAVE_SPEED};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub fn step_mobility<R: rand::Rng + ?Sized>(
    state: &mut MobilityState,
    config: &SimConfig,
    dt: f64,
    rng: &mut R,
) -> Vec<NodeState> {
    state.step(config, dt, rng)
}

/// Runs the simulator for `config.n_steps` one-second steps. Node velocity in
/// snapshot `t` is the displacement made during step `t`.
///
/// Motion and message sampling use separate random streams derived from the
/// seed, so changing `message_rate` leaves trajectories untouched.
pub fn simulate(config: &SimConfig) -> Result<Dataset, SimError> {
    config.validate()?;
    let mut motion_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut message_rng = ChaCha8Rng::seed_from_u64(config.seed);
    message_rng.set_stream(1);
    let mut state = MobilityState::new(config, &mut motion_rng);
    let mut snapshots = Vec::with_capacity(config.n_steps);
    for t in 0..config.n_steps {
        let nodes = state.step(config, DEFAULT_STEP_SECONDS, &mut motion_rng);
        let snapshot = emit_snapshot(&nodes, config, t, &mut message_rng);
        snapshot.validate(DEFAULT_STEP_SECONDS)?;
        snapshots.push(snapshot);
    }
    let dataset = Dataset::new(config.n_nodes, snapshots);
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests;
