use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{SimError, TwoRayGround};
use crate::graph::DEFAULT_THRESHOLD_DB;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityKind {
    /// Independent random waypoint per node (casual movement).
    RandomWaypoint,
    /// Platoons wandering around anchors that travel a shared route (tactical movement).
    GroupedWaypoint,
}

impl FromStr for MobilityKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rwp" | "random_waypoint" => Ok(Self::RandomWaypoint),
            "grouped" | "grouped_waypoint" => Ok(Self::GroupedWaypoint),
            other => Err(SimError::InvalidConfig(format!("unknown mobility kind {other:?}"))),
        }
    }
}

impl fmt::Display for MobilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RandomWaypoint => "rwp",
            Self::GroupedWaypoint => "grouped",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub n_steps: usize,
    pub mobility: MobilityKind,
    /// m/s
    pub v_max: f64,
    /// Width and height of the arena, metres.
    pub arena_m: [f64; 2],
    /// Seconds a node rests after reaching a waypoint.
    pub pause_s: f64,
    pub n_groups: usize,
    /// Maximum distance of a platoon member from its anchor, metres.
    pub group_radius_m: f64,
    /// Nominal route distance between consecutive platoon anchors, metres.
    pub group_spacing_m: f64,
    /// Amplitude of each anchor's oscillation around its nominal route slot, metres.
    pub group_drift_m: f64,
    /// Number of route waypoints in grouped mode.
    pub route_points: usize,
    pub frequency_hz: f64,
    pub tx_height_m: f64,
    pub rx_height_m: f64,
    /// Mean edge records per in-range ordered pair per second.
    pub message_rate: f64,
    pub threshold_db: f64,
    /// Pairs up to `threshold_db + margin_db` still emit records.
    pub margin_db: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_nodes: 24,
            n_steps: 600,
            mobility: MobilityKind::RandomWaypoint,
            v_max: 10.0,
            arena_m: [4000.0, 4000.0],
            pause_s: 0.0,
            n_groups: 3,
            group_radius_m: 200.0,
            group_spacing_m: 1500.0,
            group_drift_m: 500.0,
            route_points: 6,
            frequency_hz: 3.0e8,
            tx_height_m: 1.5,
            rx_height_m: 1.5,
            message_rate: 1.2,
            threshold_db: DEFAULT_THRESHOLD_DB,
            margin_db: 3.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn grouped() -> Self {
        Self {
            mobility: MobilityKind::GroupedWaypoint,
            arena_m: [8000.0, 8000.0],
            ..Self::default()
        }
    }

    pub fn propagation(&self) -> TwoRayGround {
        TwoRayGround {
            frequency_hz: self.frequency_hz,
            tx_height_m: self.tx_height_m,
            rx_height_m: self.rx_height_m,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.n_nodes < 2 {
            return bad("n_nodes must be at least 2");
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be positive");
        }
        if !(self.tx_height_m > 0.0 && self.rx_height_m > 0.0) {
            return bad("antenna heights must be positive");
        }
        if !(self.frequency_hz > 0.0) {
            return bad("frequency must be positive");
        }
        if !(self.message_rate >= 0.0 && self.message_rate.is_finite()) {
            return bad("message_rate must be non-negative");
        }
        if !(self.arena_m[0] > 0.0 && self.arena_m[1] > 0.0) {
            return bad("arena extent must be positive");
        }
        if !(self.pause_s >= 0.0) {
            return bad("pause_s must be non-negative");
        }
        if !(self.threshold_db > 0.0) {
            return bad("threshold_db must be positive");
        }
        if !(self.margin_db >= 0.0) {
            return bad("margin_db must be non-negative");
        }
        if self.mobility == MobilityKind::GroupedWaypoint {
            if self.n_groups == 0 || self.n_groups > self.n_nodes {
                return bad("n_groups must be in 1..=n_nodes");
            }
            if !(self.group_radius_m > 0.0) {
                return bad("group_radius_m must be positive");
            }
            if self.route_points < 2 {
                return bad("route_points must be at least 2");
            }
            if !(self.group_drift_m >= 0.0 && self.group_spacing_m >= 0.0) {
                return bad("group spacing and drift must be non-negative");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
        SimConfig::grouped().validate().unwrap();
        assert_eq!(SimConfig::default().n_nodes, 24);
        assert_eq!(SimConfig::default().v_max, 10.0);
        assert_eq!(SimConfig::default().message_rate, 1.2);
    }

    #[test]
    fn invalid_values_rejected() {
        for cfg in [
            SimConfig { n_nodes: 1, ..SimConfig::default() },
            SimConfig { v_max: 0.0, ..SimConfig::default() },
            SimConfig { tx_height_m: 0.0, ..SimConfig::default() },
            SimConfig { message_rate: -1.0, ..SimConfig::default() },
            SimConfig { n_groups: 0, ..SimConfig::grouped() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn parses_mobility_names() {
        assert_eq!("rwp".parse::<MobilityKind>().unwrap(), MobilityKind::RandomWaypoint);
        assert_eq!("grouped".parse::<MobilityKind>().unwrap(), MobilityKind::GroupedWaypoint);
        assert!("walk".parse::<MobilityKind>().is_err());
    }
}
