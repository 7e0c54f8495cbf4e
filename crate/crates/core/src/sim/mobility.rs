use rand::Rng;

use super::{MobilityKind, SimConfig};
use crate::graph::NodeState;

/// Per-node waypoint bookkeeping. In grouped mode `target` is relative to the
/// node's platoon anchor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaypointState {
    pub target: [f64; 2],
    pub speed: f64,
    pub pause_left: f64,
}

/// Shared route for platoon anchors: a polyline traversed back and forth.
#[derive(Clone, Debug)]
struct Route {
    points: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
    speed: f64,
    spacing: f64,
    drift: f64,
    /// (angular frequency, phase) of each anchor's drift around its slot.
    oscillators: Vec<(f64, f64)>,
}

impl Route {
    fn new<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Self {
        let [w, h] = cfg.arena_m;
        let k = cfg.route_points;
        // upper-left to lower-right with lateral jitter
        let points: Vec<[f64; 2]> = (0..k)
            .map(|i| {
                let f = i as f64 / (k - 1) as f64;
                let jitter = if i == 0 || i + 1 == k { 0.0 } else { rng.random_range(-0.15..0.15) };
                [
                    w * (0.1 + 0.8 * f + jitter).clamp(0.05, 0.95),
                    h * (0.9 - 0.8 * f - jitter).clamp(0.05, 0.95),
                ]
            })
            .collect();
        let mut cumulative = vec![0.0];
        for p in points.windows(2) {
            let d = dist(p[0], p[1]);
            cumulative.push(cumulative.last().unwrap() + d);
        }
        // Anchor speed along the route never exceeds 0.45 v_max so that a member's
        // local motion (≤ 0.5 v_max) keeps the total within v_max.
        let speed = 0.25 * cfg.v_max;
        let drift = cfg.group_drift_m;
        let min_period = if drift > 0.0 {
            2.0 * std::f64::consts::PI * drift / (0.2 * cfg.v_max)
        } else {
            1.0
        };
        let oscillators = (0..cfg.n_groups)
            .map(|_| {
                let period = min_period * rng.random_range(1.0..2.0);
                (
                    2.0 * std::f64::consts::PI / period,
                    rng.random_range(0.0..2.0 * std::f64::consts::PI),
                )
            })
            .collect();
        Self {
            points,
            cumulative,
            speed,
            spacing: cfg.group_spacing_m,
            drift,
            oscillators,
        }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn anchor(&self, group: usize, time: f64) -> [f64; 2] {
        let (omega, phase) = self.oscillators[group];
        let s = self.speed * time - group as f64 * self.spacing
            + self.drift * ((omega * time + phase).sin() - phase.sin());
        let len = self.length();
        if len <= 0.0 {
            return self.points[0];
        }
        let m = s.rem_euclid(2.0 * len);
        let s = if m > len { 2.0 * len - m } else { m };
        let seg = self.cumulative.partition_point(|&c| c <= s).clamp(1, self.points.len() - 1);
        let (a, b) = (self.points[seg - 1], self.points[seg]);
        let seg_len = self.cumulative[seg] - self.cumulative[seg - 1];
        let f = if seg_len > 0.0 {
            ((s - self.cumulative[seg - 1]) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Uniform draw from `(0, max]`.
fn draw_speed<R: Rng + ?Sized>(rng: &mut R, max: f64) -> f64 {
    max * (1.0 - rng.random::<f64>())
}

fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..2.0 * std::f64::consts::PI);
    [r * a.cos(), r * a.sin()]
}

/// Node motion state for both mobility kinds.
#[derive(Clone, Debug)]
pub struct MobilityState {
    kind: MobilityKind,
    time: f64,
    /// Absolute positions (random waypoint) or offsets from the anchor (grouped).
    local: Vec<[f64; 2]>,
    waypoints: Vec<WaypointState>,
    groups: Vec<usize>,
    route: Option<Route>,
}

impl MobilityState {
    pub fn new<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Self {
        let n = cfg.n_nodes;
        match cfg.mobility {
            MobilityKind::RandomWaypoint => {
                let draw = |rng: &mut R| {
                    [
                        rng.random_range(0.0..cfg.arena_m[0]),
                        rng.random_range(0.0..cfg.arena_m[1]),
                    ]
                };
                let local = (0..n).map(|_| draw(rng)).collect();
                let waypoints = (0..n)
                    .map(|_| WaypointState {
                        target: draw(rng),
                        speed: draw_speed(rng, cfg.v_max),
                        pause_left: 0.0,
                    })
                    .collect();
                Self {
                    kind: cfg.mobility,
                    time: 0.0,
                    local,
                    waypoints,
                    groups: vec![0; n],
                    route: None,
                }
            }
            MobilityKind::GroupedWaypoint => {
                let route = Route::new(cfg, rng);
                let local = (0..n).map(|_| uniform_in_disk(rng, cfg.group_radius_m)).collect();
                let waypoints = (0..n)
                    .map(|_| WaypointState {
                        target: uniform_in_disk(rng, cfg.group_radius_m),
                        speed: draw_speed(rng, 0.5 * cfg.v_max),
                        pause_left: 0.0,
                    })
                    .collect();
                Self {
                    kind: cfg.mobility,
                    time: 0.0,
                    local,
                    waypoints,
                    groups: (0..n).map(|i| i * cfg.n_groups / n).collect(),
                    route: Some(route),
                }
            }
        }
    }

    /// Platoon index of each node (all zero for random waypoint).
    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn waypoints(&self) -> &[WaypointState] {
        &self.waypoints
    }

    pub fn anchor(&self, group: usize) -> Option<[f64; 2]> {
        self.route.as_ref().map(|r| r.anchor(group, self.time))
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        match &self.route {
            None => self.local.clone(),
            Some(route) => self
                .local
                .iter()
                .zip(&self.groups)
                .map(|(o, &g)| {
                    let a = route.anchor(g, self.time);
                    [a[0] + o[0], a[1] + o[1]]
                })
                .collect(),
        }
    }

    fn draw_target<R: Rng + ?Sized>(&self, cfg: &SimConfig, rng: &mut R) -> [f64; 2] {
        match self.kind {
            MobilityKind::RandomWaypoint => [
                rng.random_range(0.0..cfg.arena_m[0]),
                rng.random_range(0.0..cfg.arena_m[1]),
            ],
            MobilityKind::GroupedWaypoint => uniform_in_disk(rng, cfg.group_radius_m),
        }
    }

    fn local_speed_cap(&self, cfg: &SimConfig) -> f64 {
        match self.kind {
            MobilityKind::RandomWaypoint => cfg.v_max,
            MobilityKind::GroupedWaypoint => 0.5 * cfg.v_max,
        }
    }

    /// Advances every node by `dt` seconds and returns the new states; velocity is
    /// the displacement just made divided by `dt`.
    pub fn step<R: Rng + ?Sized>(&mut self, cfg: &SimConfig, dt: f64, rng: &mut R) -> Vec<NodeState> {
        assert!(dt > 0.0, "dt must be positive");
        let before = self.positions();
        let cap = self.local_speed_cap(cfg);
        for i in 0..self.local.len() {
            let wp = self.waypoints[i];
            if wp.pause_left > 0.0 {
                self.waypoints[i].pause_left = (wp.pause_left - dt).max(0.0);
                continue;
            }
            let pos = self.local[i];
            let d = dist(pos, wp.target);
            let travel = wp.speed * dt;
            if travel >= d {
                self.local[i] = wp.target;
                let target = self.draw_target(cfg, rng);
                self.waypoints[i] = WaypointState {
                    target,
                    speed: draw_speed(rng, cap),
                    pause_left: cfg.pause_s,
                };
            } else {
                let f = travel / d;
                self.local[i] = [
                    pos[0] + f * (wp.target[0] - pos[0]),
                    pos[1] + f * (wp.target[1] - pos[1]),
                ];
            }
        }
        self.time += dt;
        self.positions()
            .into_iter()
            .zip(before)
            .enumerate()
            .map(|(id, (p, b))| NodeState {
                id,
                position: p,
                velocity: [(p[0] - b[0]) / dt, (p[1] - b[1]) / dt],
            })
            .collect()
    }
}
