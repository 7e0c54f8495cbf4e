use super::Snapshot;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStat {
    pub name: &'static str,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Summary statistics in the shape of the usual dataset table.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub states: usize,
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub node_features: Vec<FeatureStat>,
    pub edge_features: Vec<FeatureStat>,
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    // Welford
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn stat(self, name: &'static str) -> FeatureStat {
        FeatureStat {
            name,
            mean: self.mean,
            std: if self.n > 0.0 { (self.m2 / self.n).max(0.0).sqrt() } else { 0.0 },
        }
    }
}

pub const NODE_FEATURE_NAMES: [&str; 4] = ["velocity_x", "velocity_y", "position_x", "position_y"];
pub const EDGE_FEATURE_NAMES: [&str; 4] = ["distance", "path_loss", "prop_delay", "timestamp"];

impl DatasetStats {
    pub fn compute(snapshots: &[Snapshot]) -> Self {
        let mut node = [Moments::default(); 4];
        let mut edge = [Moments::default(); 4];
        let (mut n_nodes, mut n_edges) = (0usize, 0usize);
        for s in snapshots {
            n_nodes += s.nodes.len();
            n_edges += s.edges.len();
            for n in &s.nodes {
                let v = [n.velocity[0], n.velocity[1], n.position[0], n.position[1]];
                node.iter_mut().zip(v).for_each(|(m, x)| m.push(x));
            }
            for e in &s.edges {
                let v = [e.distance, e.path_loss, e.prop_delay, e.timestamp];
                edge.iter_mut().zip(v).for_each(|(m, x)| m.push(x));
            }
        }
        let states = snapshots.len();
        let avg = |total: usize| if states == 0 { 0.0 } else { total as f64 / states as f64 };
        Self {
            states,
            avg_nodes: avg(n_nodes),
            avg_edges: avg(n_edges),
            node_features: node.iter().zip(NODE_FEATURE_NAMES).map(|(m, n)| m.stat(n)).collect(),
            edge_features: edge.iter().zip(EDGE_FEATURE_NAMES).map(|(m, n)| m.stat(n)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeRecord, NodeState};

    #[test]
    fn averages_and_deviations() {
        let mk = |t, vx: f64, edges: usize| Snapshot {
            t,
            nodes: vec![NodeState {
                id: 0,
                position: [0.0; 2],
                velocity: [vx, 0.0],
            }],
            edges: (0..edges)
                .map(|k| EdgeRecord {
                    src: 0,
                    dst: 0,
                    distance: k as f64,
                    path_loss: 100.0,
                    prop_delay: 0.0,
                    timestamp: 0.0,
                })
                .collect(),
        };
        let st = DatasetStats::compute(&[mk(0, 1.0, 2), mk(1, 3.0, 4)]);
        assert_eq!(st.states, 2);
        assert_eq!(st.avg_nodes, 1.0);
        assert_eq!(st.avg_edges, 3.0);
        assert_eq!(st.node_features[0].mean, 2.0);
        assert_eq!(st.node_features[0].std, 1.0);
        assert_eq!(st.edge_features[1].std, 0.0);
        assert!(st.edge_features.iter().all(|f| f.std >= 0.0));
        let empty = DatasetStats::compute(&[]);
        assert_eq!(empty.avg_edges, 0.0);
    }
}
