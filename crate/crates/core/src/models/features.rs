use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ModelError, NodeFeatureSet};
use crate::diffcore::Tensor;
use crate::graph::Snapshot;

/// Number of edge features per record: distance, path loss, delay, timestamp offset.
pub const EDGE_DIM: usize = 4;

/// Per-feature z-score statistics. Fitted on training data only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub node_features: NodeFeatureSet,
    pub node_mean: Vec<f64>,
    pub node_std: Vec<f64>,
    pub edge_mean: Vec<f64>,
    pub edge_std: Vec<f64>,
}

fn raw_node(n: &crate::graph::NodeState, set: NodeFeatureSet) -> Vec<f64> {
    match set {
        NodeFeatureSet::Velocity => vec![n.velocity[0], n.velocity[1]],
        NodeFeatureSet::VelocityPosition => vec![n.velocity[0], n.velocity[1], n.position[0], n.position[1]],
    }
}

fn raw_edge(e: &crate::graph::EdgeRecord) -> [f64; EDGE_DIM] {
    [e.distance, e.path_loss, e.prop_delay, e.timestamp]
}

fn mean_std(sum: &[f64], sq: &[f64], n: f64) -> (Vec<f64>, Vec<f64>) {
    if n == 0.0 {
        return (vec![0.0; sum.len()], vec![1.0; sum.len()]);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| {
            let s = (q / n - m * m).max(0.0).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

impl FeatureScaler {
    /// Leaves features unscaled.
    pub fn identity(node_features: NodeFeatureSet) -> Self {
        Self {
            node_features,
            node_mean: vec![0.0; node_features.dim()],
            node_std: vec![1.0; node_features.dim()],
            edge_mean: vec![0.0; EDGE_DIM],
            edge_std: vec![1.0; EDGE_DIM],
        }
    }

    pub fn fit<'a>(snapshots: impl IntoIterator<Item = &'a Snapshot>, node_features: NodeFeatureSet) -> Self {
        let f = node_features.dim();
        let (mut ns, mut nq, mut es, mut eq) = (vec![0.0; f], vec![0.0; f], [0.0; EDGE_DIM], [0.0; EDGE_DIM]);
        let (mut nn, mut ne) = (0.0, 0.0);
        for s in snapshots {
            for n in &s.nodes {
                for (k, v) in raw_node(n, node_features).into_iter().enumerate() {
                    ns[k] += v;
                    nq[k] += v * v;
                }
                nn += 1.0;
            }
            for e in &s.edges {
                for (k, v) in raw_edge(e).into_iter().enumerate() {
                    es[k] += v;
                    eq[k] += v * v;
                }
                ne += 1.0;
            }
        }
        let (node_mean, node_std) = mean_std(&ns, &nq, nn);
        let (edge_mean, edge_std) = mean_std(&es, &eq, ne);
        Self {
            node_features,
            node_mean,
            node_std,
            edge_mean,
            edge_std,
        }
    }

    pub fn node_dim(&self) -> usize {
        self.node_features.dim()
    }

    fn node(&self, n: &crate::graph::NodeState) -> Vec<f64> {
        raw_node(n, self.node_features)
            .into_iter()
            .enumerate()
            .map(|(k, v)| (v - self.node_mean[k]) / self.node_std[k])
            .collect()
    }

    fn edge(&self, e: &crate::graph::EdgeRecord) -> [f64; EDGE_DIM] {
        let mut out = raw_edge(e);
        for (k, v) in out.iter_mut().enumerate() {
            *v = (*v - self.edge_mean[k]) / self.edge_std[k];
        }
        out
    }
}

/// Ordered node pairs `(src, dst)`, `src != dst`, decoded together.
#[derive(Clone, Debug, PartialEq)]
pub struct PairIndex {
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
}

impl PairIndex {
    /// Every ordered pair, sender-major.
    pub fn all(n: usize) -> Self {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        Self::from_pairs(&pairs)
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        Self {
            src: pairs.iter().map(|p| p.0).collect(),
            dst: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Position of `(i, j)` in [`PairIndex::all`].
    pub fn dense_position(n: usize, i: usize, j: usize) -> usize {
        debug_assert!(i != j && i < n && j < n);
        i * (n - 1) + if j < i { j } else { j - 1 }
    }
}

/// One snapshot converted to scaled tensors.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub n: usize,
    /// `[N, F]` scaled node features.
    pub x: Tensor,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    /// `[E, 4]` scaled edge features; `None` when the snapshot has no records.
    pub edges: Option<Tensor>,
    /// Each edge feature as its own `[E, 1]` column.
    pub edge_columns: Vec<Tensor>,
    /// `[N, 1]` holding `1 / max(in-degree, 1)` over records.
    pub inv_in_degree: Tensor,
}

impl GraphInput {
    pub fn new(snapshot: &Snapshot, scaler: &FeatureScaler) -> Result<Self, ModelError> {
        let n = snapshot.n_nodes();
        if n == 0 {
            return Err(ModelError::Input(format!("snapshot {} has no nodes", snapshot.t)));
        }
        let f = scaler.node_dim();
        let mut x = Vec::with_capacity(n * f);
        for node in &snapshot.nodes {
            x.extend(scaler.node(node));
        }
        let x = Tensor::new(vec![n, f], x)?;
        let e = snapshot.edges.len();
        let mut indeg = vec![0usize; n];
        for r in &snapshot.edges {
            if r.src >= n || r.dst >= n {
                return Err(ModelError::Input(format!(
                    "snapshot {}: edge {}->{} out of range",
                    snapshot.t, r.src, r.dst
                )));
            }
            indeg[r.dst] += 1;
        }
        let inv_in_degree = Tensor::column(indeg.iter().map(|&d| 1.0 / d.max(1) as f64).collect());
        let (edges, edge_columns) = if e == 0 {
            (None, Vec::new())
        } else {
            let rows: Vec<[f64; EDGE_DIM]> = snapshot.edges.iter().map(|r| scaler.edge(r)).collect();
            let flat = rows.iter().flatten().copied().collect();
            let cols = (0..EDGE_DIM)
                .map(|k| Tensor::column(rows.iter().map(|r| r[k]).collect()))
                .collect();
            (Some(Tensor::new(vec![e, EDGE_DIM], flat)?), cols)
        };
        Ok(Self {
            n,
            x,
            src: snapshot.edges.iter().map(|r| r.src).collect(),
            dst: snapshot.edges.iter().map(|r| r.dst).collect(),
            edges,
            edge_columns,
            inv_in_degree,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }

    pub fn node_dim(&self) -> usize {
        self.x.cols()
    }

    /// Width of one step of baseline pair features.
    pub fn pair_dim(node_dim: usize) -> usize {
        2 * node_dim + EDGE_DIM + 1
    }

    /// `[N(N-1), 2F+5]` baseline features for every ordered pair in
    /// [`PairIndex::all`] order: sender features, receiver features, mean of the
    /// pair's edge records (zeros when absent) and a presence flag.
    pub fn pair_features(&self) -> Result<Tensor, ModelError> {
        let n = self.n;
        if n < 2 {
            return Err(ModelError::Input("pair features need at least two nodes".into()));
        }
        let f = self.node_dim();
        let width = Self::pair_dim(f);
        let mut sums = vec![[0.0; EDGE_DIM]; n * (n - 1)];
        let mut counts = vec![0usize; n * (n - 1)];
        if let Some(e) = &self.edges {
            for (k, (&s, &d)) in self.src.iter().zip(self.dst.iter()).enumerate() {
                if s == d {
                    continue;
                }
                let p = PairIndex::dense_position(n, s, d);
                counts[p] += 1;
                sums[p].iter_mut().zip(e.row_slice(k)).for_each(|(a, b)| *a += b);
            }
        }
        let mut out = Vec::with_capacity(n * (n - 1) * width);
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let p = PairIndex::dense_position(n, i, j);
                out.extend_from_slice(self.x.row_slice(i));
                out.extend_from_slice(self.x.row_slice(j));
                let c = counts[p];
                if c == 0 {
                    out.extend_from_slice(&[0.0; EDGE_DIM]);
                    out.push(0.0);
                } else {
                    out.extend(sums[p].iter().map(|s| s / c as f64));
                    out.push(1.0);
                }
            }
        }
        Ok(Tensor::new(vec![n * (n - 1), width], out)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeRecord, NodeState};

    fn snap() -> Snapshot {
        let node = |id, x: f64| NodeState {
            id,
            position: [x, 0.0],
            velocity: [1.0, -1.0],
        };
        let rec = |src, dst, d: f64| EdgeRecord {
            src,
            dst,
            distance: d,
            path_loss: 100.0,
            prop_delay: 0.0,
            timestamp: 0.5,
        };
        Snapshot {
            t: 0,
            nodes: vec![node(0, 0.0), node(1, 10.0), node(2, 20.0)],
            edges: vec![rec(0, 1, 10.0), rec(0, 1, 30.0), rec(2, 1, 10.0)],
        }
    }

    #[test]
    fn dense_positions_match_enumeration() {
        let p = PairIndex::all(5);
        for k in 0..p.len() {
            assert_eq!(PairIndex::dense_position(5, p.src[k], p.dst[k]), k);
        }
        assert_eq!(p.len(), 20);
    }

    #[test]
    fn pair_features_average_multi_edges_and_flag_absence() {
        let g = GraphInput::new(&snap(), &FeatureScaler::identity(NodeFeatureSet::VelocityPosition)).unwrap();
        let t = g.pair_features().unwrap();
        assert_eq!(t.shape(), &[6, 13]);
        let row01 = t.row_slice(PairIndex::dense_position(3, 0, 1));
        assert_eq!(&row01[0..4], &[1.0, -1.0, 0.0, 0.0]);
        assert_eq!(&row01[4..8], &[1.0, -1.0, 10.0, 0.0]);
        assert_eq!(&row01[8..13], &[20.0, 100.0, 0.0, 0.5, 1.0]);
        let row10 = t.row_slice(PairIndex::dense_position(3, 1, 0));
        assert_eq!(&row10[8..13], &[0.0; 5]);
        assert_eq!(g.inv_in_degree.data(), &[1.0, 1.0 / 3.0, 1.0]);
    }

    #[test]
    fn scaler_standardises_training_data() {
        let s = FeatureScaler::fit([&snap()], NodeFeatureSet::VelocityPosition);
        assert_eq!(s.node_mean[2], 10.0);
        assert!((s.node_std[2] - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);
        // constant features keep unit scale
        assert_eq!(s.node_std[0], 1.0);
        assert_eq!(s.edge_std[1], 1.0);
        let g = GraphInput::new(&snap(), &s).unwrap();
        let col: f64 = (0..3).map(|i| g.x.at(i, 2)).sum();
        assert!(col.abs() < 1e-12);
    }

    #[test]
    fn empty_edge_set_is_allowed() {
        let mut s = snap();
        s.edges.clear();
        let g = GraphInput::new(&s, &FeatureScaler::identity(NodeFeatureSet::Velocity)).unwrap();
        assert!(g.edges.is_none());
        assert_eq!(g.pair_features().unwrap().shape(), &[6, 9]);
    }
}
