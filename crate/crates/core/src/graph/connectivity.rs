use std::collections::VecDeque;

use super::Snapshot;

/// Label threshold on path loss, dB. Pairs at or below it are connected.
pub const DEFAULT_THRESHOLD_DB: f64 = 128.0;

/// Directed `N×N` 0/1 matrix; entry `(i, j)` describes the link `i → j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectivityMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl ConnectivityMatrix {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        assert!(i != j || !v, "diagonal must stay zero");
        self.bits[i * self.n + j] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Ordered pairs `(i, j)` with `i != j`, row-major.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.get(i, j))
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::empty(self.n);
        for (i, j, v) in self.off_diagonal() {
            out.bits[perm[i] * self.n + perm[j]] = v;
        }
        out
    }
}

/// `(i, j)` is connected iff some record `i → j` in the snapshot has
/// `path_loss <= threshold_db`.
pub fn label_connectivity(snapshot: &Snapshot, threshold_db: f64) -> ConnectivityMatrix {
    let mut m = ConnectivityMatrix::empty(snapshot.n_nodes());
    for e in &snapshot.edges {
        if e.src != e.dst && e.path_loss <= threshold_db {
            m.set(e.src, e.dst, true);
        }
    }
    m
}

/// All-pairs shortest directed hop counts over thresholded connectivity.
/// Unreachable pairs and the diagonal are 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HopMatrix {
    n: usize,
    hops: Vec<u32>,
}

impl HopMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.hops[i * self.n + j]
    }

    pub fn max(&self) -> u32 {
        self.hops.iter().copied().max().unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.hops[i * self.n..(i + 1) * self.n]
    }
}

pub fn hop_counts(snapshot: &Snapshot, threshold_db: f64) -> HopMatrix {
    hops_from_connectivity(&label_connectivity(snapshot, threshold_db))
}

/// Breadth-first search from every source.
pub fn hops_from_connectivity(conn: &ConnectivityMatrix) -> HopMatrix {
    let n = conn.n();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| conn.out_neighbors(i).collect()).collect();
    let mut hops = vec![0u32; n * n];
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for t in 0..n {
            if t != s && dist[t] != u32::MAX {
                hops[s * n + t] = dist[t];
            }
        }
    }
    HopMatrix { n, hops }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeRecord, NodeState};
    use proptest::prelude::*;

    pub(crate) fn snapshot_with(n: usize, edges: &[(usize, usize, f64)]) -> Snapshot {
        Snapshot {
            t: 0,
            nodes: (0..n)
                .map(|id| NodeState {
                    id,
                    position: [0.0; 2],
                    velocity: [0.0; 2],
                })
                .collect(),
            edges: edges
                .iter()
                .map(|&(src, dst, path_loss)| EdgeRecord {
                    src,
                    dst,
                    distance: 100.0,
                    path_loss,
                    prop_delay: 3.3e-7,
                    timestamp: 0.25,
                })
                .collect(),
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        let s = snapshot_with(2, &[(0, 1, 128.0), (1, 0, 128.01)]);
        let m = label_connectivity(&s, 128.0);
        assert!(m.get(0, 1));
        assert!(!m.get(1, 0));
        let s = snapshot_with(2, &[(0, 1, 128.0 + 1e-9)]);
        assert!(!label_connectivity(&s, 128.0).get(0, 1));
    }

    #[test]
    fn any_qualifying_record_connects() {
        let s = snapshot_with(2, &[(0, 1, 140.0), (0, 1, 90.0)]);
        assert!(label_connectivity(&s, 128.0).get(0, 1));
    }

    #[test]
    fn no_edges_is_all_zero() {
        let s = snapshot_with(4, &[]);
        assert_eq!(label_connectivity(&s, 128.0).count_ones(), 0);
        assert_eq!(hop_counts(&s, 128.0).max(), 0);
    }

    #[test]
    fn path_graph_hops() {
        let s = snapshot_with(3, &[(0, 1, 90.0), (1, 2, 90.0)]);
        let h = hop_counts(&s, 128.0);
        assert_eq!(h.get(0, 1), 1);
        assert_eq!(h.get(0, 2), 2);
        // directed: no way back
        assert_eq!(h.get(2, 0), 0);
        assert_eq!(h.get(1, 1), 0);
    }

    #[test]
    fn triangle_is_one_hop_everywhere() {
        let mut edges = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    edges.push((i, j, 100.0));
                }
            }
        }
        let h = hop_counts(&snapshot_with(3, &edges), 128.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.get(i, j), u32::from(i != j));
            }
        }
    }

    #[test]
    fn isolated_nodes_have_zero_hops() {
        let h = hop_counts(&snapshot_with(2, &[]), 128.0);
        assert_eq!(h.get(0, 1), 0);
        assert_eq!(h.get(1, 0), 0);
    }

    proptest! {
        #[test]
        fn labels_monotone_in_min_path_loss(a in 60.0f64..200.0, b in 60.0f64..200.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let at_lo = label_connectivity(&snapshot_with(2, &[(0, 1, lo)]), 128.0).get(0, 1);
            let at_hi = label_connectivity(&snapshot_with(2, &[(0, 1, hi)]), 128.0).get(0, 1);
            prop_assert!(at_lo as u8 >= at_hi as u8);
        }
    }
}
