use super::GraphError;

pub const DEFAULT_STEP_SECONDS: f64 = 1.0;

/// Kinematic state of one radio node during a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeState {
    pub id: usize,
    /// Metres.
    pub position: [f64; 2],
    /// Metres per second.
    pub velocity: [f64; 2],
}

impl NodeState {
    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }
}

/// One observed sender→receiver communication event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeRecord {
    pub src: usize,
    pub dst: usize,
    /// Metres.
    pub distance: f64,
    /// dB.
    pub path_loss: f64,
    /// Seconds.
    pub prop_delay: f64,
    /// Offset in seconds from the start of the step.
    pub timestamp: f64,
}

/// Network state over one step: node kinematics plus every edge record observed in it.
/// Several records may share the same `(src, dst)` pair.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Snapshot {
    pub t: usize,
    pub nodes: Vec<NodeState>,
    pub edges: Vec<EdgeRecord>,
}

impl Snapshot {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Checks ids are `0..N` in order and every edge record is well formed.
    pub fn validate(&self, step_seconds: f64) -> Result<(), GraphError> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(GraphError::Invariant(format!(
                    "snapshot {}: node at position {} has id {} (ids must be contiguous from 0)",
                    self.t, i, n.id
                )));
            }
            if !(n.position.iter().chain(&n.velocity).all(|v| v.is_finite())) {
                return Err(GraphError::Invariant(format!(
                    "snapshot {}: node {} has non-finite kinematics",
                    self.t, n.id
                )));
            }
        }
        let n = self.nodes.len();
        for (k, e) in self.edges.iter().enumerate() {
            let fail = |what: &str| {
                Err(GraphError::Invariant(format!(
                    "snapshot {}: edge {} ({}->{}) {}",
                    self.t, k, e.src, e.dst, what
                )))
            };
            if e.src >= n || e.dst >= n {
                return fail("references an unknown node");
            }
            if e.src == e.dst {
                return fail("is a self-loop");
            }
            if !(e.distance >= 0.0 && e.distance.is_finite()) {
                return fail("has a negative or non-finite distance");
            }
            if !(e.path_loss >= 0.0 && e.path_loss.is_finite()) {
                return fail("has a negative or non-finite path loss");
            }
            if !(e.prop_delay >= 0.0 && e.prop_delay.is_finite()) {
                return fail("has a negative or non-finite propagation delay");
            }
            if !(0.0..step_seconds).contains(&e.timestamp) {
                return fail("has a timestamp outside the step");
            }
        }
        Ok(())
    }

    pub fn max_speed(&self) -> f64 {
        self.nodes.iter().map(NodeState::speed).fold(0.0, f64::max)
    }

    /// Relabels node `i` as `perm[i]`. `perm` must be a permutation of `0..N`.
    pub fn permuted(&self, perm: &[usize]) -> Snapshot {
        assert_eq!(perm.len(), self.nodes.len(), "permutation length");
        let mut nodes = self.nodes.clone();
        for n in &self.nodes {
            nodes[perm[n.id]] = NodeState { id: perm[n.id], ..*n };
        }
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeRecord {
                src: perm[e.src],
                dst: perm[e.dst],
                ..*e
            })
            .collect();
        Snapshot {
            t: self.t,
            nodes,
            edges,
        }
    }
}

/// Header record of a snapshot stream.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub step_seconds: f64,
    pub n_nodes: usize,
    /// Command line and seed that produced the file.
    pub provenance: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub snapshots: Vec<Snapshot>,
}

impl Dataset {
    pub fn new(n_nodes: usize, snapshots: Vec<Snapshot>) -> Self {
        Self {
            header: DatasetHeader {
                format_version: super::io::FORMAT_VERSION,
                step_seconds: DEFAULT_STEP_SECONDS,
                n_nodes,
                provenance: None,
            },
            snapshots,
        }
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.header.provenance = Some(provenance.into());
        self
    }

    /// Validates every snapshot, the fixed node count and consecutive step indices.
    pub fn validate(&self) -> Result<(), GraphError> {
        for (k, s) in self.snapshots.iter().enumerate() {
            if s.nodes.len() != self.header.n_nodes {
                return Err(GraphError::Invariant(format!(
                    "snapshot {} has {} nodes, header says {}",
                    s.t,
                    s.nodes.len(),
                    self.header.n_nodes
                )));
            }
            if k > 0 && s.t != self.snapshots[k - 1].t + 1 {
                return Err(GraphError::Invariant(format!(
                    "snapshot indices not consecutive: {} follows {}",
                    s.t,
                    self.snapshots[k - 1].t
                )));
            }
            s.validate(self.header.step_seconds)?;
        }
        Ok(())
    }
}
