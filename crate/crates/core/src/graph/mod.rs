//! Temporal tactical-network data model: snapshots, windows, connectivity
//! labels, hop-count analytics and the snapshot stream file format.

mod connectivity;
pub mod io;
mod stats;
mod types;
mod window;

use thiserror::Error;

pub use connectivity::{
    hop_counts, hops_from_connectivity, label_connectivity, ConnectivityMatrix, HopMatrix, DEFAULT_THRESHOLD_DB,
};
pub use io::{load_dataset, load_published_dataset, read_dataset, save_dataset, write_dataset};
pub use stats::{DatasetStats, FeatureStat, EDGE_FEATURE_NAMES, NODE_FEATURE_NAMES};
pub use types::{Dataset, DatasetHeader, EdgeRecord, NodeState, Snapshot, DEFAULT_STEP_SECONDS};
pub use window::{build_windows, TemporalWindow};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("need at least {required} snapshots, got {len}")]
    TooFewSnapshots { len: usize, required: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
