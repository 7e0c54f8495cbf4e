//! Link-prediction networks: spatial graph encoders, recurrent temporal
//! encoders, the pair decoder, and pair-feature baselines.

mod check;
mod config;
mod features;
pub mod layers;
mod model;
pub mod spatial;

use thiserror::Error;

use crate::diffcore::DiffError;

pub use check::{gradient_suite, GradCheckOutcome, GRADCHECK_EPS};
pub use config::{Architecture, ModelConfig, NodeFeatureSet, SpatialKind, TemporalKind};
pub use features::{FeatureScaler, GraphInput, PairIndex, EDGE_DIM};
pub use layers::{Ctx, GruCell, LstmCell, PairDecoder};
pub use model::{sidecar_path, sigmoid, Model, Prepared};
pub use spatial::{EdgeVars, GatLayer, Gatv2Layer, GcnLayer, GtcLayer, SpatialEncoder, SpatialLayer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model config: {0}")]
    Config(String),
    #[error("model input: {0}")]
    Input(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("sidecar: {0}")]
    Json(#[from] serde_json::Error),
}
