use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialKind {
    None,
    Gcn,
    Gat,
    Gatv2,
    Gtc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalKind {
    None,
    Lstm,
    Gru,
}

/// Which network family a model belongs to: the graph encoder-decoder or one of
/// the pair-feature baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Stged,
    Mlp,
    Lstm,
    Gru,
}

/// Node features fed to the spatial encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFeatureSet {
    Velocity,
    VelocityPosition,
}

impl NodeFeatureSet {
    pub fn dim(self) -> usize {
        match self {
            Self::Velocity => 2,
            Self::VelocityPosition => 4,
        }
    }
}

impl SpatialKind {
    pub const ALL: [SpatialKind; 5] = [Self::None, Self::Gcn, Self::Gat, Self::Gatv2, Self::Gtc];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Gcn => "gcn",
            Self::Gat => "gat",
            Self::Gatv2 => "gatv2",
            Self::Gtc => "gtc",
        }
    }
}

impl TemporalKind {
    pub const ALL: [TemporalKind; 3] = [Self::None, Self::Lstm, Self::Gru];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Lstm => "lstm",
            Self::Gru => "gru",
        }
    }
}

impl FromStr for SpatialKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown spatial kind {s:?}")))
    }
}

impl FromStr for TemporalKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown temporal kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub spatial_kind: SpatialKind,
    pub temporal_kind: TemporalKind,
    pub spatial_layers: usize,
    pub spatial_hidden: usize,
    pub attention_heads: usize,
    /// Width of each node's spatial encoding.
    pub embedding_size: usize,
    pub temporal_layers: usize,
    pub temporal_hidden: usize,
    /// Hidden widths of the pair decoder (and of the MLP baseline).
    pub mlp_hidden: Vec<usize>,
    pub dropout: f64,
    pub tau: f64,
    /// Snapshots per input window.
    pub window: usize,
    pub node_features: NodeFeatureSet,
    /// Whether GAT/GATv2 attention scores see edge features.
    pub attention_edge_features: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ModelConfig {
    /// Small widths that train on one CPU core in minutes.
    pub fn desk() -> Self {
        Self {
            architecture: Architecture::Stged,
            spatial_kind: SpatialKind::Gtc,
            temporal_kind: TemporalKind::Lstm,
            spatial_layers: 2,
            spatial_hidden: 64,
            attention_heads: 4,
            embedding_size: 64,
            temporal_layers: 2,
            temporal_hidden: 128,
            mlp_hidden: vec![64],
            dropout: 0.2,
            tau: 0.5,
            window: 5,
            node_features: NodeFeatureSet::VelocityPosition,
            attention_edge_features: true,
        }
    }

    /// Published widths; far too large for desk-scale runs.
    pub fn paper() -> Self {
        Self {
            spatial_hidden: 1024,
            attention_heads: 128,
            embedding_size: 1024,
            temporal_hidden: 2048,
            mlp_hidden: vec![1024],
            node_features: NodeFeatureSet::Velocity,
            ..Self::desk()
        }
    }

    /// Parses names such as `gtc-lstm`, `gcn` (no temporal encoder),
    /// `none-gru` (no spatial encoder) and the baselines `mlp`, `lstm`, `gru`.
    pub fn with_model_name(mut self, name: &str) -> Result<Self, ModelError> {
        match name {
            "mlp" => self.architecture = Architecture::Mlp,
            "lstm" => self.architecture = Architecture::Lstm,
            "gru" => self.architecture = Architecture::Gru,
            _ => {
                let (s, t) = name.split_once('-').unwrap_or((name, "none"));
                self.architecture = Architecture::Stged;
                self.spatial_kind = s.parse()?;
                self.temporal_kind = t.parse()?;
            }
        }
        Ok(self)
    }

    pub fn model_name(&self) -> String {
        match self.architecture {
            Architecture::Mlp => "mlp".into(),
            Architecture::Lstm => "lstm".into(),
            Architecture::Gru => "gru".into(),
            Architecture::Stged => match self.temporal_kind {
                TemporalKind::None => self.spatial_kind.name().into(),
                t => format!("{}-{}", self.spatial_kind.name(), t.name()),
            },
        }
    }

    /// Width of the per-node embedding handed to the pair decoder.
    pub fn z_dim(&self, node_dim: usize) -> usize {
        match (self.temporal_kind, self.spatial_kind) {
            (TemporalKind::None, SpatialKind::None) => node_dim,
            (TemporalKind::None, _) => self.embedding_size,
            _ => self.temporal_hidden,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau {} outside (0, 1)", self.tau));
        }
        if self.mlp_hidden.contains(&0) {
            return bad("mlp_hidden widths must be positive".into());
        }
        let recurrent = matches!(self.architecture, Architecture::Lstm | Architecture::Gru)
            || (self.architecture == Architecture::Stged && self.temporal_kind != TemporalKind::None);
        if recurrent && (self.temporal_layers == 0 || self.temporal_hidden == 0) {
            return bad("temporal encoder needs at least one layer of positive width".into());
        }
        if self.architecture == Architecture::Stged && self.spatial_kind != SpatialKind::None {
            if self.spatial_layers == 0 || self.spatial_hidden == 0 || self.embedding_size == 0 {
                return bad("spatial encoder needs at least one layer of positive width".into());
            }
            if self.attention_heads == 0 || !self.spatial_hidden.is_multiple_of(self.attention_heads) {
                return bad(format!(
                    "spatial_hidden {} is not divisible by attention_heads {}",
                    self.spatial_hidden, self.attention_heads
                ));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.model_name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in ["gtc-lstm", "gcn", "gat-gru", "gatv2", "none-lstm", "mlp", "lstm", "gru"] {
            let c = ModelConfig::desk().with_model_name(name).unwrap();
            assert_eq!(c.model_name(), name);
        }
        assert!(ModelConfig::desk().with_model_name("sage").is_err());
        assert!(ModelConfig::desk().with_model_name("gtc-rnn").is_err());
    }

    #[test]
    fn heads_must_divide_width() {
        let c = ModelConfig {
            spatial_hidden: 10,
            attention_heads: 4,
            ..ModelConfig::desk()
        };
        assert!(c.validate().is_err());
        ModelConfig::desk().validate().unwrap();
        ModelConfig::paper().validate().unwrap();
        assert!(ModelConfig { dropout: 1.0, ..ModelConfig::desk() }.validate().is_err());
        assert!(ModelConfig { tau: 1.0, ..ModelConfig::desk() }.validate().is_err());
    }
}
