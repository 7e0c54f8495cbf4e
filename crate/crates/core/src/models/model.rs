use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Ctx, Mlp, PairDecoder, Recurrent};
use super::spatial::{EdgeVars, SpatialEncoder};
use super::{Architecture, FeatureScaler, GraphInput, ModelConfig, ModelError, PairIndex, SpatialKind, TemporalKind, EDGE_DIM};
use crate::diffcore::{Checkpoint, ParamStore, Tape, Var};
use crate::graph::Snapshot;

/// Snapshots of a dataset converted once into model inputs.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub graphs: Vec<GraphInput>,
    /// Baseline pair features per snapshot; empty unless requested.
    pub pair_features: Vec<crate::diffcore::Tensor>,
}

impl Prepared {
    pub fn new(snapshots: &[Snapshot], scaler: &FeatureScaler, with_pairs: bool) -> Result<Self, ModelError> {
        let graphs = snapshots
            .iter()
            .map(|s| GraphInput::new(s, scaler))
            .collect::<Result<Vec<_>, _>>()?;
        let pair_features = if with_pairs {
            graphs.iter().map(GraphInput::pair_features).collect::<Result<_, _>>()?
        } else {
            Vec::new()
        };
        Ok(Self { graphs, pair_features })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

#[derive(Clone, Debug)]
enum Net {
    Stged {
        spatial: Option<SpatialEncoder>,
        temporal: Option<Recurrent>,
        decoder: PairDecoder,
    },
    Mlp(Mlp),
    Recurrent {
        rnn: Recurrent,
        head: Mlp,
    },
}

/// A link predictor: parameters, feature scaling and architecture.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub scaler: FeatureScaler,
    pub store: ParamStore,
    net: Net,
}

impl Model {
    pub fn new(config: ModelConfig, scaler: FeatureScaler, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if scaler.node_features != config.node_features {
            return Err(ModelError::Config(format!(
                "scaler built for {:?} but model expects {:?}",
                scaler.node_features, config.node_features
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let f = config.node_features.dim();
        let c = &config;
        let net = match c.architecture {
            Architecture::Stged => {
                let spatial = match c.spatial_kind {
                    SpatialKind::None => None,
                    kind => Some(SpatialEncoder::new(
                        kind,
                        &mut store,
                        f,
                        EDGE_DIM,
                        c.spatial_layers,
                        c.spatial_hidden,
                        c.attention_heads,
                        c.embedding_size,
                        c.attention_edge_features,
                        &mut rng,
                    )?),
                };
                let step_dim = if spatial.is_some() { c.embedding_size } else { f };
                let temporal = match c.temporal_kind {
                    TemporalKind::None => None,
                    t => Some(Recurrent::new(
                        &mut store,
                        "temporal",
                        t == TemporalKind::Lstm,
                        step_dim,
                        c.temporal_hidden,
                        c.temporal_layers,
                        &mut rng,
                    )?),
                };
                let decoder = PairDecoder::new(&mut store, "decoder", c.z_dim(f), &c.mlp_hidden, &mut rng)?;
                Net::Stged {
                    spatial,
                    temporal,
                    decoder,
                }
            }
            Architecture::Mlp => Net::Mlp(Mlp::new(
                &mut store,
                "mlp",
                c.window * GraphInput::pair_dim(f),
                &c.mlp_hidden,
                1,
                &mut rng,
            )?),
            Architecture::Lstm | Architecture::Gru => Net::Recurrent {
                rnn: Recurrent::new(
                    &mut store,
                    "rnn",
                    c.architecture == Architecture::Lstm,
                    GraphInput::pair_dim(f),
                    c.temporal_hidden,
                    c.temporal_layers,
                    &mut rng,
                )?,
                head: Mlp::new(&mut store, "head", c.temporal_hidden, &c.mlp_hidden, 1, &mut rng)?,
            },
        };
        Ok(Self {
            config,
            scaler,
            store,
            net,
        })
    }

    pub fn name(&self) -> String {
        self.config.model_name()
    }

    pub fn needs_pair_features(&self) -> bool {
        !matches!(self.net, Net::Stged { .. })
    }

    /// Node embeddings `Z` (`[N, z]`) of a window of graphs.
    pub fn encode(&self, tape: &mut Tape, graphs: &[&GraphInput], ctx: &mut Ctx) -> Result<Var, ModelError> {
        self.encode_with(&self.store, tape, graphs, ctx)
    }

    /// As [`Model::encode`] but reading parameter values from `store`, which
    /// must have the model's layout.
    pub fn encode_with(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        graphs: &[&GraphInput],
        ctx: &mut Ctx,
    ) -> Result<Var, ModelError> {
        let Net::Stged { spatial, temporal, .. } = &self.net else {
            return Err(ModelError::Config(format!("{} has no node encoder", self.name())));
        };
        check_window(graphs, self.config.window)?;
        // Without a temporal encoder only the most recent snapshot matters.
        let steps = if temporal.is_some() { graphs } else { &graphs[graphs.len() - 1..] };
        let mut seq = Vec::with_capacity(steps.len());
        for g in steps {
            let x = tape.constant(g.x.clone());
            seq.push(match spatial {
                Some(enc) => {
                    let ev = EdgeVars::new(tape, g);
                    enc.forward(tape, store, &ev, x, ctx)?
                }
                None => x,
            });
        }
        match temporal {
            Some(rnn) => rnn.forward(tape, store, &seq, ctx),
            None => Ok(seq[0]),
        }
    }

    /// `[P, 1]` logits for `pairs` given the window starting at snapshot `start`.
    pub fn logits(
        &self,
        tape: &mut Tape,
        data: &Prepared,
        start: usize,
        pairs: &PairIndex,
        ctx: &mut Ctx,
    ) -> Result<Var, ModelError> {
        self.logits_with(&self.store, tape, data, start, pairs, ctx)
    }

    pub fn logits_with(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        data: &Prepared,
        start: usize,
        pairs: &PairIndex,
        ctx: &mut Ctx,
    ) -> Result<Var, ModelError> {
        let w = self.config.window;
        if start + w > data.len() {
            return Err(ModelError::Input(format!(
                "window {start}..{} exceeds {} snapshots",
                start + w,
                data.len()
            )));
        }
        if pairs.is_empty() {
            return Err(ModelError::Input("no pairs to score".into()));
        }
        let graphs: Vec<&GraphInput> = data.graphs[start..start + w].iter().collect();
        match &self.net {
            Net::Stged { decoder, .. } => {
                let z = self.encode_with(store, tape, &graphs, ctx)?;
                decoder.forward(tape, store, z, &pairs.src, &pairs.dst, ctx)
            }
            Net::Mlp(mlp) => {
                let steps = self.pair_steps(tape, data, &graphs, start, pairs)?;
                let x = tape.concat_cols(&steps)?;
                mlp.forward(tape, store, x, ctx)
            }
            Net::Recurrent { rnn, head } => {
                let steps = self.pair_steps(tape, data, &graphs, start, pairs)?;
                let h = rnn.forward(tape, store, &steps, ctx)?;
                let h = ctx.dropout(tape, h)?;
                head.forward(tape, store, h, ctx)
            }
        }
    }

    fn pair_steps(
        &self,
        tape: &mut Tape,
        data: &Prepared,
        graphs: &[&GraphInput],
        start: usize,
        pairs: &PairIndex,
    ) -> Result<Vec<Var>, ModelError> {
        check_window(graphs, self.config.window)?;
        if data.pair_features.len() != data.len() {
            return Err(ModelError::Input(format!("{} needs pair features", self.name())));
        }
        let n = graphs[0].n;
        let rows: Arc<[usize]> = pairs
            .src
            .iter()
            .zip(pairs.dst.iter())
            .map(|(&i, &j)| {
                if i == j || i >= n || j >= n {
                    Err(ModelError::Input(format!("invalid pair ({i}, {j})")))
                } else {
                    Ok(PairIndex::dense_position(n, i, j))
                }
            })
            .collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(graphs.len());
        for t in start..start + graphs.len() {
            let all = tape.constant(data.pair_features[t].clone());
            out.push(tape.gather_rows(all, rows.clone())?);
        }
        Ok(out)
    }

    /// Scores `σ(logit)` for every ordered pair in [`PairIndex::all`] order.
    pub fn predict(&self, data: &Prepared, start: usize) -> Result<Vec<f64>, ModelError> {
        let n = data
            .graphs
            .get(start)
            .ok_or_else(|| ModelError::Input(format!("no snapshot {start}")))?
            .n;
        let pairs = PairIndex::all(n);
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, data, start, &pairs, &mut Ctx::eval())?;
        Ok(tape.value(logits).data().iter().map(|&z| sigmoid(z)).collect())
    }

    /// Decision rule: linked iff `score > tau`.
    pub fn decide(&self, score: f64) -> bool {
        score > self.config.tau
    }

    pub fn save(&self, path: impl AsRef<Path>, provenance: &str) -> Result<(), ModelError> {
        let path = path.as_ref();
        let ckpt = Checkpoint::from_store(&self.store, provenance);
        fs::write(path, ckpt.to_bytes())?;
        let sidecar = Sidecar {
            provenance: provenance.to_string(),
            config: self.config.clone(),
            scaler: self.scaler.clone(),
        };
        let mut text = serde_json::to_string_pretty(&sidecar)?;
        text.push('\n');
        fs::write(sidecar_path(path), text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let side = sidecar_path(path);
        let text = fs::read_to_string(&side)
            .map_err(|e| ModelError::Input(format!("cannot read {}: {e}", side.display())))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        let mut model = Model::new(sidecar.config, sidecar.scaler, 0)?;
        let file =
            fs::File::open(path).map_err(|e| ModelError::Input(format!("cannot read {}: {e}", path.display())))?;
        let ckpt = Checkpoint::read_from(std::io::BufReader::new(file))?;
        ckpt.apply(&mut model.store)?;
        Ok(model)
    }
}

/// `model.ckpt` → `model.ckpt.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    provenance: String,
    config: ModelConfig,
    scaler: FeatureScaler,
}

fn check_window(graphs: &[&GraphInput], w: usize) -> Result<(), ModelError> {
    if graphs.len() != w {
        return Err(ModelError::Input(format!("expected {w} snapshots, got {}", graphs.len())));
    }
    let n = graphs[0].n;
    if let Some(g) = graphs.iter().find(|g| g.n != n) {
        return Err(ModelError::Input(format!(
            "node count changes within a window ({n} vs {})",
            g.n
        )));
    }
    Ok(())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
