use std::sync::Arc;

use rand::Rng;

use super::layers::{Ctx, Linear, ACTIVATION_SLOPE, ATTENTION_SLOPE};
use super::{GraphInput, ModelError, SpatialKind};
use crate::diffcore::{ParamId, ParamStore, Tape, Tensor, Var};

/// Graph structure of one snapshot placed on a tape. Messages flow `src → dst`:
/// node `i` aggregates every record whose `dst` is `i`.
#[derive(Clone, Debug)]
pub struct EdgeVars {
    pub n: usize,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    /// `[E, D]` edge features, `None` when there are no records.
    pub e: Option<Var>,
    /// Column `k` of `e` as `[E, 1]`.
    pub e_cols: Vec<Var>,
    /// `[N, 1]`, `1 / max(in-degree, 1)`.
    pub inv_in_degree: Var,
}

impl EdgeVars {
    pub fn new(tape: &mut Tape, g: &GraphInput) -> Self {
        Self {
            n: g.n,
            src: g.src.clone(),
            dst: g.dst.clone(),
            e: g.edges.clone().map(|t| tape.constant(t)),
            e_cols: g.edge_columns.iter().map(|t| tape.constant(t.clone())).collect(),
            inv_in_degree: tape.constant(g.inv_in_degree.clone()),
        }
    }

    /// Builds the structure from raw parts; used for hand-built graphs.
    pub fn from_parts(tape: &mut Tape, n: usize, records: &[(usize, usize)], features: Option<Tensor>) -> Self {
        let mut indeg = vec![0usize; n];
        records.iter().for_each(|&(_, d)| indeg[d] += 1);
        let e_cols = match &features {
            Some(t) => (0..t.cols())
                .map(|k| tape.constant(Tensor::column((0..t.rows()).map(|r| t.at(r, k)).collect())))
                .collect(),
            None => Vec::new(),
        };
        Self {
            n,
            src: records.iter().map(|r| r.0).collect(),
            dst: records.iter().map(|r| r.1).collect(),
            e: features.map(|t| tape.constant(t)),
            e_cols,
            inv_in_degree: tape.constant(Tensor::column(indeg.iter().map(|&d| 1.0 / d.max(1) as f64).collect())),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }

    fn has_edges(&self) -> bool {
        !self.src.is_empty() && self.e.is_some()
    }
}

/// Softmax-normalised attention per head plus the aggregated messages.
struct Attended {
    /// `[N, heads·d]` weighted message sums.
    aggregate: Var,
    /// Per head, `[E, 1]` attention coefficients.
    alphas: Vec<Var>,
}

/// Applies per-head scores to per-head messages and sums them into destinations.
fn attend(
    tape: &mut Tape,
    g: &EdgeVars,
    scores: Vec<Var>,
    messages: Var,
    head_dim: usize,
) -> Result<Attended, ModelError> {
    let mut parts = Vec::with_capacity(scores.len());
    let mut alphas = Vec::with_capacity(scores.len());
    for (h, s) in scores.into_iter().enumerate() {
        let alpha = tape.segment_softmax(s, g.dst.clone(), g.n)?;
        let m = tape.slice_cols(messages, h * head_dim, head_dim)?;
        parts.push(tape.scale_rows(m, alpha)?);
        alphas.push(alpha);
    }
    let weighted = tape.concat_cols(&parts)?;
    let aggregate = tape.scatter_add_rows(weighted, g.dst.clone(), g.n)?;
    Ok(Attended { aggregate, alphas })
}

/// Graph transformer convolution. Per head, with `d` the head width:
/// `x'_i = W1 x_i + Σ_j α_ij (W2 x_j + W3 e_ij)`,
/// `α_ij = softmax_j((W4 x_i)·(W5 x_j + W6 e_ij) / √d)`.
/// Heads are concatenated and linearly projected.
#[derive(Clone, Debug)]
pub struct GtcLayer {
    pub w1: Linear,
    pub w2: Linear,
    pub w3: Linear,
    pub w4: Linear,
    pub w5: Linear,
    pub w6: Linear,
    pub proj: Linear,
    pub heads: usize,
    pub head_dim: usize,
}

impl GtcLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        edge_dim: usize,
        hidden: usize,
        heads: usize,
        output: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let mut lin = |suffix: &str, fan_in: usize, bias: bool| Linear::new(store, &format!("{name}.{suffix}"), fan_in, hidden, bias, rng);
        let (w1, w2, w3) = (lin("w1", input, true)?, lin("w2", input, false)?, lin("w3", edge_dim, false)?);
        let (w4, w5, w6) = (lin("w4", input, false)?, lin("w5", input, false)?, lin("w6", edge_dim, false)?);
        let proj = Linear::new(store, &format!("{name}.proj"), hidden, output, true, rng)?;
        Ok(Self {
            w1,
            w2,
            w3,
            w4,
            w5,
            w6,
            proj,
            heads,
            head_dim: hidden / heads,
        })
    }

    /// Concatenated head outputs before projection, and each head's attention column.
    pub fn forward_heads(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &EdgeVars,
        x: Var,
    ) -> Result<(Var, Vec<Var>), ModelError> {
        let root = self.w1.forward(tape, store, x)?;
        if !g.has_edges() {
            return Ok((root, Vec::new()));
        }
        let e = g.e.expect("edges present");
        let value_x = self.w2.forward(tape, store, x)?;
        let value_x = tape.gather_rows(value_x, g.src.clone())?;
        let value_e = self.w3.forward(tape, store, e)?;
        let values = tape.add(value_x, value_e)?;
        let query = self.w4.forward(tape, store, x)?;
        let query = tape.gather_rows(query, g.dst.clone())?;
        let key_x = self.w5.forward(tape, store, x)?;
        let key_x = tape.gather_rows(key_x, g.src.clone())?;
        let key_e = self.w6.forward(tape, store, e)?;
        let keys = tape.add(key_x, key_e)?;
        let d = self.head_dim;
        let scale = 1.0 / (d as f64).sqrt();
        let mut scores = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let q = tape.slice_cols(query, h * d, d)?;
            let k = tape.slice_cols(keys, h * d, d)?;
            let s = tape.row_dot(q, k)?;
            scores.push(tape.scale(s, scale)?);
        }
        let att = attend(tape, g, scores, values, d)?;
        let out = tape.add(root, att.aggregate)?;
        Ok((out, att.alphas))
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, g: &EdgeVars, x: Var) -> Result<Var, ModelError> {
        let (h, _) = self.forward_heads(tape, store, g, x)?;
        self.proj.forward(tape, store, h)
    }
}

/// Edge-conditioned convolution with mean aggregation:
/// `x'_i = R x_i + b + mean_j (B x_j + Σ_k e_ij[k] Θ_k x_j)`.
#[derive(Clone, Debug)]
pub struct GcnLayer {
    pub root: Linear,
    pub base: Linear,
    pub filters: Vec<Linear>,
}

impl GcnLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        edge_dim: usize,
        output: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let root = Linear::new(store, &format!("{name}.root"), input, output, true, rng)?;
        let base = Linear::new(store, &format!("{name}.base"), input, output, false, rng)?;
        let filters = (0..edge_dim)
            .map(|k| Linear::new(store, &format!("{name}.theta{k}"), input, output, false, rng))
            .collect::<Result<_, _>>()?;
        Ok(Self { root, base, filters })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, g: &EdgeVars, x: Var) -> Result<Var, ModelError> {
        let root = self.root.forward(tape, store, x)?;
        if !g.has_edges() {
            return Ok(root);
        }
        let base = self.base.forward(tape, store, x)?;
        let mut msg = tape.gather_rows(base, g.src.clone())?;
        for (theta, &col) in self.filters.iter().zip(&g.e_cols) {
            let t = theta.forward(tape, store, x)?;
            let t = tape.gather_rows(t, g.src.clone())?;
            let t = tape.scale_rows(t, col)?;
            msg = tape.add(msg, t)?;
        }
        let sum = tape.scatter_add_rows(msg, g.dst.clone(), g.n)?;
        let mean = tape.scale_rows(sum, g.inv_in_degree)?;
        Ok(tape.add(root, mean)?)
    }
}

/// Per-head attention vector parameters, each `[d, 1]`.
fn head_vectors<R: Rng + ?Sized>(
    store: &mut ParamStore,
    name: &str,
    heads: usize,
    d: usize,
    rng: &mut R,
) -> Result<Vec<ParamId>, ModelError> {
    (0..heads)
        .map(|h| Ok(store.add_glorot(format!("{name}{h}"), d, 1, rng)?))
        .collect()
}

/// GAT: `score = leaky(a_dst·W x_i + a_src·W x_j + a_e·W_e e_ij)`, message `W x_j`,
/// plus a root term `R x_i + b`.
#[derive(Clone, Debug)]
pub struct GatLayer {
    pub w: Linear,
    pub w_edge: Option<Linear>,
    pub a_dst: Vec<ParamId>,
    pub a_src: Vec<ParamId>,
    pub a_edge: Vec<ParamId>,
    pub root: Linear,
    pub proj: Linear,
    pub heads: usize,
    pub head_dim: usize,
}

impl GatLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        edge_dim: Option<usize>,
        hidden: usize,
        heads: usize,
        output: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let d = hidden / heads;
        let w = Linear::new(store, &format!("{name}.w"), input, hidden, false, rng)?;
        let w_edge = edge_dim
            .map(|de| Linear::new(store, &format!("{name}.w_edge"), de, hidden, false, rng))
            .transpose()?;
        let a_dst = head_vectors(store, &format!("{name}.a_dst"), heads, d, rng)?;
        let a_src = head_vectors(store, &format!("{name}.a_src"), heads, d, rng)?;
        let a_edge = if edge_dim.is_some() {
            head_vectors(store, &format!("{name}.a_edge"), heads, d, rng)?
        } else {
            Vec::new()
        };
        let root = Linear::new(store, &format!("{name}.root"), input, hidden, true, rng)?;
        let proj = Linear::new(store, &format!("{name}.proj"), hidden, output, true, rng)?;
        Ok(Self {
            w,
            w_edge,
            a_dst,
            a_src,
            a_edge,
            root,
            proj,
            heads,
            head_dim: d,
        })
    }

    pub fn forward_heads(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &EdgeVars,
        x: Var,
    ) -> Result<(Var, Vec<Var>), ModelError> {
        let root = self.root.forward(tape, store, x)?;
        if !g.has_edges() {
            return Ok((root, Vec::new()));
        }
        let h = self.w.forward(tape, store, x)?;
        let he = match &self.w_edge {
            Some(w) => Some(w.forward(tape, store, g.e.expect("edges present"))?),
            None => None,
        };
        let d = self.head_dim;
        let mut scores = Vec::with_capacity(self.heads);
        for k in 0..self.heads {
            let hk = tape.slice_cols(h, k * d, d)?;
            let a_dst = tape.param(store, self.a_dst[k]);
            let a_src = tape.param(store, self.a_src[k]);
            let sd = tape.matmul(hk, a_dst)?;
            let sd = tape.gather_rows(sd, g.dst.clone())?;
            let ss = tape.matmul(hk, a_src)?;
            let ss = tape.gather_rows(ss, g.src.clone())?;
            let mut s = tape.add(sd, ss)?;
            if let Some(he) = he {
                let ek = tape.slice_cols(he, k * d, d)?;
                let a_e = tape.param(store, self.a_edge[k]);
                let se = tape.matmul(ek, a_e)?;
                s = tape.add(s, se)?;
            }
            scores.push(tape.leaky_relu(s, ATTENTION_SLOPE)?);
        }
        let messages = tape.gather_rows(h, g.src.clone())?;
        let att = attend(tape, g, scores, messages, d)?;
        Ok((tape.add(root, att.aggregate)?, att.alphas))
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, g: &EdgeVars, x: Var) -> Result<Var, ModelError> {
        let (h, _) = self.forward_heads(tape, store, g, x)?;
        self.proj.forward(tape, store, h)
    }
}

/// GATv2: `score = a·leaky(W_l x_i + W_r x_j + W_e e_ij)`, message `W_r x_j`,
/// plus a root term `R x_i + b`.
#[derive(Clone, Debug)]
pub struct Gatv2Layer {
    pub w_dst: Linear,
    pub w_src: Linear,
    pub w_edge: Option<Linear>,
    pub a: Vec<ParamId>,
    pub root: Linear,
    pub proj: Linear,
    pub heads: usize,
    pub head_dim: usize,
}

impl Gatv2Layer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        edge_dim: Option<usize>,
        hidden: usize,
        heads: usize,
        output: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let d = hidden / heads;
        let w_dst = Linear::new(store, &format!("{name}.w_dst"), input, hidden, false, rng)?;
        let w_src = Linear::new(store, &format!("{name}.w_src"), input, hidden, false, rng)?;
        let w_edge = edge_dim
            .map(|de| Linear::new(store, &format!("{name}.w_edge"), de, hidden, false, rng))
            .transpose()?;
        let a = head_vectors(store, &format!("{name}.a"), heads, d, rng)?;
        let root = Linear::new(store, &format!("{name}.root"), input, hidden, true, rng)?;
        let proj = Linear::new(store, &format!("{name}.proj"), hidden, output, true, rng)?;
        Ok(Self {
            w_dst,
            w_src,
            w_edge,
            a,
            root,
            proj,
            heads,
            head_dim: d,
        })
    }

    pub fn forward_heads(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &EdgeVars,
        x: Var,
    ) -> Result<(Var, Vec<Var>), ModelError> {
        let root = self.root.forward(tape, store, x)?;
        if !g.has_edges() {
            return Ok((root, Vec::new()));
        }
        let l = self.w_dst.forward(tape, store, x)?;
        let l = tape.gather_rows(l, g.dst.clone())?;
        let r = self.w_src.forward(tape, store, x)?;
        let r = tape.gather_rows(r, g.src.clone())?;
        let mut pre = tape.add(l, r)?;
        if let Some(w) = &self.w_edge {
            let he = w.forward(tape, store, g.e.expect("edges present"))?;
            pre = tape.add(pre, he)?;
        }
        let act = tape.leaky_relu(pre, ATTENTION_SLOPE)?;
        let d = self.head_dim;
        let mut scores = Vec::with_capacity(self.heads);
        for k in 0..self.heads {
            let ak = tape.slice_cols(act, k * d, d)?;
            let a = tape.param(store, self.a[k]);
            scores.push(tape.matmul(ak, a)?);
        }
        let att = attend(tape, g, scores, r, d)?;
        Ok((tape.add(root, att.aggregate)?, att.alphas))
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, g: &EdgeVars, x: Var) -> Result<Var, ModelError> {
        let (h, _) = self.forward_heads(tape, store, g, x)?;
        self.proj.forward(tape, store, h)
    }
}

#[derive(Clone, Debug)]
pub enum SpatialLayer {
    Gcn(GcnLayer),
    Gat(GatLayer),
    Gatv2(Gatv2Layer),
    Gtc(GtcLayer),
}

impl SpatialLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        kind: SpatialKind,
        store: &mut ParamStore,
        name: &str,
        input: usize,
        edge_dim: usize,
        hidden: usize,
        heads: usize,
        output: usize,
        attention_edges: bool,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let att_edge = attention_edges.then_some(edge_dim);
        Ok(match kind {
            SpatialKind::Gcn => Self::Gcn(GcnLayer::new(store, name, input, edge_dim, output, rng)?),
            SpatialKind::Gat => Self::Gat(GatLayer::new(store, name, input, att_edge, hidden, heads, output, rng)?),
            SpatialKind::Gatv2 => {
                Self::Gatv2(Gatv2Layer::new(store, name, input, att_edge, hidden, heads, output, rng)?)
            }
            SpatialKind::Gtc => Self::Gtc(GtcLayer::new(store, name, input, edge_dim, hidden, heads, output, rng)?),
            SpatialKind::None => return Err(ModelError::Config("no spatial layer of kind none".into())),
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, g: &EdgeVars, x: Var) -> Result<Var, ModelError> {
        match self {
            Self::Gcn(l) => l.forward(tape, store, g, x),
            Self::Gat(l) => l.forward(tape, store, g, x),
            Self::Gatv2(l) => l.forward(tape, store, g, x),
            Self::Gtc(l) => l.forward(tape, store, g, x),
        }
    }

    /// Attention coefficients per head (`[E, 1]` each); empty for GCN.
    pub fn attention(&self, tape: &mut Tape, store: &ParamStore, g: &EdgeVars, x: Var) -> Result<Vec<Var>, ModelError> {
        Ok(match self {
            Self::Gcn(_) => Vec::new(),
            Self::Gat(l) => l.forward_heads(tape, store, g, x)?.1,
            Self::Gatv2(l) => l.forward_heads(tape, store, g, x)?.1,
            Self::Gtc(l) => l.forward_heads(tape, store, g, x)?.1,
        })
    }
}

/// Stack of spatial layers, each followed by leaky-ReLU and dropout.
#[derive(Clone, Debug)]
pub struct SpatialEncoder {
    pub layers: Vec<SpatialLayer>,
}

impl SpatialEncoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        kind: SpatialKind,
        store: &mut ParamStore,
        input: usize,
        edge_dim: usize,
        layers: usize,
        hidden: usize,
        heads: usize,
        output: usize,
        attention_edges: bool,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let mut out = Vec::with_capacity(layers);
        for l in 0..layers {
            let fan_in = if l == 0 { input } else { hidden };
            let width = if l + 1 == layers { output } else { hidden };
            out.push(SpatialLayer::new(
                kind,
                store,
                &format!("spatial.{l}"),
                fan_in,
                edge_dim,
                hidden,
                heads,
                width,
                attention_edges,
                rng,
            )?);
        }
        Ok(Self { layers: out })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &EdgeVars,
        x: Var,
        ctx: &mut Ctx,
    ) -> Result<Var, ModelError> {
        let mut h = x;
        for layer in &self.layers {
            h = layer.forward(tape, store, g, h)?;
            h = tape.leaky_relu(h, ACTIVATION_SLOPE)?;
            h = ctx.dropout(tape, h)?;
        }
        Ok(h)
    }
}
