use std::sync::Arc;

use rand::{Rng, RngCore};

use super::ModelError;
use crate::diffcore::{ParamId, ParamStore, Tape, Tensor, Var};

/// Negative slope of hidden-layer activations.
pub const ACTIVATION_SLOPE: f64 = 0.01;
/// Negative slope inside GAT/GATv2 attention scores.
pub const ATTENTION_SLOPE: f64 = 0.2;

/// Forward-pass mode. Training draws inverted-dropout masks from the supplied RNG.
pub struct Ctx<'a> {
    rng: Option<&'a mut dyn RngCore>,
    p: f64,
}

impl<'a> Ctx<'a> {
    pub fn eval() -> Self {
        Self { rng: None, p: 0.0 }
    }

    pub fn train(rng: &'a mut dyn RngCore, p: f64) -> Self {
        Self { rng: Some(rng), p }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn dropout(&mut self, tape: &mut Tape, v: Var) -> Result<Var, ModelError> {
        let Some(rng) = self.rng.as_deref_mut() else {
            return Ok(v);
        };
        if self.p <= 0.0 {
            return Ok(v);
        }
        let keep = 1.0 / (1.0 - self.p);
        let shape = tape.shape(v).to_vec();
        let len = shape.iter().product();
        let mask = (0..len)
            .map(|_| if rng.random::<f64>() < self.p { 0.0 } else { keep })
            .collect();
        Ok(tape.dropout(v, Tensor::new(shape, mask)?)?)
    }
}

/// `y = x W (+ b)`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let w = store.add_glorot(format!("{name}.w"), fan_in, fan_out, rng)?;
        let b = if bias {
            Some(store.add_zeros(format!("{name}.b"), &[fan_out])?)
        } else {
            None
        };
        Ok(Self { w, b })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, ModelError> {
        let w = tape.param(store, self.w);
        let y = tape.matmul(x, w)?;
        Ok(match self.b {
            Some(b) => {
                let b = tape.param(store, b);
                tape.add_row(y, b)?
            }
            None => y,
        })
    }

    pub fn out_dim(&self, store: &ParamStore) -> usize {
        store.value(self.w).cols()
    }
}

/// Hidden layers with leaky-ReLU and dropout followed by a linear output layer.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: &[usize],
        output: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let mut layers = Vec::new();
        let mut width = input;
        for (k, &h) in hidden.iter().chain(std::iter::once(&output)).enumerate() {
            layers.push(Linear::new(store, &format!("{name}.{k}"), width, h, true, rng)?);
            width = h;
        }
        Ok(Self { layers })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, ctx: &mut Ctx) -> Result<Var, ModelError> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h)?;
            if k < last {
                h = tape.leaky_relu(h, ACTIVATION_SLOPE)?;
                h = ctx.dropout(tape, h)?;
            }
        }
        Ok(h)
    }
}

/// Pair decoder: an MLP on `[z_i ‖ z_j]` returning one logit per pair.
/// The first layer is split as `z_i A + z_j B`, which equals the concatenated
/// product but is evaluated once per node rather than once per pair.
#[derive(Clone, Debug)]
pub struct PairDecoder {
    pub first_src: ParamId,
    pub first_dst: ParamId,
    pub first_bias: ParamId,
    pub rest: Vec<Linear>,
}

impl PairDecoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        z_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let widths: Vec<usize> = hidden.iter().copied().chain(std::iter::once(1)).collect();
        // Glorot limits follow the concatenated [2·z_dim, h] matrix.
        let limit = (6.0 / (2 * z_dim + widths[0]) as f64).sqrt();
        let mut half = |suffix: &str| -> Result<ParamId, ModelError> {
            let data = (0..z_dim * widths[0]).map(|_| rng.random_range(-limit..limit)).collect();
            Ok(store.add(format!("{name}.0.{suffix}"), Tensor::new(vec![z_dim, widths[0]], data)?)?)
        };
        let first_src = half("w_src")?;
        let first_dst = half("w_dst")?;
        let first_bias = store.add_zeros(format!("{name}.0.b"), &[widths[0]])?;
        let mut rest = Vec::new();
        for k in 1..widths.len() {
            rest.push(Linear::new(store, &format!("{name}.{k}"), widths[k - 1], widths[k], true, rng)?);
        }
        Ok(Self {
            first_src,
            first_dst,
            first_bias,
            rest,
        })
    }

    /// `[P, 1]` logits for the pairs `(src[k], dst[k])` of the `[N, z]` embedding matrix.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        z: Var,
        src: &Arc<[usize]>,
        dst: &Arc<[usize]>,
        ctx: &mut Ctx,
    ) -> Result<Var, ModelError> {
        let a = tape.param(store, self.first_src);
        let b = tape.param(store, self.first_dst);
        let za = tape.matmul(z, a)?;
        let zb = tape.matmul(z, b)?;
        let ga = tape.gather_rows(za, src.clone())?;
        let gb = tape.gather_rows(zb, dst.clone())?;
        let mut h = tape.add(ga, gb)?;
        let bias = tape.param(store, self.first_bias);
        h = tape.add_row(h, bias)?;
        for layer in &self.rest {
            h = tape.leaky_relu(h, ACTIVATION_SLOPE)?;
            h = ctx.dropout(tape, h)?;
            h = layer.forward(tape, store, h)?;
        }
        Ok(h)
    }
}

/// LSTM cell with fused gate weights, gate order `f, i, o, g`.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            wx: store.add_glorot(format!("{name}.wx"), input, 4 * hidden, rng)?,
            wh: store.add_glorot(format!("{name}.wh"), hidden, 4 * hidden, rng)?,
            b: store.add_zeros(format!("{name}.b"), &[4 * hidden])?,
            hidden,
        })
    }

    /// One step for a batch of rows; returns `(h_t, c_t)`.
    pub fn step(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var), ModelError> {
        let (wx, wh, b) = (tape.param(store, self.wx), tape.param(store, self.wh), tape.param(store, self.b));
        let gx = tape.matmul(x, wx)?;
        let gh = tape.matmul(h, wh)?;
        let gates = tape.add(gx, gh)?;
        let gates = tape.add_row(gates, b)?;
        let k = self.hidden;
        let f = tape.slice_cols(gates, 0, k)?;
        let i = tape.slice_cols(gates, k, k)?;
        let o = tape.slice_cols(gates, 2 * k, k)?;
        let g = tape.slice_cols(gates, 3 * k, k)?;
        let (f, i, o, g) = (tape.sigmoid(f)?, tape.sigmoid(i)?, tape.sigmoid(o)?, tape.tanh(g)?);
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        let c_next = tape.add(keep, write)?;
        let squashed = tape.tanh(c_next)?;
        let h_next = tape.mul(o, squashed)?;
        Ok((h_next, c_next))
    }
}

/// GRU cell, gate order `r, z, n`:
/// `n = tanh(x W_n + b_n + r ⊙ (h U_n + c_n))`, `h' = (1 - z) ⊙ n + z ⊙ h`.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub bx: ParamId,
    pub bh: ParamId,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            wx: store.add_glorot(format!("{name}.wx"), input, 3 * hidden, rng)?,
            wh: store.add_glorot(format!("{name}.wh"), hidden, 3 * hidden, rng)?,
            bx: store.add_zeros(format!("{name}.bx"), &[3 * hidden])?,
            bh: store.add_zeros(format!("{name}.bh"), &[3 * hidden])?,
            hidden,
        })
    }

    pub fn step(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var) -> Result<Var, ModelError> {
        let (wx, wh) = (tape.param(store, self.wx), tape.param(store, self.wh));
        let (bx, bh) = (tape.param(store, self.bx), tape.param(store, self.bh));
        let gx = tape.matmul(x, wx)?;
        let gx = tape.add_row(gx, bx)?;
        let gh = tape.matmul(h, wh)?;
        let gh = tape.add_row(gh, bh)?;
        let k = self.hidden;
        let rz_x = tape.slice_cols(gx, 0, 2 * k)?;
        let rz_h = tape.slice_cols(gh, 0, 2 * k)?;
        let rz = tape.add(rz_x, rz_h)?;
        let rz = tape.sigmoid(rz)?;
        let r = tape.slice_cols(rz, 0, k)?;
        let z = tape.slice_cols(rz, k, k)?;
        let nx = tape.slice_cols(gx, 2 * k, k)?;
        let nh = tape.slice_cols(gh, 2 * k, k)?;
        let gated = tape.mul(r, nh)?;
        let n = tape.add(nx, gated)?;
        let n = tape.tanh(n)?;
        let one_minus_z = tape.one_minus(z)?;
        let fresh = tape.mul(one_minus_z, n)?;
        let kept = tape.mul(z, h)?;
        Ok(tape.add(fresh, kept)?)
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    Lstm(LstmCell),
    Gru(GruCell),
}

/// Stacked recurrent encoder over a sequence of `[B, F]` inputs; returns the
/// top layer's final hidden state.
#[derive(Clone, Debug)]
pub struct Recurrent {
    pub cells: Vec<Cell>,
    pub hidden: usize,
}

impl Recurrent {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        lstm: bool,
        input: usize,
        hidden: usize,
        layers: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let mut cells = Vec::new();
        for l in 0..layers {
            let width = if l == 0 { input } else { hidden };
            let name = format!("{name}.{l}");
            cells.push(if lstm {
                Cell::Lstm(LstmCell::new(store, &name, width, hidden, rng)?)
            } else {
                Cell::Gru(GruCell::new(store, &name, width, hidden, rng)?)
            });
        }
        Ok(Self { cells, hidden })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, seq: &[Var], ctx: &mut Ctx) -> Result<Var, ModelError> {
        let Some(&first) = seq.first() else {
            return Err(ModelError::Input("empty sequence".into()));
        };
        let rows = tape.shape(first)[0];
        let mut inputs = seq.to_vec();
        for (l, cell) in self.cells.iter().enumerate() {
            if l > 0 {
                for v in inputs.iter_mut() {
                    *v = ctx.dropout(tape, *v)?;
                }
            }
            let zero = tape.constant(Tensor::zeros(&[rows, self.hidden]));
            let (mut h, mut c) = (zero, zero);
            let mut outputs = Vec::with_capacity(inputs.len());
            for &x in &inputs {
                match cell {
                    Cell::Lstm(cell) => (h, c) = cell.step(tape, store, x, h, c)?,
                    Cell::Gru(cell) => h = cell.step(tape, store, x, h)?,
                }
                outputs.push(h);
            }
            inputs = outputs;
        }
        Ok(*inputs.last().expect("non-empty sequence"))
    }
}
