//! Define-by-run tape. Every primitive evaluates eagerly, appends a node, and
//! `backward` replays the nodes in reverse accumulating vector-Jacobian
//! products into [`ParamStore`] gradients.

use std::collections::HashMap;
use std::sync::Arc;

use super::{DiffError, ParamId, ParamStore, Tensor};

pub const BCE_CLAMP: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols { src: Var, start: usize },
    RowSoftmax(Var),
    SegmentSoftmax { src: Var, segments: Arc<[usize]>, count: usize },
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    Scale(Var, f64),
    AddScalar(Var),
    Dropout(Var, Tensor),
    Bce { probs: Var, labels: Arc<[f64]> },
    BceWithLogits { logits: Var, labels: Arc<[f64]> },
    Gather { src: Var, index: Arc<[usize]> },
    ScatterAdd { src: Var, index: Arc<[usize]> },
    ScaleRows(Var, Var),
    RowDot(Var, Var),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn shape_err(op: &'static str, detail: String) -> DiffError {
    DiffError::Shape { op, detail }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize), DiffError> {
    if t.is_matrix() {
        Ok((t.shape()[0], t.shape()[1]))
    } else {
        Err(shape_err(op, format!("expected a matrix, got shape {:?}", t.shape())))
    }
}

/// `c = beta * c + op(a) * op(b)` where `op` optionally transposes a row-major matrix.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    // Row-major `a` is m×k unless transposed, in which case it is stored k×m.
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: lengths were checked above and the strides address exactly those buffers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        super::tune_allocator();
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, op: &'static str, value: Tensor, kind: Op, needs_grad: bool) -> Result<Var, DiffError> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op });
        }
        self.nodes.push(Node {
            value,
            op: kind,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Constant,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records the current value of a parameter; repeated calls reuse the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: store.value(id).clone(),
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (m, k) = require_matrix("matmul", self.value(a))?;
        let (k2, n) = require_matrix("matmul", self.value(b))?;
        if k != k2 {
            return Err(shape_err(
                "matmul",
                format!("{:?} x {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), false, &mut out, 0.0);
        let needs = self.needs(a) || self.needs(b);
        self.push("matmul", Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), needs)
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        kind: Op,
    ) -> Result<Var, DiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        self.push(name, value, kind, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a length-`n` bias (shape `[n]` or `[1, n]`) to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, DiffError> {
        let (m, n) = require_matrix("add_row", self.value(a))?;
        if self.value(bias).len() != n {
            return Err(shape_err(
                "add_row",
                format!("{:?} + bias {:?}", self.shape(a), self.shape(bias)),
            ));
        }
        let b = self.value(bias).data();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(n) {
            row.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        let needs = self.needs(a) || self.needs(bias);
        self.push("add_row", Tensor::new(vec![m, n], out)?, Op::AddRow(a, bias), needs)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        if parts.is_empty() {
            return Err(shape_err("concat_cols", "no operands".into()));
        }
        let m = require_matrix("concat_cols", self.value(parts[0]))?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = require_matrix("concat_cols", self.value(p))?;
            if r != m {
                let shapes: Vec<_> = parts.iter().map(|&p| self.shape(p).to_vec()).collect();
                return Err(shape_err("concat_cols", format!("row counts differ: {shapes:?}")));
            }
            widths.push(c);
        }
        let n: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for &p in parts {
                out.extend_from_slice(self.value(p).row_slice(i));
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push("concat_cols", Tensor::new(vec![m, n], out)?, Op::ConcatCols(parts.to_vec()), needs)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        if parts.is_empty() {
            return Err(shape_err("concat_rows", "no operands".into()));
        }
        let n = require_matrix("concat_rows", self.value(parts[0]))?.1;
        let mut m = 0;
        for &p in parts {
            let (r, c) = require_matrix("concat_rows", self.value(p))?;
            if c != n {
                let shapes: Vec<_> = parts.iter().map(|&p| self.shape(p).to_vec()).collect();
                return Err(shape_err("concat_rows", format!("column counts differ: {shapes:?}")));
            }
            m += r;
        }
        let mut out = Vec::with_capacity(m * n);
        for &p in parts {
            out.extend_from_slice(self.value(p).data());
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push("concat_rows", Tensor::new(vec![m, n], out)?, Op::ConcatRows(parts.to_vec()), needs)
    }

    pub fn slice_cols(&mut self, src: Var, start: usize, len: usize) -> Result<Var, DiffError> {
        let (m, n) = require_matrix("slice_cols", self.value(src))?;
        if len == 0 || start + len > n {
            return Err(shape_err(
                "slice_cols",
                format!("columns {start}..{} of {:?}", start + len, self.shape(src)),
            ));
        }
        let t = self.value(src);
        let mut out = Vec::with_capacity(m * len);
        for i in 0..m {
            out.extend_from_slice(&t.row_slice(i)[start..start + len]);
        }
        let needs = self.needs(src);
        self.push("slice_cols", Tensor::new(vec![m, len], out)?, Op::SliceCols { src, start }, needs)
    }

    pub fn row_softmax(&mut self, src: Var) -> Result<Var, DiffError> {
        let (m, n) = require_matrix("row_softmax", self.value(src))?;
        let mut out = self.value(src).data().to_vec();
        for row in out.chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            row.iter_mut().for_each(|x| *x /= sum);
        }
        let needs = self.needs(src);
        self.push("row_softmax", Tensor::new(vec![m, n], out)?, Op::RowSoftmax(src), needs)
    }

    /// Softmax of an `[E, 1]` score column within groups: entry `e` competes with
    /// every entry sharing `segments[e]`. Each of `count` groups may be empty.
    pub fn segment_softmax(&mut self, src: Var, segments: Arc<[usize]>, count: usize) -> Result<Var, DiffError> {
        let (e, c) = require_matrix("segment_softmax", self.value(src))?;
        if c != 1 || segments.len() != e || segments.iter().any(|&s| s >= count) {
            return Err(shape_err(
                "segment_softmax",
                format!("scores {:?}, {} segment ids, {} segments", self.shape(src), segments.len(), count),
            ));
        }
        let x = self.value(src).data();
        let mut max = vec![f64::NEG_INFINITY; count];
        for (v, &s) in x.iter().zip(segments.iter()) {
            max[s] = max[s].max(*v);
        }
        let mut out: Vec<f64> = x.iter().zip(segments.iter()).map(|(v, &s)| (v - max[s]).exp()).collect();
        let mut sum = vec![0.0; count];
        for (v, &s) in out.iter().zip(segments.iter()) {
            sum[s] += v;
        }
        for (v, &s) in out.iter_mut().zip(segments.iter()) {
            *v /= sum[s];
        }
        let needs = self.needs(src);
        self.push(
            "segment_softmax",
            Tensor::new(vec![e, 1], out)?,
            Op::SegmentSoftmax { src, segments, count },
            needs,
        )
    }

    fn map(&mut self, name: &'static str, src: Var, f: impl Fn(f64) -> f64, kind: Op) -> Result<Var, DiffError> {
        let t = self.value(src);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())?;
        let needs = self.needs(src);
        self.push(name, value, kind, needs)
    }

    pub fn sigmoid(&mut self, src: Var) -> Result<Var, DiffError> {
        self.map("sigmoid", src, sigmoid, Op::Sigmoid(src))
    }

    pub fn tanh(&mut self, src: Var) -> Result<Var, DiffError> {
        self.map("tanh", src, f64::tanh, Op::Tanh(src))
    }

    pub fn leaky_relu(&mut self, src: Var, slope: f64) -> Result<Var, DiffError> {
        self.map(
            "leaky_relu",
            src,
            |x| if x > 0.0 { x } else { slope * x },
            Op::LeakyRelu(src, slope),
        )
    }

    pub fn scale(&mut self, src: Var, factor: f64) -> Result<Var, DiffError> {
        self.map("scale", src, |x| x * factor, Op::Scale(src, factor))
    }

    pub fn add_scalar(&mut self, src: Var, c: f64) -> Result<Var, DiffError> {
        self.map("add_scalar", src, |x| x + c, Op::AddScalar(src))
    }

    /// `1 - x`, elementwise.
    pub fn one_minus(&mut self, src: Var) -> Result<Var, DiffError> {
        let neg = self.scale(src, -1.0)?;
        self.add_scalar(neg, 1.0)
    }

    /// Multiplies by a caller-supplied mask (entries are `0` or `1/(1-p)`).
    pub fn dropout(&mut self, src: Var, mask: Tensor) -> Result<Var, DiffError> {
        if mask.shape() != self.shape(src) {
            return Err(shape_err(
                "dropout",
                format!("input {:?}, mask {:?}", self.shape(src), mask.shape()),
            ));
        }
        let t = self.value(src);
        let data = t.data().iter().zip(mask.data()).map(|(x, m)| x * m).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        let needs = self.needs(src);
        self.push("dropout", value, Op::Dropout(src, mask), needs)
    }

    /// Mean binary cross-entropy of probabilities against 0/1 labels.
    /// Probabilities are clamped to `[1e-12, 1 - 1e-12]`.
    pub fn bce(&mut self, probs: Var, labels: Arc<[f64]>) -> Result<Var, DiffError> {
        let p = self.value(probs);
        if p.len() != labels.len() {
            return Err(shape_err("bce", format!("scores {:?}, {} labels", p.shape(), labels.len())));
        }
        let total: f64 = p
            .data()
            .iter()
            .zip(labels.iter())
            .map(|(&s, &y)| {
                let s = s.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
            })
            .sum();
        let loss = total / labels.len() as f64;
        let needs = self.needs(probs);
        self.push("bce", Tensor::scalar(loss), Op::Bce { probs, labels }, needs)
    }

    /// Mean binary cross-entropy applied to `sigmoid(logits)`, evaluated without
    /// forming the probabilities.
    pub fn bce_with_logits(&mut self, logits: Var, labels: Arc<[f64]>) -> Result<Var, DiffError> {
        let x = self.value(logits);
        if x.len() != labels.len() {
            return Err(shape_err(
                "bce_with_logits",
                format!("logits {:?}, {} labels", x.shape(), labels.len()),
            ));
        }
        let total: f64 = x
            .data()
            .iter()
            .zip(labels.iter())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum();
        let loss = total / labels.len() as f64;
        let needs = self.needs(logits);
        self.push("bce_with_logits", Tensor::scalar(loss), Op::BceWithLogits { logits, labels }, needs)
    }

    /// Selects rows `index[k]` of a matrix into a `[index.len(), cols]` matrix.
    pub fn gather_rows(&mut self, src: Var, index: Arc<[usize]>) -> Result<Var, DiffError> {
        let (m, n) = require_matrix("gather_rows", self.value(src))?;
        if index.is_empty() || index.iter().any(|&i| i >= m) {
            return Err(shape_err(
                "gather_rows",
                format!("{} indices into {:?}", index.len(), self.shape(src)),
            ));
        }
        let t = self.value(src);
        let mut out = Vec::with_capacity(index.len() * n);
        for &i in index.iter() {
            out.extend_from_slice(t.row_slice(i));
        }
        let needs = self.needs(src);
        self.push(
            "gather_rows",
            Tensor::new(vec![index.len(), n], out)?,
            Op::Gather { src, index },
            needs,
        )
    }

    /// Sums row `k` of an `[E, cols]` matrix into output row `index[k]` of a `[rows, cols]` matrix.
    pub fn scatter_add_rows(&mut self, src: Var, index: Arc<[usize]>, rows: usize) -> Result<Var, DiffError> {
        let (e, n) = require_matrix("scatter_add_rows", self.value(src))?;
        if index.len() != e || rows == 0 || index.iter().any(|&i| i >= rows) {
            return Err(shape_err(
                "scatter_add_rows",
                format!("{:?} into {} rows with {} indices", self.shape(src), rows, index.len()),
            ));
        }
        let t = self.value(src);
        let mut out = vec![0.0; rows * n];
        for (k, &i) in index.iter().enumerate() {
            out[i * n..(i + 1) * n]
                .iter_mut()
                .zip(t.row_slice(k))
                .for_each(|(o, v)| *o += v);
        }
        let needs = self.needs(src);
        self.push(
            "scatter_add_rows",
            Tensor::new(vec![rows, n], out)?,
            Op::ScatterAdd { src, index },
            needs,
        )
    }

    /// Multiplies row `i` of `a` by `s[i]` where `s` is `[rows, 1]`.
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Result<Var, DiffError> {
        let (m, n) = require_matrix("scale_rows", self.value(a))?;
        if self.shape(s) != [m, 1] {
            return Err(shape_err(
                "scale_rows",
                format!("{:?} scaled by {:?}", self.shape(a), self.shape(s)),
            ));
        }
        let sv = self.value(s).data();
        let mut out = self.value(a).data().to_vec();
        for (row, f) in out.chunks_mut(n).zip(sv) {
            row.iter_mut().for_each(|x| *x *= f);
        }
        let needs = self.needs(a) || self.needs(s);
        self.push("scale_rows", Tensor::new(vec![m, n], out)?, Op::ScaleRows(a, s), needs)
    }

    /// Row-wise inner products of two equally shaped matrices, as a `[rows, 1]` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (m, n) = require_matrix("row_dot", self.value(a))?;
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("row_dot", format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        let (ta, tb) = (self.value(a).data(), self.value(b).data());
        let out = ta
            .chunks(n)
            .zip(tb.chunks(n))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
            .collect();
        let needs = self.needs(a) || self.needs(b);
        self.push("row_dot", Tensor::new(vec![m, 1], out)?, Op::RowDot(a, b), needs)
    }

    pub fn sum(&mut self, src: Var) -> Result<Var, DiffError> {
        let s = self.value(src).data().iter().sum();
        let needs = self.needs(src);
        self.push("sum", Tensor::scalar(s), Op::Sum(src), needs)
    }

    pub fn mean(&mut self, src: Var) -> Result<Var, DiffError> {
        let t = self.value(src);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        let needs = self.needs(src);
        self.push("mean", Tensor::scalar(s), Op::Mean(src), needs)
    }

    /// Accumulates `d output / d value` into the gradient of every parameter
    /// reachable from `output`. Gradients add onto whatever the store already holds.
    pub fn backward(&self, output: Var, store: &mut ParamStore) -> Result<(), DiffError> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(DiffError::NotScalar {
                shape: out.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(output.0 + 1, || None);
        grads[output.0] = Some(vec![1.0]);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads, store);
        }
        Ok(())
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>], store: &mut ParamStore) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        let y = node.value.data();
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => {
                let grad = store.get_mut(*id).grad.data_mut();
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                acc(*a, &mut |ga| gemm(m, n, k, g, false, tb.data(), true, ga, 1.0));
                acc(*b, &mut |gb| gemm(k, m, n, ta.data(), true, g, false, gb, 1.0));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, d)| *x += d));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(x, d)| *x += d));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, d)| *x += d));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(x, d)| *x -= d));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    for ((x, d), o) in ga.iter_mut().zip(g).zip(tb) {
                        *x += d * o;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((x, d), o) in gb.iter_mut().zip(g).zip(ta) {
                        *x += d * o;
                    }
                });
            }
            Op::AddRow(a, bias) => {
                let n = node.value.cols();
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, d)| *x += d));
                acc(*bias, &mut |gb| {
                    for row in g.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(x, d)| *x += d);
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let n = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    acc(p, &mut |gp| {
                        for (dst, src) in gp.chunks_mut(w).zip(g.chunks(n)) {
                            dst.iter_mut().zip(&src[offset..offset + w]).for_each(|(x, d)| *x += d);
                        }
                    });
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    acc(p, &mut |gp| {
                        gp.iter_mut().zip(&g[offset..offset + len]).for_each(|(x, d)| *x += d);
                    });
                    offset += len;
                }
            }
            Op::SliceCols { src, start } => {
                let w = node.value.cols();
                let n = self.value(*src).cols();
                acc(*src, &mut |gs| {
                    for (dst, row) in gs.chunks_mut(n).zip(g.chunks(w)) {
                        dst[*start..*start + w].iter_mut().zip(row).for_each(|(x, d)| *x += d);
                    }
                });
            }
            Op::RowSoftmax(src) => {
                let n = node.value.cols();
                acc(*src, &mut |gs| {
                    for ((dst, yr), gr) in gs.chunks_mut(n).zip(y.chunks(n)).zip(g.chunks(n)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((x, yi), gi) in dst.iter_mut().zip(yr).zip(gr) {
                            *x += yi * (gi - dot);
                        }
                    }
                });
            }
            Op::SegmentSoftmax { src, segments, count } => {
                let mut dot = vec![0.0; *count];
                for ((yi, gi), &s) in y.iter().zip(g).zip(segments.iter()) {
                    dot[s] += yi * gi;
                }
                acc(*src, &mut |gs| {
                    for (((x, yi), gi), &s) in gs.iter_mut().zip(y).zip(g).zip(segments.iter()) {
                        *x += yi * (gi - dot[s]);
                    }
                });
            }
            Op::Sigmoid(src) => acc(*src, &mut |gs| {
                for ((x, yi), gi) in gs.iter_mut().zip(y).zip(g) {
                    *x += gi * yi * (1.0 - yi);
                }
            }),
            Op::Tanh(src) => acc(*src, &mut |gs| {
                for ((x, yi), gi) in gs.iter_mut().zip(y).zip(g) {
                    *x += gi * (1.0 - yi * yi);
                }
            }),
            Op::LeakyRelu(src, slope) => {
                let xs = self.value(*src).data();
                acc(*src, &mut |gs| {
                    for ((x, xi), gi) in gs.iter_mut().zip(xs).zip(g) {
                        *x += if *xi > 0.0 { *gi } else { slope * gi };
                    }
                });
            }
            Op::Scale(src, factor) => acc(*src, &mut |gs| {
                gs.iter_mut().zip(g).for_each(|(x, d)| *x += factor * d);
            }),
            Op::AddScalar(src) => acc(*src, &mut |gs| {
                gs.iter_mut().zip(g).for_each(|(x, d)| *x += d);
            }),
            Op::Dropout(src, mask) => acc(*src, &mut |gs| {
                for ((x, m), d) in gs.iter_mut().zip(mask.data()).zip(g) {
                    *x += m * d;
                }
            }),
            Op::Bce { probs, labels } => {
                let p = self.value(*probs).data();
                let scale = g[0] / labels.len() as f64;
                acc(*probs, &mut |gs| {
                    for ((x, &s), &yl) in gs.iter_mut().zip(p).zip(labels.iter()) {
                        let s = s.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                        *x += scale * (-yl / s + (1.0 - yl) / (1.0 - s));
                    }
                });
            }
            Op::BceWithLogits { logits, labels } => {
                let z = self.value(*logits).data();
                let scale = g[0] / labels.len() as f64;
                acc(*logits, &mut |gs| {
                    for ((x, &zi), &yl) in gs.iter_mut().zip(z).zip(labels.iter()) {
                        *x += scale * (sigmoid(zi) - yl);
                    }
                });
            }
            Op::Gather { src, index } => {
                let n = node.value.cols();
                acc(*src, &mut |gs| {
                    for (row, &i) in g.chunks(n).zip(index.iter()) {
                        gs[i * n..(i + 1) * n].iter_mut().zip(row).for_each(|(x, d)| *x += d);
                    }
                });
            }
            Op::ScatterAdd { src, index } => {
                let n = node.value.cols();
                acc(*src, &mut |gs| {
                    for (row, &i) in gs.chunks_mut(n).zip(index.iter()) {
                        row.iter_mut().zip(&g[i * n..(i + 1) * n]).for_each(|(x, d)| *x += d);
                    }
                });
            }
            Op::ScaleRows(a, s) => {
                let n = node.value.cols();
                let (ta, ts) = (self.value(*a).data(), self.value(*s).data());
                acc(*a, &mut |ga| {
                    for ((row, gr), f) in ga.chunks_mut(n).zip(g.chunks(n)).zip(ts) {
                        row.iter_mut().zip(gr).for_each(|(x, d)| *x += d * f);
                    }
                });
                acc(*s, &mut |gs| {
                    for ((x, gr), ar) in gs.iter_mut().zip(g.chunks(n)).zip(ta.chunks(n)) {
                        *x += gr.iter().zip(ar).map(|(p, q)| p * q).sum::<f64>();
                    }
                });
            }
            Op::RowDot(a, b) => {
                let n = self.value(*a).cols();
                let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    for ((row, br), d) in ga.chunks_mut(n).zip(tb.chunks(n)).zip(g) {
                        row.iter_mut().zip(br).for_each(|(x, o)| *x += d * o);
                    }
                });
                acc(*b, &mut |gb| {
                    for ((row, ar), d) in gb.chunks_mut(n).zip(ta.chunks(n)).zip(g) {
                        row.iter_mut().zip(ar).for_each(|(x, o)| *x += d * o);
                    }
                });
            }
            Op::Sum(src) => acc(*src, &mut |gs| gs.iter_mut().for_each(|x| *x += g[0])),
            Op::Mean(src) => {
                let n = self.value(*src).len() as f64;
                acc(*src, &mut |gs| gs.iter_mut().for_each(|x| *x += g[0] / n));
            }
        }
    }
}
