//! Wengert-list reverse-mode differentiation.
//!
//! Nodes are appended in execution order, so the node vector is already a
//! topological order and `backward` walks it once from the end.

use std::borrow::Cow;
use std::sync::Arc;

use rustfft::num_complex::Complex;

use super::kernels::{conv1d_backward, conv1d_forward, linear_backward, linear_forward};
use super::{Real, Tensor};
use crate::dsp::MelAnalysis;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T: Real> {
    Leaf,
    Conv1d { x: NodeId, w: NodeId, b: NodeId, dilation: usize },
    LeakyRelu { x: NodeId, slope: T },
    Concat { parts: Vec<NodeId> },
    Linear { x: NodeId, w: NodeId, b: Option<NodeId> },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    OneMinus(NodeId),
    Scale(NodeId, T),
    Rows { x: NodeId, start: usize },
    Reshape(NodeId),
    Mse { a: NodeId, b: NodeId },
    Mel { x: NodeId, analysis: Arc<MelAnalysis<T>>, spectra: Vec<Complex<T>> },
}

struct Node<'a, T: Real> {
    op: Op<T>,
    value: Cow<'a, Tensor<T>>,
    requires_grad: bool,
}

/// Recorded forward computation. Parameters can be borrowed, so a tape built
/// over a shared parameter set costs no copies.
pub struct Tape<'a, T: Real = f32> {
    nodes: Vec<Node<'a, T>>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: NodeId) -> Option<&[T]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<Vec<T>> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}

impl<T: Real> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape<T: Real>(a: &Tensor<T>, b: &Tensor<T>, op: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn sigmoid<T: Real>(v: T) -> T {
    // Split by sign so exp never overflows.
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

impl<'a, T: Real> Tape<'a, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::with_capacity(256), consumed: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops all recorded nodes so a new forward pass can be recorded.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, op: Op<T>, value: Cow<'a, Tensor<T>>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { op, value, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn push_owned(&mut self, op: Op<T>, value: Tensor<T>, inputs: &[NodeId]) -> NodeId {
        let rg = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.push(op, Cow::Owned(value), rg)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> NodeId {
        self.push(Op::Leaf, Cow::Owned(value), requires_grad)
    }

    /// Borrowed trainable tensor.
    pub fn param(&mut self, value: &'a Tensor<T>) -> NodeId {
        self.push(Op::Leaf, Cow::Borrowed(value), true)
    }

    /// Borrowed tensor that receives no gradient.
    pub fn constant(&mut self, value: &'a Tensor<T>) -> NodeId {
        self.push(Op::Leaf, Cow::Borrowed(value), false)
    }

    /// Owned tensor that receives no gradient.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.leaf(value, false)
    }

    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, dilation: usize) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.rank() != 2 || wv.rank() != 3 {
            return Err(Error::Shape(format!("conv1d: x {:?}, w {:?}", xv.shape(), wv.shape())));
        }
        let (n, c_in) = (xv.features(), xv.channels());
        let (k, wc_in, c_out) = (wv.shape()[0], wv.shape()[1], wv.shape()[2]);
        if wc_in != c_in {
            return Err(Error::Shape(format!("conv1d: input has {c_in} channels, kernel expects {wc_in}")));
        }
        if k % 2 == 0 || dilation == 0 {
            return Err(Error::InvalidConfig(format!("conv1d: kernel {k}, dilation {dilation}")));
        }
        if bv.shape() != [c_out] {
            return Err(Error::Shape(format!("conv1d: bias {:?} for C_out={c_out}", bv.shape())));
        }
        if n == 0 {
            return Err(Error::Shape("conv1d: empty input".into()));
        }
        xv.ensure_finite("conv1d input")?;
        let mut out = vec![T::zero(); n * c_out];
        conv1d_forward(xv.data(), n, c_in, wv.data(), k, c_out, bv.data(), dilation, &mut out);
        let value = Tensor::new(&[n, c_out], out)?;
        Ok(self.push_owned(Op::Conv1d { x, w, b, dilation }, value, &[x, w, b]))
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: T) -> Result<NodeId> {
        if !(slope > T::zero() && slope < T::one()) {
            return Err(Error::InvalidConfig(format!("leaky slope {slope} not in (0, 1)")));
        }
        let xv = self.value(x);
        xv.ensure_finite("leaky_relu input")?;
        let value = xv.map(|v| if v > T::zero() { v } else { slope * v });
        Ok(self.push_owned(Op::LeakyRelu { x, slope }, value, &[x]))
    }

    /// Channel-wise concatenation of `(N, C_i)` parts in the given order.
    pub fn concat_channels(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts.first().ok_or_else(|| Error::Shape("concat of zero parts".into()))?;
        let n = self.value(first).features();
        let mut total = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rank() != 2 || v.features() != n {
                return Err(Error::Shape(format!("concat: part {:?} vs {n} features", v.shape())));
            }
            total += v.channels();
        }
        let mut out = Vec::with_capacity(n * total);
        for row in 0..n {
            for &p in parts {
                let v = self.value(p);
                let c = v.channels();
                out.extend_from_slice(&v.data()[row * c..(row + 1) * c]);
            }
        }
        let value = Tensor::new(&[n, total], out)?;
        Ok(self.push_owned(Op::Concat { parts: parts.to_vec() }, value, parts))
    }

    /// `x·w + b` with `x` a vector of `F_in` values and `w` of shape `(F_in, F_out)`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let (xv, wv) = (self.value(x), self.value(w));
        if wv.rank() != 2 || wv.shape()[0] != xv.len() {
            return Err(Error::Shape(format!("linear: x has {} values, w is {:?}", xv.len(), wv.shape())));
        }
        let f_out = wv.shape()[1];
        let bias = match b {
            Some(b) => {
                let bv = self.value(b);
                if bv.len() != f_out {
                    return Err(Error::Shape(format!("linear: bias {:?} for F_out={f_out}", bv.shape())));
                }
                Some(bv.data())
            }
            None => None,
        };
        let mut out = vec![T::zero(); f_out];
        linear_forward(xv.data(), wv.data(), bias, &mut out);
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push_owned(Op::Linear { x, w, b }, Tensor::vector(out), &inputs))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(sigmoid);
        self.push_owned(Op::Sigmoid(x), value, &[x])
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(T::tanh);
        self.push_owned(Op::Tanh(x), value, &[x])
    }

    pub fn one_minus(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| T::one() - v);
        self.push_owned(Op::OneMinus(x), value, &[x])
    }

    pub fn scale(&mut self, x: NodeId, c: T) -> NodeId {
        let value = self.value(x).map(|v| v * c);
        self.push_owned(Op::Scale(x, c), value, &[x])
    }

    fn binary(&mut self, a: NodeId, b: NodeId, name: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape(av, bv, name)?;
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(av.shape(), data)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push_owned(Op::Add(a, b), value, &[a, b]))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.binary(a, b, "mul", |x, y| x * y)?;
        Ok(self.push_owned(Op::Mul(a, b), value, &[a, b]))
    }

    /// Rows `[start, start + len)` of the leading dimension.
    pub fn rows(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if start + len > xv.features() || len == 0 {
            return Err(Error::Shape(format!("rows {start}..{} of {:?}", start + len, xv.shape())));
        }
        let row = xv.len() / xv.features();
        let mut shape = xv.shape().to_vec();
        shape[0] = len;
        let value = Tensor::new(&shape, xv.data()[start * row..(start + len) * row].to_vec())?;
        Ok(self.push_owned(Op::Rows { x, start }, value, &[x]))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).clone().reshaped(shape)?;
        Ok(self.push_owned(Op::Reshape(x), value, &[x]))
    }

    /// Mean squared error, a scalar node.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape(av, bv, "mse")?;
        let n = T::lit(av.len() as f64);
        let sum: T = av.data().iter().zip(bv.data()).map(|(x, y)| (*x - *y) * (*x - *y)).sum();
        Ok(self.push_owned(Op::Mse { a, b }, Tensor::vector(vec![sum / n]), &[a, b]))
    }

    /// Mel magnitude spectrogram `(frames, n_mels)` of a signal node.
    pub fn mel_spectrogram(&mut self, x: NodeId, analysis: &Arc<MelAnalysis<T>>) -> Result<NodeId> {
        let (spectra, mel) = analysis.forward(self.value(x).data())?;
        let op = Op::Mel { x, analysis: Arc::clone(analysis), spectra };
        Ok(self.push_owned(op, mel, &[x]))
    }

    /// Reverse pass from a scalar node. May be called once per recorded
    /// forward pass.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::Tape("backward already ran on this tape; record a new forward pass".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Tape(format!("loss must be scalar, got shape {:?}", self.value(loss).shape())));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let add = |grads: &mut [Option<Vec<T>>], id: NodeId, contrib: Vec<T>| match &mut grads[id.0] {
            Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += *c),
            slot @ None => *slot = Some(contrib),
        };
        let zeros = |id: NodeId| vec![T::zero(); self.value(id).len()];
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, dilation } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, c_in) = (xv.features(), xv.channels());
                let (k, c_out) = (wv.shape()[0], wv.shape()[2]);
                let mut dx = self.wants(*x).then(|| zeros(*x));
                let mut dw = self.wants(*w).then(|| zeros(*w));
                let mut db = self.wants(*b).then(|| zeros(*b));
                conv1d_backward(
                    xv.data(),
                    n,
                    c_in,
                    wv.data(),
                    k,
                    c_out,
                    *dilation,
                    g,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                for (id, d) in [(*x, dx), (*w, dw), (*b, db)] {
                    if let Some(d) = d {
                        add(grads, id, d);
                    }
                }
            }
            Op::LeakyRelu { x, slope } => {
                let d = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(v, g)| if *v > T::zero() { *g } else { *g * *slope })
                    .collect();
                add(grads, *x, d);
            }
            Op::Concat { parts } => {
                let total = node.value.channels();
                let mut offset = 0;
                for p in parts {
                    let c = self.value(*p).channels();
                    if self.wants(*p) {
                        let d = g.chunks_exact(total).flat_map(|row| row[offset..offset + c].iter().copied()).collect();
                        add(grads, *p, d);
                    }
                    offset += c;
                }
            }
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let mut dx = self.wants(*x).then(|| zeros(*x));
                let mut dw = self.wants(*w).then(|| zeros(*w));
                let mut db = b.filter(|b| self.wants(*b)).map(zeros);
                linear_backward(xv.data(), wv.data(), g, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                if let Some(d) = dx {
                    add(grads, *x, d);
                }
                if let Some(d) = dw {
                    add(grads, *w, d);
                }
                if let (Some(b), Some(d)) = (b, db) {
                    add(grads, *b, d);
                }
            }
            Op::Sigmoid(x) => {
                let d = node.value.data().iter().zip(g).map(|(s, g)| *g * *s * (T::one() - *s)).collect();
                add(grads, *x, d);
            }
            Op::Tanh(x) => {
                let d = node.value.data().iter().zip(g).map(|(t, g)| *g * (T::one() - *t * *t)).collect();
                add(grads, *x, d);
            }
            Op::Add(a, b) => {
                for id in [*a, *b] {
                    if self.wants(id) {
                        add(grads, id, g.to_vec());
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    let d = self.value(*b).data().iter().zip(g).map(|(v, g)| *v * *g).collect();
                    add(grads, *a, d);
                }
                if self.wants(*b) {
                    let d = self.value(*a).data().iter().zip(g).map(|(v, g)| *v * *g).collect();
                    add(grads, *b, d);
                }
            }
            Op::OneMinus(x) => add(grads, *x, g.iter().map(|v| -*v).collect()),
            Op::Scale(x, c) => add(grads, *x, g.iter().map(|v| *v * *c).collect()),
            Op::Rows { x, start } => {
                let xv = self.value(*x);
                let row = xv.len() / xv.features();
                let mut d = zeros(*x);
                d[start * row..start * row + g.len()].copy_from_slice(g);
                add(grads, *x, d);
            }
            Op::Reshape(x) => add(grads, *x, g.to_vec()),
            Op::Mse { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let scale = T::lit(2.0) * g[0] / T::lit(av.len() as f64);
                let diff: Vec<T> = av.data().iter().zip(bv.data()).map(|(x, y)| (*x - *y) * scale).collect();
                if self.wants(*b) {
                    add(grads, *b, diff.iter().map(|v| -*v).collect());
                }
                if self.wants(*a) {
                    add(grads, *a, diff);
                }
            }
            Op::Mel { x, analysis, spectra } => {
                let d = analysis.backward(spectra, g, self.value(*x).len());
                add(grads, *x, d);
            }
        }
    }
}
