//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every primitive evaluates eagerly and appends a node holding its output
//! and the indices of its inputs. Node order is execution order, so the
//! backward sweep is a single reverse walk. `backward` borrows the tape
//! immutably: calling it twice on the same tape yields identical gradients.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Softmax(usize, usize),
    LogSoftmax(usize, usize),
    /// Output element `j` copies input element `argmax[j]`.
    Select { input: usize, argmax: Vec<usize> },
    Concat { inputs: Vec<usize>, axis: usize },
    GatherRows { input: usize, indices: Vec<usize> },
    Sum(usize),
    Mean(usize),
    SquaredError(usize, usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every leaf recorded as a parameter.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; exact zeros if `v` does not reach the loss.
    pub fn get(&self, v: Var) -> Tensor {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }

    pub fn get_ref(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

/// Strided lanes of a tensor along `axis`: (offsets, stride, lane length, reduced shape).
fn lanes(shape: &[usize], axis: usize, op: &'static str) -> Result<(Vec<usize>, usize, usize, Vec<usize>)> {
    match (shape.len(), axis) {
        (1, 0) => Ok((vec![0], 1, shape[0], vec![1])),
        (2, 0) => Ok(((0..shape[1]).collect(), shape[1], shape[0], vec![1, shape[1]])),
        (2, 1) => Ok((
            (0..shape[0]).map(|r| r * shape[1]).collect(),
            1,
            shape[1],
            vec![shape[0], 1],
        )),
        _ => Err(Error::Shape {
            op,
            left: shape.to_vec(),
            right: vec![axis],
        }),
    }
}

fn require_matrix(t: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(Error::Shape {
            op,
            left: t.shape().to_vec(),
            right: vec![2],
        });
    }
    Ok((t.shape()[0], t.shape()[1]))
}

/// `c = a * b + beta * c` with arbitrary strides, backed by `matrixmultiply`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
    beta: f64,
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: slice lengths cover every strided access for the given dimensions.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn softmax_lane(src: &[f64], dst: &mut [f64], offset: usize, stride: usize, len: usize) {
    let mut max = f64::NEG_INFINITY;
    for i in 0..len {
        max = max.max(src[offset + i * stride]);
    }
    let mut total = 0.0;
    for i in 0..len {
        let e = (src[offset + i * stride] - max).exp();
        dst[offset + i * stride] = e;
        total += e;
    }
    for i in 0..len {
        dst[offset + i * stride] /= total;
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: usize) -> bool {
        self.nodes[v].requires_grad
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = require_matrix(ta, "matmul")?;
        let (k2, n) = require_matrix(tb, "matmul")?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), (k as isize, 1), tb.data(), (n as isize, 1), &mut out, 0.0);
        let rg = self.rg(a.0) || self.rg(b.0);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a.0, b.0), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (r, c) = require_matrix(t, "transpose")?;
        let src = t.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        let rg = self.rg(a.0);
        Ok(self.push(Tensor::matrix(c, r, out)?, Op::Transpose(a.0), rg))
    }

    fn zip(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Shape {
                op: name,
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(a.0) || self.rg(b.0);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a.0, b.0))
    }

    /// Elementwise `(a - b)^2`.
    pub fn squared_error(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "squared_error", |x, y| (x - y) * (x - y), Op::SquaredError(a.0, b.0))
    }

    /// Adds the vector `row` to every row of matrix `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        let (_, n) = require_matrix(ta, "add_row")?;
        if tr.numel() != n || (tr.rank() == 2 && tr.rows() != 1) {
            return Err(Error::Shape {
                op: "add_row",
                left: ta.shape().to_vec(),
                right: tr.shape().to_vec(),
            });
        }
        let bias = tr.data();
        let mut data = ta.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (x, b) in chunk.iter_mut().zip(bias) {
                *x += b;
            }
        }
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(a.0) || self.rg(row.0);
        Ok(self.push(value, Op::AddRow(a.0, row.0), rg))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a.0);
        self.push(value, op, rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.map(a, |x| x * s, Op::Scale(a.0, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        self.map(a, |x| x + s, Op::AddScalar(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(
            a,
            |x| {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            },
            Op::Sigmoid(a.0),
        )
    }

    /// Softmax along `axis` (0 for a vector or per column, 1 per row), max-shifted.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        let (offsets, stride, len, _) = lanes(t.shape(), axis, "softmax")?;
        let mut out = vec![0.0; t.numel()];
        for &o in &offsets {
            softmax_lane(t.data(), &mut out, o, stride, len);
        }
        let value = Tensor::new(t.shape().to_vec(), out)?;
        let rg = self.rg(a.0);
        Ok(self.push(value, Op::Softmax(a.0, axis), rg))
    }

    pub fn log_softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        let (offsets, stride, len, _) = lanes(t.shape(), axis, "log_softmax")?;
        let src = t.data();
        let mut out = vec![0.0; t.numel()];
        for &o in &offsets {
            let max = (0..len).map(|i| src[o + i * stride]).fold(f64::NEG_INFINITY, f64::max);
            let lse = (0..len).map(|i| (src[o + i * stride] - max).exp()).sum::<f64>().ln() + max;
            for i in 0..len {
                out[o + i * stride] = src[o + i * stride] - lse;
            }
        }
        let value = Tensor::new(t.shape().to_vec(), out)?;
        let rg = self.rg(a.0);
        Ok(self.push(value, Op::LogSoftmax(a.0, axis), rg))
    }

    /// Maximum along `axis`, keeping the reduced axis with length 1. Ties
    /// route the gradient to the first maximal element.
    pub fn max_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        let (offsets, stride, len, out_shape) = lanes(t.shape(), axis, "max_axis")?;
        let src = t.data();
        let mut argmax = Vec::with_capacity(offsets.len());
        let mut out = Vec::with_capacity(offsets.len());
        for &o in &offsets {
            let mut best = o;
            for i in 1..len {
                if src[o + i * stride] > src[best] {
                    best = o + i * stride;
                }
            }
            argmax.push(best);
            out.push(src[best]);
        }
        let value = Tensor::new(out_shape, out)?;
        let rg = self.rg(a.0);
        Ok(self.push(value, Op::Select { input: a.0, argmax }, rg))
    }

    /// Column-wise maximum over each contiguous row range `[start, end)`;
    /// one output row per segment. Used for max-over-time pooling of many
    /// sentences stacked in one matrix.
    pub fn segment_max(&mut self, a: Var, segments: &[(usize, usize)]) -> Result<Var> {
        let t = self.value(a);
        let (rows, cols) = require_matrix(t, "segment_max")?;
        if segments.is_empty() {
            return Err(Error::InvalidArgument("segment_max: no segments".into()));
        }
        let src = t.data();
        let mut argmax = Vec::with_capacity(segments.len() * cols);
        let mut out = Vec::with_capacity(segments.len() * cols);
        for &(start, end) in segments {
            if start >= end || end > rows {
                return Err(Error::Shape {
                    op: "segment_max",
                    left: t.shape().to_vec(),
                    right: vec![start, end],
                });
            }
            for c in 0..cols {
                let mut best = start * cols + c;
                for r in start + 1..end {
                    if src[r * cols + c] > src[best] {
                        best = r * cols + c;
                    }
                }
                argmax.push(best);
                out.push(src[best]);
            }
        }
        let value = Tensor::matrix(segments.len(), cols, out)?;
        let rg = self.rg(a.0);
        Ok(self.push(value, Op::Select { input: a.0, argmax }, rg))
    }

    /// Concatenation along `axis`: 0 stacks rows (or joins vectors), 1 joins columns.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat: no inputs".into()))?;
        let base = self.value(*first).shape().to_vec();
        for p in &parts[1..] {
            let s = self.value(*p).shape();
            let ok = s.len() == base.len()
                && match (base.len(), axis) {
                    (1, 0) | (2, 0) => s[s.len() - 1] == base[base.len() - 1] || base.len() == 1,
                    (2, 1) => s[0] == base[0],
                    _ => false,
                };
            if !ok {
                return Err(Error::Shape {
                    op: "concat",
                    left: base,
                    right: s.to_vec(),
                });
            }
        }
        if base.len() == 1 && axis != 0 || base.len() > 2 || axis > 1 {
            return Err(Error::Shape {
                op: "concat",
                left: base,
                right: vec![axis],
            });
        }
        let (shape, data) = if axis == 0 {
            let mut data = Vec::new();
            let mut rows = 0;
            for p in parts {
                let t = self.value(*p);
                data.extend_from_slice(t.data());
                rows += if base.len() == 1 { t.numel() } else { t.rows() };
            }
            let shape = if base.len() == 1 { vec![rows] } else { vec![rows, base[1]] };
            (shape, data)
        } else {
            let rows = base[0];
            let total: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for p in parts {
                    data.extend_from_slice(self.value(*p).row_slice(r));
                }
            }
            (vec![rows, total], data)
        };
        let rg = parts.iter().any(|p| self.rg(p.0));
        let value = Tensor::new(shape, data)?;
        Ok(self.push(
            value,
            Op::Concat {
                inputs: parts.iter().map(|p| p.0).collect(),
                axis,
            },
            rg,
        ))
    }

    /// Row lookup: output row `i` is row `indices[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let (rows, cols) = require_matrix(t, "gather_rows")?;
        if indices.is_empty() {
            return Err(Error::InvalidArgument("gather_rows: no indices".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= rows {
                return Err(Error::Shape {
                    op: "gather_rows",
                    left: t.shape().to_vec(),
                    right: vec![i],
                });
            }
            data.extend_from_slice(t.row_slice(i));
        }
        let value = Tensor::matrix(indices.len(), cols, data)?;
        let rg = self.rg(a.0);
        Ok(self.push(
            value,
            Op::GatherRows {
                input: a.0,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a.0);
        self.push(Tensor::scalar(s), Op::Sum(a.0), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        let rg = self.rg(a.0);
        self.push(Tensor::scalar(s), Op::Mean(a.0), rg)
    }

    /// Gradient of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.numel() != 1 {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(lt.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn accumulate<F: FnOnce(&mut [f64])>(&self, grads: &mut [Option<Tensor>], target: usize, f: F) {
        if !self.nodes[target].requires_grad {
            return;
        }
        let slot = grads[target].get_or_insert_with(|| Tensor::zeros(self.nodes[target].value.shape()));
        f(slot.data_mut());
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &self.nodes[i].value;
        let gd = g.data();
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                // dA = G * B^T
                self.accumulate(grads, *a, |da| {
                    gemm(m, n, k, gd, (n as isize, 1), tb.data(), (1, n as isize), da, 1.0);
                });
                // dB = A^T * G
                self.accumulate(grads, *b, |db| {
                    gemm(k, m, n, ta.data(), (1, k as isize), gd, (n as isize, 1), db, 1.0);
                });
            }
            Op::Transpose(a) => {
                let (r, c) = (out.rows(), out.cols());
                self.accumulate(grads, *a, |da| {
                    for x in 0..r {
                        for y in 0..c {
                            da[y * r + x] += gd[x * c + y];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |da| add_into(da, gd));
                self.accumulate(grads, *b, |db| add_into(db, gd));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |da| add_into(da, gd));
                self.accumulate(grads, *b, |db| {
                    for (d, &x) in db.iter_mut().zip(gd) {
                        *d -= x;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.nodes[*a].value.data(), self.nodes[*b].value.data());
                self.accumulate(grads, *a, |da| {
                    for ((d, &x), &y) in da.iter_mut().zip(gd).zip(vb) {
                        *d += x * y;
                    }
                });
                self.accumulate(grads, *b, |db| {
                    for ((d, &x), &y) in db.iter_mut().zip(gd).zip(va) {
                        *d += x * y;
                    }
                });
            }
            Op::SquaredError(a, b) => {
                let (va, vb) = (self.nodes[*a].value.data(), self.nodes[*b].value.data());
                self.accumulate(grads, *a, |da| {
                    for (j, d) in da.iter_mut().enumerate() {
                        *d += 2.0 * (va[j] - vb[j]) * gd[j];
                    }
                });
                self.accumulate(grads, *b, |db| {
                    for (j, d) in db.iter_mut().enumerate() {
                        *d -= 2.0 * (va[j] - vb[j]) * gd[j];
                    }
                });
            }
            Op::AddRow(a, row) => {
                let n = out.cols();
                self.accumulate(grads, *a, |da| add_into(da, gd));
                self.accumulate(grads, *row, |dr| {
                    for chunk in gd.chunks(n) {
                        add_into(dr, chunk);
                    }
                });
            }
            Op::Scale(a, s) => {
                self.accumulate(grads, *a, |da| {
                    for (d, &x) in da.iter_mut().zip(gd) {
                        *d += s * x;
                    }
                });
            }
            Op::AddScalar(a) => self.accumulate(grads, *a, |da| add_into(da, gd)),
            Op::Relu(a) => {
                let va = self.nodes[*a].value.data();
                self.accumulate(grads, *a, |da| {
                    for ((d, &x), &v) in da.iter_mut().zip(gd).zip(va) {
                        if v > 0.0 {
                            *d += x;
                        }
                    }
                });
            }
            Op::Tanh(a) => {
                let y = out.data();
                self.accumulate(grads, *a, |da| {
                    for ((d, &x), &y) in da.iter_mut().zip(gd).zip(y) {
                        *d += x * (1.0 - y * y);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = out.data();
                self.accumulate(grads, *a, |da| {
                    for ((d, &x), &y) in da.iter_mut().zip(gd).zip(y) {
                        *d += x * y * (1.0 - y);
                    }
                });
            }
            Op::Softmax(a, axis) => {
                let (offsets, stride, len, _) = lanes(out.shape(), *axis, "softmax").expect("recorded");
                let y = out.data();
                self.accumulate(grads, *a, |da| {
                    for &o in &offsets {
                        let dot: f64 = (0..len).map(|j| gd[o + j * stride] * y[o + j * stride]).sum();
                        for j in 0..len {
                            let p = o + j * stride;
                            da[p] += y[p] * (gd[p] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(a, axis) => {
                let (offsets, stride, len, _) = lanes(out.shape(), *axis, "log_softmax").expect("recorded");
                let y = out.data();
                self.accumulate(grads, *a, |da| {
                    for &o in &offsets {
                        let total: f64 = (0..len).map(|j| gd[o + j * stride]).sum();
                        for j in 0..len {
                            let p = o + j * stride;
                            da[p] += gd[p] - y[p].exp() * total;
                        }
                    }
                });
            }
            Op::Select { input, argmax } => {
                self.accumulate(grads, *input, |da| {
                    for (&src, &x) in argmax.iter().zip(gd) {
                        da[src] += x;
                    }
                });
            }
            Op::Concat { inputs, axis } => {
                if *axis == 0 {
                    let mut offset = 0;
                    for &p in inputs {
                        let n = self.nodes[p].value.numel();
                        self.accumulate(grads, p, |dp| add_into(dp, &gd[offset..offset + n]));
                        offset += n;
                    }
                } else {
                    let total = out.cols();
                    let mut col = 0;
                    for &p in inputs {
                        let c = self.nodes[p].value.cols();
                        self.accumulate(grads, p, |dp| {
                            for r in 0..out.rows() {
                                add_into(&mut dp[r * c..(r + 1) * c], &gd[r * total + col..r * total + col + c]);
                            }
                        });
                        col += c;
                    }
                }
            }
            Op::GatherRows { input, indices } => {
                let c = out.cols();
                self.accumulate(grads, *input, |da| {
                    for (r, &src) in indices.iter().enumerate() {
                        add_into(&mut da[src * c..(src + 1) * c], &gd[r * c..(r + 1) * c]);
                    }
                });
            }
            Op::Sum(a) => {
                let s = gd[0];
                self.accumulate(grads, *a, |da| da.iter_mut().for_each(|d| *d += s));
            }
            Op::Mean(a) => {
                let n = self.nodes[*a].value.numel() as f64;
                let s = gd[0] / n;
                self.accumulate(grads, *a, |da| da.iter_mut().for_each(|d| *d += s));
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
