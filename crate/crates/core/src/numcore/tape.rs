//! Tensor-level reverse-mode automatic differentiation.
//!
//! Every operation evaluates eagerly and appends a node to the [`Tape`];
//! node ids are handed out in creation order, so the tape is topologically
//! sorted by construction. [`Tape::backward`] walks it once in reverse.

use std::collections::BTreeMap;

use super::tensor::{gemm, gemm_strided, softmax, Tensor};
use super::NumError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Relu(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    SumAll(NodeId),
    SoftmaxXent {
        logits: NodeId,
        targets: Tensor,
        probs: Tensor,
    },
    SegmentMax {
        input: NodeId,
        argmax: Vec<usize>,
    },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    trainable: bool,
    requires_grad: bool,
}

/// Gradients of a scalar loss with respect to the trainable leaves.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: BTreeMap<NodeId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads.remove(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &Tensor)> {
        self.grads.iter()
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true, true)
    }

    /// Non-trainable leaf (inputs, targets, masks).
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false, false)
    }

    pub fn value(&self, id: NodeId) -> Result<&Tensor, NumError> {
        self.nodes
            .get(id.0)
            .map(|n| &n.value)
            .ok_or(NumError::DanglingNode(id.0))
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> Result<f64, NumError> {
        let v = self.value(id)?;
        if !v.is_scalar() {
            return Err(NumError::NonScalar(v.shape().to_vec()));
        }
        Ok(v.data()[0])
    }

    fn push(&mut self, value: Tensor, op: Op, trainable: bool, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            trainable,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> Result<&Node, NumError> {
        self.nodes.get(id.0).ok_or(NumError::DanglingNode(id.0))
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn unary(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> Result<NodeId, NumError> {
        let value = self.node(a)?.value.map(f);
        let rg = self.needs(&[a]);
        Ok(self.push(value, op, false, rg))
    }

    fn same_shape(&self, a: NodeId, b: NodeId) -> Result<(), NumError> {
        let (va, vb) = (&self.node(a)?.value, &self.node(b)?.value);
        if va.same_shape(vb) {
            Ok(())
        } else {
            Err(NumError::ShapeMismatch {
                op: "elementwise",
                left: va.shape().to_vec(),
                right: vb.shape().to_vec(),
            })
        }
    }

    fn zip(&mut self, a: NodeId, b: NodeId, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<NodeId, NumError> {
        self.same_shape(a, b)?;
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, op, false, rg))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (m, k) = self.node(a)?.value.dims2();
        let (k2, n) = self.node(b)?.value.dims2();
        if k != k2 {
            return Err(NumError::ShapeMismatch {
                op: "matmul",
                left: self.nodes[a.0].value.shape().to_vec(),
                right: self.nodes[b.0].value.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.nodes[a.0].value.data(),
            self.nodes[b.0].value.data(),
            &mut out,
            false,
        );
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), false, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        self.zip(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        self.zip(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        self.zip(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// Adds a `[1, n]` row to every row of an `[m, n]` matrix.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, NumError> {
        let (m, n) = self.node(a)?.value.dims2();
        let (r, n2) = self.node(row)?.value.dims2();
        if r != 1 || n != n2 {
            return Err(NumError::ShapeMismatch {
                op: "add_row",
                left: self.nodes[a.0].value.shape().to_vec(),
                right: self.nodes[row.0].value.shape().to_vec(),
            });
        }
        let bias = self.nodes[row.0].value.data();
        let mut data = self.nodes[a.0].value.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (x, b) in chunk.iter_mut().zip(bias) {
                *x += b;
            }
        }
        let rg = self.needs(&[a, row]);
        Ok(self.push(Tensor::matrix(m, n, data)?, Op::AddRow(a, row), false, rg))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, NumError> {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        self.unary(a, Op::Sigmoid(a), super::tensor::sigmoid)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        self.unary(a, Op::Log(a), f64::ln)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NumError> {
        if parts.is_empty() {
            return Err(NumError::InvalidShape(vec![]));
        }
        let rows = self.node(parts[0])?.value.rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.node(p)?.value.dims2();
            if r != rows {
                return Err(NumError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.nodes[parts[0].0].value.shape().to_vec(),
                    right: self.nodes[p.0].value.shape().to_vec(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.nodes[p.0].value.row(r));
            }
        }
        let rg = self.needs(parts);
        Ok(self.push(
            Tensor::matrix(rows, total, data)?,
            Op::ConcatCols(parts.to_vec()),
            false,
            rg,
        ))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId, NumError> {
        let (rows, cols) = self.node(a)?.value.dims2();
        if start >= end || end > cols {
            return Err(NumError::SliceOutOfRange { start, end, cols });
        }
        let v = &self.nodes[a.0].value;
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&v.row(r)[start..end]);
        }
        let rg = self.needs(&[a]);
        Ok(self.push(
            Tensor::matrix(rows, end - start, data)?,
            Op::SliceCols(a, start, end),
            false,
            rg,
        ))
    }

    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        let s = self.node(a)?.value.sum();
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::scalar(s), Op::SumAll(a), false, rg))
    }

    /// Fused, max-shifted softmax cross-entropy. `targets` holds one target
    /// distribution per row of `logits`; the result is the `[rows, 1]`
    /// column of per-row losses.
    pub fn softmax_xent(&mut self, logits: NodeId, targets: Tensor) -> Result<NodeId, NumError> {
        let lv = &self.node(logits)?.value;
        if lv.dims2() != targets.dims2() {
            return Err(NumError::ShapeMismatch {
                op: "softmax_xent",
                left: lv.shape().to_vec(),
                right: targets.shape().to_vec(),
            });
        }
        let (rows, cols) = lv.dims2();
        let mut probs = Vec::with_capacity(rows * cols);
        let mut losses = Vec::with_capacity(rows);
        for r in 0..rows {
            let z = lv.row(r);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
            let loss = targets
                .row(r)
                .iter()
                .zip(z)
                .filter(|(&t, _)| t != 0.0)
                .map(|(&t, &v)| t * (lse - v))
                .sum::<f64>();
            losses.push(loss);
            probs.extend(softmax(z));
        }
        let probs = Tensor::matrix(rows, cols, probs)?;
        let rg = self.needs(&[logits]);
        Ok(self.push(
            Tensor::matrix(rows, 1, losses)?,
            Op::SoftmaxXent { logits, targets, probs },
            false,
            rg,
        ))
    }

    /// Max over consecutive row groups: `[groups * seg, cols] -> [groups, cols]`.
    pub fn segment_max(&mut self, a: NodeId, seg: usize) -> Result<NodeId, NumError> {
        let (rows, cols) = self.node(a)?.value.dims2();
        if seg == 0 || rows % seg != 0 {
            return Err(NumError::SegmentMismatch { rows, seg });
        }
        let groups = rows / seg;
        let v = &self.nodes[a.0].value;
        let mut data = vec![f64::NEG_INFINITY; groups * cols];
        let mut argmax = vec![0usize; groups * cols];
        for g in 0..groups {
            for s in 0..seg {
                let r = g * seg + s;
                let row = v.row(r);
                for c in 0..cols {
                    if row[c] > data[g * cols + c] {
                        data[g * cols + c] = row[c];
                        argmax[g * cols + c] = r;
                    }
                }
            }
        }
        let rg = self.needs(&[a]);
        Ok(self.push(
            Tensor::matrix(groups, cols, data)?,
            Op::SegmentMax { input: a, argmax },
            false,
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss` node. Returns a gradient for every
    /// trainable leaf created before `loss` (zero when it does not influence
    /// the loss).
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NumError> {
        let root = self.node(loss)?;
        if !root.value.is_scalar() {
            return Err(NumError::NonScalar(root.value.shape().to_vec()));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::filled(root.value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            if node.trainable {
                adj[idx] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut adj)?;
        }

        let mut grads = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate().take(loss.0 + 1) {
            if node.trainable {
                let g = adj[idx].take().unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                grads.insert(NodeId(idx), g);
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, adj: &mut [Option<Tensor>]) -> Result<(), NumError> {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let va = &self.nodes[a.0].value;
                let vb = &self.nodes[b.0].value;
                let (m, k) = va.dims2();
                let n = vb.cols();
                if self.nodes[a.0].requires_grad {
                    // dA = dC · Bᵀ
                    let mut da = vec![0.0; m * k];
                    gemm_strided(
                        m,
                        n,
                        k,
                        g.data(),
                        (n as isize, 1),
                        vb.data(),
                        (1, n as isize),
                        &mut da,
                        false,
                    );
                    accumulate(adj, *a, Tensor::new(va.shape().to_vec(), da)?);
                }
                if self.nodes[b.0].requires_grad {
                    // dB = Aᵀ · dC
                    let mut db = vec![0.0; k * n];
                    gemm_strided(
                        k,
                        m,
                        n,
                        va.data(),
                        (1, k as isize),
                        g.data(),
                        (n as isize, 1),
                        &mut db,
                        false,
                    );
                    accumulate(adj, *b, Tensor::new(vb.shape().to_vec(), db)?);
                }
            }
            Op::Add(a, b) => {
                self.send(adj, *a, || g.clone());
                self.send(adj, *b, || g.clone());
            }
            Op::Sub(a, b) => {
                self.send(adj, *a, || g.clone());
                self.send(adj, *b, || g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let va = &self.nodes[a.0].value;
                let vb = &self.nodes[b.0].value;
                self.send(adj, *a, || elementwise(g, vb, |x, y| x * y));
                self.send(adj, *b, || elementwise(g, va, |x, y| x * y));
            }
            Op::AddRow(a, row) => {
                self.send(adj, *a, || g.clone());
                self.send(adj, *row, || {
                    let (rows, cols) = g.dims2();
                    let mut acc = vec![0.0; cols];
                    for r in 0..rows {
                        for (s, x) in acc.iter_mut().zip(g.row(r)) {
                            *s += x;
                        }
                    }
                    Tensor::new(self.nodes[row.0].value.shape().to_vec(), acc).expect("row shape")
                });
            }
            Op::Scale(a, c) => self.send(adj, *a, || g.map(|x| c * x)),
            Op::Sigmoid(a) => self.send(adj, *a, || elementwise(g, out, |d, s| d * s * (1.0 - s))),
            Op::Tanh(a) => self.send(adj, *a, || elementwise(g, out, |d, t| d * (1.0 - t * t))),
            Op::Exp(a) => self.send(adj, *a, || elementwise(g, out, |d, e| d * e)),
            Op::Log(a) => {
                let va = &self.nodes[a.0].value;
                self.send(adj, *a, || elementwise(g, va, |d, x| d / x));
            }
            Op::Relu(a) => {
                let va = &self.nodes[a.0].value;
                self.send(adj, *a, || elementwise(g, va, |d, x| if x > 0.0 { d } else { 0.0 }));
            }
            Op::ConcatCols(parts) => {
                let rows = g.rows();
                let mut offset = 0;
                for p in parts {
                    let width = self.nodes[p.0].value.cols();
                    if self.nodes[p.0].requires_grad {
                        let mut data = Vec::with_capacity(rows * width);
                        for r in 0..rows {
                            data.extend_from_slice(&g.row(r)[offset..offset + width]);
                        }
                        accumulate(adj, *p, Tensor::new(self.nodes[p.0].value.shape().to_vec(), data)?);
                    }
                    offset += width;
                }
            }
            Op::SliceCols(a, start, end) => {
                let va = &self.nodes[a.0].value;
                self.send(adj, *a, || {
                    let (rows, cols) = va.dims2();
                    let mut data = vec![0.0; rows * cols];
                    for r in 0..rows {
                        data[r * cols + start..r * cols + end].copy_from_slice(g.row(r));
                    }
                    Tensor::new(va.shape().to_vec(), data).expect("slice shape")
                });
            }
            Op::SumAll(a) => {
                let va = &self.nodes[a.0].value;
                let d = g.data()[0];
                self.send(adj, *a, || Tensor::filled(va.shape(), d));
            }
            Op::SoftmaxXent { logits, targets, probs } => {
                self.send(adj, *logits, || {
                    let (rows, cols) = probs.dims2();
                    let mut data = Vec::with_capacity(rows * cols);
                    for r in 0..rows {
                        let up = g.data()[r];
                        let t = targets.row(r);
                        let mass: f64 = t.iter().sum();
                        for (p, tc) in probs.row(r).iter().zip(t) {
                            data.push(up * (mass * p - tc));
                        }
                    }
                    Tensor::new(self.nodes[logits.0].value.shape().to_vec(), data).expect("logit shape")
                });
            }
            Op::SegmentMax { input, argmax } => {
                let va = &self.nodes[input.0].value;
                self.send(adj, *input, || {
                    let cols = va.cols();
                    let mut data = vec![0.0; va.len()];
                    for (slot, &r) in argmax.iter().enumerate() {
                        let c = slot % cols;
                        data[r * cols + c] += g.data()[slot];
                    }
                    Tensor::new(va.shape().to_vec(), data).expect("segment shape")
                });
            }
        }
        Ok(())
    }

    fn send(&self, adj: &mut [Option<Tensor>], id: NodeId, grad: impl FnOnce() -> Tensor) {
        if self.nodes[id.0].requires_grad {
            accumulate(adj, id, grad());
        }
    }
}

fn accumulate(adj: &mut [Option<Tensor>], id: NodeId, grad: Tensor) {
    match &mut adj[id.0] {
        Some(existing) => existing.axpy(1.0, &grad),
        slot @ None => *slot = Some(grad),
    }
}

fn elementwise(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("elementwise shapes agree")
}

/// One-hot target rows for [`Tape::softmax_xent`].
pub fn one_hot(labels: &[usize], classes: usize) -> Tensor {
    let mut data = vec![0.0; labels.len() * classes];
    for (r, &l) in labels.iter().enumerate() {
        data[r * classes + l] = 1.0;
    }
    Tensor::matrix(labels.len(), classes, data).expect("non-empty labels")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::scalar(3.0));
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum_all(sq).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[6.0]);
    }

    #[test]
    fn uniform_softmax_xent() {
        let mut tape = Tape::new();
        let z = tape.param(Tensor::matrix(1, 4, vec![0.0; 4]).unwrap());
        let l = tape.softmax_xent(z, one_hot(&[2], 4)).unwrap();
        let loss = tape.sum_all(l).unwrap();
        assert!((tape.scalar(loss).unwrap() - 4f64.ln()).abs() < 1e-15);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(z).unwrap().data(), &[0.25, 0.25, -0.75, 0.25]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let y = tape.scale(w, 2.0).unwrap();
        assert!(matches!(tape.backward(y), Err(NumError::NonScalar(_))));
    }

    #[test]
    fn dangling_reference_rejected() {
        let mut other = Tape::new();
        for _ in 0..5 {
            other.constant(Tensor::scalar(1.0));
        }
        let foreign = other.constant(Tensor::scalar(1.0));
        let mut tape = Tape::new();
        let w = tape.param(Tensor::scalar(1.0));
        assert!(matches!(tape.add(w, foreign), Err(NumError::DanglingNode(5))));
        assert!(matches!(tape.backward(foreign), Err(NumError::DanglingNode(5))));
    }

    #[test]
    fn unused_param_gets_zero_gradient() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::scalar(2.0));
        let b = tape.param(Tensor::matrix(1, 3, vec![1.0; 3]).unwrap());
        let loss = tape.sum_all(a).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(b).unwrap().data(), &[0.0; 3]);
    }

    #[test]
    fn shape_mismatch_reported() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        let b = tape.param(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        assert!(matches!(tape.matmul(a, b), Err(NumError::ShapeMismatch { .. })));
    }
}
