//! Minimal reverse-mode automatic differentiation over dense `f32`
//! matrices.
//!
//! A [`Graph`] is an eagerly-evaluated tape: every operation computes its
//! value when it is recorded, and [`Graph::backward`] walks the tape in
//! reverse insertion order to accumulate total derivatives into every
//! parameter node. Insertion order is a topological order by
//! construction (operands must already exist), which fixes the gradient
//! accumulation order and makes runs with identical seeds bit-identical.
//!
//! Everything is 32-bit and at most two-dimensional. Where an operation
//! accepts a single-row right-hand side (`add`, `mul`, `concat`) it
//! broadcasts that row over the rows of the left-hand side; there is no
//! other broadcasting.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f32`. Scalars are `1x1`, row vectors `1xn`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "Mat dimensions must be positive");
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, v: f32) -> Self {
        assert!(rows > 0 && cols > 0, "Mat dimensions must be positive");
        Mat { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat data length mismatch");
        Mat { rows, cols, data }
    }

    pub fn scalar(v: f32) -> Self {
        Mat { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn row(values: &[f32]) -> Self {
        Mat { rows: 1, cols: values.len(), data: values.to_vec() }
    }

    /// Uniform random entries in `[lo, hi)`, deterministic per rng state.
    pub fn uniform<R: Rng>(rows: usize, cols: usize, lo: f32, hi: f32, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect();
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn row_slice(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single element of a `1x1` matrix.
    pub fn item(&self) -> f32 {
        assert_eq!(self.data.len(), 1, "item() requires a 1x1 matrix");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self = tau * other + (1 - tau) * self`, elementwise.
    pub fn lerp_from(&mut self, other: &Mat, tau: f32) {
        assert_eq!(self.shape(), other.shape(), "lerp_from shape mismatch");
        for (t, o) in self.data.iter_mut().zip(&other.data) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }

    /// `self @ other`, plain matrix product.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        gemm(1.0, self, false, other, false, 0.0, &mut out);
        out
    }

    fn map(&self, f: impl Fn(f32) -> f32) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// `c = alpha * op(a) @ op(b) + beta * c` where `op` is an optional
/// transpose. Thin wrapper over the blocked kernel in `matrixmultiply`.
fn gemm(alpha: f32, a: &Mat, ta: bool, b: &Mat, tb: bool, beta: f32, c: &mut Mat) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "gemm inner dimension mismatch");
    assert_eq!((c.rows, c.cols), (m, n), "gemm output shape mismatch");
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// Handle to a node in a [`Graph`]. Ids are dense and ordered by
/// insertion, which is also a topological order of the DAG.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

const LOG_FLOOR: f32 = 1e-12;

#[derive(Debug)]
enum Op {
    Input,
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax(NodeId),
    Log(NodeId),
    Sum(NodeId),
    Mse(NodeId, NodeId),
    Gather(NodeId, Vec<usize>),
    Concat(NodeId, NodeId),
    Scale(NodeId, f32),
}

struct Node {
    op: Op,
    value: Mat,
}

/// Gradients of a scalar loss with respect to the graph's parameter
/// nodes, keyed by node id.
pub struct Gradients {
    by_node: HashMap<NodeId, Mat>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> &Mat {
        self.by_node
            .get(&id)
            .expect("gradient requested for a non-parameter node")
    }
}

/// Eagerly-evaluated computation tape.
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<NodeId>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), params: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Mat) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    /// Leaf node with no gradient tracking. Also the stop-gradient
    /// primitive: re-entering a value as a constant detaches it.
    pub fn constant(&mut self, value: Mat) -> NodeId {
        self.push(Op::Input, value)
    }

    /// Leaf node whose gradient is reported by [`Graph::backward`].
    pub fn param(&mut self, value: Mat) -> NodeId {
        let id = self.push(Op::Input, value);
        self.params.push(id);
        id
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id.0].value
    }

    /// Elementwise sum. `b` may be a single row, broadcast over the rows
    /// of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.cols, vb.cols, "add column mismatch");
        assert!(va.rows == vb.rows || vb.rows == 1, "add row mismatch");
        let mut out = va.clone();
        for r in 0..out.rows {
            let br = if vb.rows == 1 { 0 } else { r };
            for c in 0..out.cols {
                out.data[r * out.cols + c] += vb.get(br, c);
            }
        }
        self.push(Op::Add(a, b), out)
    }

    /// Elementwise product, with the same row-broadcast rule as [`Graph::add`].
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.cols, vb.cols, "mul column mismatch");
        assert!(va.rows == vb.rows || vb.rows == 1, "mul row mismatch");
        let mut out = va.clone();
        for r in 0..out.rows {
            let br = if vb.rows == 1 { 0 } else { r };
            for c in 0..out.cols {
                out.data[r * out.cols + c] *= vb.get(br, c);
            }
        }
        self.push(Op::Mul(a, b), out)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        self.push(Op::MatMul(a, b), out)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x.0].value.map(sigmoid);
        self.push(Op::Sigmoid(x), out)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x.0].value.map(f32::tanh);
        self.push(Op::Tanh(x), out)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let v = &self.nodes[x.0].value;
        let mut out = v.clone();
        for r in 0..out.rows {
            softmax_row(&mut out.data[r * out.cols..(r + 1) * out.cols]);
        }
        self.push(Op::Softmax(x), out)
    }

    /// Natural log with the input clamped at `1e-12`.
    pub fn log(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x.0].value.map(|v| v.max(LOG_FLOOR).ln());
        self.push(Op::Log(x), out)
    }

    /// Sum of all elements, as a `1x1` node.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s: f32 = self.nodes[x.0].value.data.iter().sum();
        self.push(Op::Sum(x), Mat::scalar(s))
    }

    /// Mean squared error between two same-shape nodes, as a `1x1` node.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.shape(), vb.shape(), "mse shape mismatch");
        let n = va.data.len() as f32;
        let s: f32 = va
            .data
            .iter()
            .zip(&vb.data)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.push(Op::Mse(a, b), Mat::scalar(s / n))
    }

    /// Select rows of `x` by index; indices may repeat.
    pub fn gather(&mut self, x: NodeId, indices: Vec<usize>) -> NodeId {
        let v = &self.nodes[x.0].value;
        assert!(!indices.is_empty(), "gather needs at least one index");
        let mut out = Mat::zeros(indices.len(), v.cols);
        for (i, &ix) in indices.iter().enumerate() {
            assert!(ix < v.rows, "gather index out of range");
            out.data[i * v.cols..(i + 1) * v.cols].copy_from_slice(v.row_slice(ix));
        }
        self.push(Op::Gather(x, indices), out)
    }

    /// Column-wise concatenation. `b` may be a single row, broadcast over
    /// the rows of `a`.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert!(va.rows == vb.rows || vb.rows == 1, "concat row mismatch");
        let cols = va.cols + vb.cols;
        let mut out = Mat::zeros(va.rows, cols);
        for r in 0..va.rows {
            let br = if vb.rows == 1 { 0 } else { r };
            out.data[r * cols..r * cols + va.cols].copy_from_slice(va.row_slice(r));
            out.data[r * cols + va.cols..(r + 1) * cols].copy_from_slice(vb.row_slice(br));
        }
        self.push(Op::Concat(a, b), out)
    }

    pub fn scale(&mut self, x: NodeId, c: f32) -> NodeId {
        let out = self.nodes[x.0].value.map(|v| c * v);
        self.push(Op::Scale(x, c), out)
    }

    /// Convenience: `a - b` via scale and add, same broadcast rule.
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let nb = self.scale(b, -1.0);
        self.add(a, nb)
    }

    /// Reverse accumulation from a scalar loss.
    ///
    /// Every parameter node reachable from `loss` receives its total
    /// derivative; unreachable parameters get zeros. Non-finite forward
    /// values anywhere in the graph fail with a numeric fault.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        assert_eq!(
            self.nodes[loss.0].value.shape(),
            (1, 1),
            "backward requires a scalar loss"
        );
        for node in &self.nodes {
            if !node.value.is_finite() {
                return Err(Error::Numeric(
                    "non-finite value in forward graph".to_string(),
                ));
            }
        }

        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            self.propagate(i, &dy, &mut grads);
            grads[i] = Some(dy);
        }

        let mut by_node = HashMap::new();
        for &p in &self.params {
            let g = grads[p.0]
                .take()
                .unwrap_or_else(|| Mat::zeros(self.nodes[p.0].value.rows, self.nodes[p.0].value.cols));
            by_node.insert(p, g);
        }
        Ok(Gradients { by_node })
    }

    fn propagate(&self, i: usize, dy: &Mat, grads: &mut [Option<Mat>]) {
        let value = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Input => {}
            Op::Add(a, b) => {
                accumulate(grads, *a, self.shape_of(*a), |da| {
                    for (d, g) in da.data.iter_mut().zip(&dy.data) {
                        *d += g;
                    }
                });
                let bshape = self.shape_of(*b);
                accumulate(grads, *b, bshape, |db| {
                    add_rows_into(db, dy);
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                accumulate(grads, *a, va.shape(), |da| {
                    for r in 0..dy.rows {
                        let br = if vb.rows == 1 { 0 } else { r };
                        for c in 0..dy.cols {
                            da.data[r * dy.cols + c] += dy.get(r, c) * vb.get(br, c);
                        }
                    }
                });
                accumulate(grads, *b, vb.shape(), |db| {
                    for r in 0..dy.rows {
                        let br = if vb.rows == 1 { 0 } else { r };
                        for c in 0..dy.cols {
                            db.data[br * dy.cols + c] += dy.get(r, c) * va.get(r, c);
                        }
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                accumulate(grads, *a, va.shape(), |da| {
                    gemm(1.0, dy, false, vb, true, 1.0, da);
                });
                accumulate(grads, *b, vb.shape(), |db| {
                    gemm(1.0, va, true, dy, false, 1.0, db);
                });
            }
            Op::Sigmoid(x) => {
                accumulate(grads, *x, value.shape(), |dx| {
                    for i in 0..value.data.len() {
                        let y = value.data[i];
                        dx.data[i] += dy.data[i] * y * (1.0 - y);
                    }
                });
            }
            Op::Tanh(x) => {
                accumulate(grads, *x, value.shape(), |dx| {
                    for i in 0..value.data.len() {
                        let y = value.data[i];
                        dx.data[i] += dy.data[i] * (1.0 - y * y);
                    }
                });
            }
            Op::Softmax(x) => {
                accumulate(grads, *x, value.shape(), |dx| {
                    for r in 0..value.rows {
                        let row = value.row_slice(r);
                        let dyr = &dy.data[r * dy.cols..(r + 1) * dy.cols];
                        let dot: f32 = row.iter().zip(dyr).map(|(y, g)| y * g).sum();
                        for c in 0..value.cols {
                            dx.data[r * value.cols + c] += row[c] * (dyr[c] - dot);
                        }
                    }
                });
            }
            Op::Log(x) => {
                let vx = &self.nodes[x.0].value;
                accumulate(grads, *x, vx.shape(), |dx| {
                    for i in 0..vx.data.len() {
                        dx.data[i] += dy.data[i] / vx.data[i].max(LOG_FLOOR);
                    }
                });
            }
            Op::Sum(x) => {
                let g = dy.item();
                accumulate(grads, *x, self.shape_of(*x), |dx| {
                    for d in dx.data.iter_mut() {
                        *d += g;
                    }
                });
            }
            Op::Mse(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let scale = 2.0 * dy.item() / va.data.len() as f32;
                accumulate(grads, *a, va.shape(), |da| {
                    for i in 0..va.data.len() {
                        da.data[i] += scale * (va.data[i] - vb.data[i]);
                    }
                });
                accumulate(grads, *b, vb.shape(), |db| {
                    for i in 0..va.data.len() {
                        db.data[i] -= scale * (va.data[i] - vb.data[i]);
                    }
                });
            }
            Op::Gather(x, indices) => {
                let vx = &self.nodes[x.0].value;
                accumulate(grads, *x, vx.shape(), |dx| {
                    for (i, &ix) in indices.iter().enumerate() {
                        for c in 0..vx.cols {
                            dx.data[ix * vx.cols + c] += dy.data[i * vx.cols + c];
                        }
                    }
                });
            }
            Op::Concat(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                accumulate(grads, *a, va.shape(), |da| {
                    for r in 0..va.rows {
                        for c in 0..va.cols {
                            da.data[r * va.cols + c] += dy.get(r, c);
                        }
                    }
                });
                accumulate(grads, *b, vb.shape(), |db| {
                    for r in 0..va.rows {
                        let br = if vb.rows == 1 { 0 } else { r };
                        for c in 0..vb.cols {
                            db.data[br * vb.cols + c] += dy.get(r, va.cols + c);
                        }
                    }
                });
            }
            Op::Scale(x, c) => {
                accumulate(grads, *x, self.shape_of(*x), |dx| {
                    for (d, g) in dx.data.iter_mut().zip(&dy.data) {
                        *d += c * g;
                    }
                });
            }
        }
    }

    fn shape_of(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }
}

fn accumulate(
    grads: &mut [Option<Mat>],
    id: NodeId,
    shape: (usize, usize),
    f: impl FnOnce(&mut Mat),
) {
    let slot = &mut grads[id.0];
    if slot.is_none() {
        *slot = Some(Mat::zeros(shape.0, shape.1));
    }
    f(slot.as_mut().unwrap());
}

/// Adds `dy` into `db` where `db` is either the same shape or a single
/// row accumulating column sums.
fn add_rows_into(db: &mut Mat, dy: &Mat) {
    if db.rows == dy.rows {
        for (d, g) in db.data.iter_mut().zip(&dy.data) {
            *d += g;
        }
    } else {
        for r in 0..dy.rows {
            for c in 0..dy.cols {
                db.data[c] += dy.get(r, c);
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// In-place row softmax with max subtraction.
pub fn softmax_row(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Optimizer kind; both operate on `(parameter, gradient)` slot lists
/// whose order must be stable across steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimKind {
    Sgd,
    Adam,
}

/// SGD or bias-corrected Adam over a fixed list of parameter slots.
pub struct Optimizer {
    kind: OptimKind,
    lr: f32,
    beta1: f32,
    beta2: f32,
    eps: f32,
    step_count: u64,
    moments: Vec<(Mat, Mat)>,
}

impl Optimizer {
    pub fn sgd(lr: f32) -> Self {
        Self::new(OptimKind::Sgd, lr)
    }

    pub fn adam(lr: f32) -> Self {
        Self::new(OptimKind::Adam, lr)
    }

    pub fn new(kind: OptimKind, lr: f32) -> Self {
        assert!(lr > 0.0, "learning rate must be positive");
        Optimizer {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update over all slots. Every gradient is validated before any
    /// parameter is touched: a NaN or infinite gradient leaves the
    /// parameters exactly as they were.
    pub fn step(&mut self, slots: &mut [(&mut Mat, &Mat)]) -> Result<()> {
        for (p, g) in slots.iter() {
            assert_eq!(p.shape(), g.shape(), "optimizer slot shape mismatch");
            if !g.is_finite() {
                return Err(Error::Numeric(
                    "non-finite gradient in optimizer step".to_string(),
                ));
            }
        }
        if self.kind == OptimKind::Adam && self.moments.is_empty() {
            self.moments = slots
                .iter()
                .map(|(p, _)| (Mat::zeros(p.rows, p.cols), Mat::zeros(p.rows, p.cols)))
                .collect();
        }
        if self.kind == OptimKind::Adam {
            assert_eq!(self.moments.len(), slots.len(), "optimizer slot count changed");
        }
        self.step_count += 1;
        match self.kind {
            OptimKind::Sgd => {
                for (p, g) in slots.iter_mut() {
                    for (pv, gv) in p.data.iter_mut().zip(&g.data) {
                        *pv -= self.lr * gv;
                    }
                }
            }
            OptimKind::Adam => {
                let bc1 = 1.0 - self.beta1.powi(self.step_count as i32);
                let bc2 = 1.0 - self.beta2.powi(self.step_count as i32);
                for (slot, (p, g)) in self.moments.iter_mut().zip(slots.iter_mut()) {
                    let (m, v) = slot;
                    assert_eq!(m.shape(), p.shape(), "optimizer moment shape mismatch");
                    for i in 0..p.data.len() {
                        let gv = g.data[i];
                        m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * gv;
                        v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * gv * gv;
                        let mhat = m.data[i] / bc1;
                        let vhat = v.data[i] / bc2;
                        p.data[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Compares an analytic gradient against central finite differences.
///
/// `f` evaluates the scalar function at a parameter vector and returns
/// `(value, analytic gradient)`; the gradient is only consulted at `x`
/// itself. Returns the max over coordinates of
/// `|analytic - central| / max(1e-8, |central|)`.
pub fn grad_check<F>(mut f: F, x: &[f32], eps: f32) -> Result<f32>
where
    F: FnMut(&[f32]) -> Result<(f32, Vec<f32>)>,
{
    assert!(eps > 0.0, "grad_check step must be positive");
    let (v0, analytic) = f(x)?;
    if !v0.is_finite() {
        return Err(Error::Numeric("grad_check: f(x) is not finite".to_string()));
    }
    assert_eq!(analytic.len(), x.len(), "analytic gradient length mismatch");
    let mut worst = 0.0f32;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let (fp, _) = f(&probe)?;
        probe[i] = x[i] - eps;
        let (fm, _) = f(&probe)?;
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Numeric(
                "grad_check: perturbed evaluation is not finite".to_string(),
            ));
        }
        let central = ((fp as f64 - fm as f64) / (2.0 * eps as f64)) as f32;
        let err = (analytic[i] - central).abs() / central.abs().max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
