//! Tape-based reverse-mode differentiation over [`Array`] values.
//!
//! Operations are appended to a [`Tape`] as they are evaluated, so the tape
//! is always in topological order. [`Tape::backward`] walks it in reverse and
//! returns the gradient of a scalar loss with respect to every node that
//! depends on a trainable leaf.

use crate::array::check_finite;
use crate::{Array, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Concatenation axis: `Rows` stacks vertically (axis 0), `Cols` side by side (axis 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    Concat(Vec<Var>, Axis),
    MeanRows(Var),
    Sum(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    CrossEntropy { logits: Var, target: usize, probs: Vec<f64> },
}

#[derive(Clone, Debug)]
struct Node {
    value: Array,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of evaluated operations.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of a backward pass: one optional gradient buffer per tape node.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `var`, or `None` when `var` does not
    /// depend on any trainable leaf.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradient for `var` into `target`'s gradient buffer. Nodes the
    /// loss did not reach contribute nothing.
    pub fn accumulate_into(&self, var: Var, target: &mut Array) -> Result<(), TensorError> {
        match self.get(var) {
            Some(g) => target.accumulate_grad(g),
            None if target.is_trainable() => Ok(()),
            None => Err(TensorError::MissingGrad),
        }
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

    /// Records a leaf. It receives a gradient iff the array is trainable.
    pub fn leaf(&mut self, array: &Array) -> Var {
        let requires_grad = array.is_trainable();
        let value = Array::from_parts(array.shape(), array.data().to_vec());
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, array: Array) -> Var {
        let value = Array::from_parts(array.shape(), array.into_data());
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Array {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> [usize; 2] {
        self.nodes[var.0].value.shape()
    }

    /// Scalar value of a `1×1` node.
    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.0].value.data()[0]
    }

    fn push(&mut self, value: Array, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn record(
        &mut self,
        name: &'static str,
        shape: [usize; 2],
        data: Vec<f64>,
        op: Op,
        inputs: &[Var],
    ) -> Result<Var, TensorError> {
        check_finite(name, &data)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(Array::from_parts(shape, data), op, requires_grad))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<[usize; 2], TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(TensorError::Shape { op, left: sa, right: sb });
        }
        Ok(sa)
    }

    fn zip(&mut self, name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var, TensorError> {
        let shape = self.same_shape(name, a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        self.record(name, shape, data, op, &[a, b])
    }

    fn map(&mut self, name: &'static str, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var, TensorError> {
        let shape = self.shape(a);
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        self.record(name, shape, data, op, &[a])
    }

    /// `a · b` for `a: n×k`, `b: k×m`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let ([n, k], [k2, m]) = (self.shape(a), self.shape(b));
        if k != k2 {
            return Err(TensorError::Shape { op: "matmul", left: [n, k], right: [k2, m] });
        }
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), n, k, m);
        self.record("matmul", [n, m], data, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ` for `a: n×k`, `b: m×k`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let ([n, k], [m, k2]) = (self.shape(a), self.shape(b));
        if k != k2 {
            return Err(TensorError::Shape { op: "matmul_t", left: [n, k], right: [m, k2] });
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let ar = &av[i * k..(i + 1) * k];
            for j in 0..m {
                let br = &bv[j * k..(j + 1) * k];
                data[i * m + j] = ar.iter().zip(br).map(|(x, y)| x * y).sum();
            }
        }
        self.record("matmul_t", [n, m], data, Op::MatMulT(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    /// Elementwise product.
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip("hadamard", a, b, Op::Hadamard(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, TensorError> {
        self.map("scale", a, Op::Scale(a, factor), |x| x * factor)
    }

    /// Adds the `1×m` row `b` to every row of `x: n×m`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var, TensorError> {
        let ([n, m], sb) = (self.shape(x), self.shape(b));
        if sb != [1, m] {
            return Err(TensorError::Shape { op: "add_row", left: [n, m], right: sb });
        }
        let bias = self.value(b).data();
        let data = self.value(x).data().chunks(m).flat_map(|r| r.iter().zip(bias).map(|(v, c)| v + c)).collect();
        self.record("add_row", [n, m], data, Op::AddRow(x, b), &[x, b])
    }

    /// Fully connected layer `x·W + b`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        self.map("sigmoid", a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        self.map("tanh", a, Op::Tanh(a), f64::tanh)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let [n, m] = self.shape(a);
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(m) {
            softmax_in_place(row);
        }
        self.record("softmax_rows", [n, m], data, Op::SoftmaxRows(a), &[a])
    }

    pub fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::EmptyShape { op: "concat", shape: [0, 0] })?;
        let s0 = self.shape(first);
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let ok = match axis {
                Axis::Rows => s[1] == s0[1],
                Axis::Cols => s[0] == s0[0],
            };
            if !ok {
                return Err(TensorError::Shape { op: "concat", left: s0, right: s });
            }
            total += match axis {
                Axis::Rows => s[0],
                Axis::Cols => s[1],
            };
        }
        let (shape, data) = match axis {
            Axis::Rows => {
                let mut data = Vec::with_capacity(total * s0[1]);
                for &p in parts {
                    data.extend_from_slice(self.value(p).data());
                }
                ([total, s0[1]], data)
            }
            Axis::Cols => {
                let n = s0[0];
                let mut data = Vec::with_capacity(n * total);
                for r in 0..n {
                    for &p in parts {
                        data.extend_from_slice(self.value(p).row(r));
                    }
                }
                ([n, total], data)
            }
        };
        self.record("concat", shape, data, Op::Concat(parts.to_vec(), axis), parts)
    }

    /// Mean over the row axis: `n×m → 1×m`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let [n, m] = self.shape(a);
        let mut data = vec![0.0; m];
        for row in self.value(a).data().chunks(m) {
            for (acc, v) in data.iter_mut().zip(row) {
                *acc += v;
            }
        }
        data.iter_mut().for_each(|x| *x /= n as f64);
        self.record("mean_rows", [1, m], data, Op::MeanRows(a), &[a])
    }

    /// Sum of all entries as a `1×1` scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let s = self.value(a).data().iter().sum();
        self.record("sum", [1, 1], vec![s], Op::Sum(a), &[a])
    }

    /// Rows `start..start+len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let [n, m] = self.shape(a);
        if len == 0 || start + len > n {
            return Err(TensorError::Shape { op: "slice_rows", left: [n, m], right: [start, len] });
        }
        let data = self.value(a).data()[start * m..(start + len) * m].to_vec();
        self.record("slice_rows", [len, m], data, Op::SliceRows(a, start), &[a])
    }

    /// Columns `start..start+len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let [n, m] = self.shape(a);
        if len == 0 || start + len > m {
            return Err(TensorError::Shape { op: "slice_cols", left: [n, m], right: [start, len] });
        }
        let data = self.value(a).data().chunks(m).flat_map(|r| r[start..start + len].iter().copied()).collect();
        self.record("slice_cols", [n, len], data, Op::SliceCols(a, start), &[a])
    }

    /// Selects rows of `table` by index (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let [n, m] = self.shape(table);
        if indices.is_empty() {
            return Err(TensorError::EmptyShape { op: "gather_rows", shape: [0, m] });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(TensorError::Shape { op: "gather_rows", left: [n, m], right: [bad, 1] });
        }
        let tv = self.value(table);
        let data = indices.iter().flat_map(|&i| tv.row(i).iter().copied()).collect();
        self.record("gather_rows", [indices.len(), m], data, Op::GatherRows(table, indices.to_vec()), &[table])
    }

    /// Softmax cross-entropy of a `1×C` logit row against class `target`.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var, TensorError> {
        let [r, c] = self.shape(logits);
        if r != 1 {
            return Err(TensorError::Shape { op: "cross_entropy", left: [r, c], right: [1, c] });
        }
        if target >= c {
            return Err(TensorError::Target { target, classes: c });
        }
        let row = self.value(logits).data();
        let arg = argmax(row);
        let max = row[arg];
        // ln Σ exp(x - max) = ln(1 + rest), accurate when one logit dominates
        let rest: f64 = row.iter().enumerate().filter(|&(j, _)| j != arg).map(|(_, x)| (x - max).exp()).sum();
        let log_z = max + rest.ln_1p();
        let loss = (max - row[target]) + rest.ln_1p();
        let probs = row.iter().map(|x| (x - log_z).exp()).collect();
        self.record("cross_entropy", [1, 1], vec![loss], Op::CrossEntropy { logits, target, probs }, &[logits])
    }

    /// Two-class cross-entropy on `1×2` logits.
    pub fn bce_loss(&mut self, logits: Var, target: usize) -> Result<Var, TensorError> {
        self.expect_width("bce_loss", logits, 2)?;
        self.cross_entropy(logits, target)
    }

    /// Three-class cross-entropy on `1×3` logits.
    pub fn cce_loss(&mut self, logits: Var, target: usize) -> Result<Var, TensorError> {
        self.expect_width("cce_loss", logits, 3)?;
        self.cross_entropy(logits, target)
    }

    fn expect_width(&self, op: &'static str, v: Var, width: usize) -> Result<(), TensorError> {
        let s = self.shape(v);
        if s != [1, width] {
            return Err(TensorError::Shape { op, left: s, right: [1, width] });
        }
        Ok(())
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let s = self.shape(loss);
        if s != [1, 1] {
            return Err(TensorError::NonScalarLoss { shape: s });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                check_finite(op_name(&self.nodes[i].op), g)?;
            }
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let ([n, k], [_, m]) = (self.shape(a), self.shape(b));
                if self.wants(a) {
                    // dA = G · Bᵀ
                    let bv = self.value(b).data();
                    let acc = slot(grads, a, n * k);
                    for i in 0..n {
                        for j in 0..m {
                            let gij = g[i * m + j];
                            if gij == 0.0 {
                                continue;
                            }
                            for t in 0..k {
                                acc[i * k + t] += gij * bv[t * m + j];
                            }
                        }
                    }
                }
                if self.wants(b) {
                    // dB = Aᵀ · G
                    let av = self.value(a).data();
                    let acc = slot(grads, b, k * m);
                    for i in 0..n {
                        for t in 0..k {
                            let ait = av[i * k + t];
                            if ait == 0.0 {
                                continue;
                            }
                            for j in 0..m {
                                acc[t * m + j] += ait * g[i * m + j];
                            }
                        }
                    }
                }
            }
            &Op::MatMulT(a, b) => {
                let ([n, k], [m, _]) = (self.shape(a), self.shape(b));
                if self.wants(a) {
                    // dA = G · B
                    let bv = self.value(b).data();
                    let acc = slot(grads, a, n * k);
                    for i in 0..n {
                        for j in 0..m {
                            let gij = g[i * m + j];
                            for t in 0..k {
                                acc[i * k + t] += gij * bv[j * k + t];
                            }
                        }
                    }
                }
                if self.wants(b) {
                    // dB = Gᵀ · A
                    let av = self.value(a).data();
                    let acc = slot(grads, b, m * k);
                    for i in 0..n {
                        for j in 0..m {
                            let gij = g[i * m + j];
                            for t in 0..k {
                                acc[j * k + t] += gij * av[i * k + t];
                            }
                        }
                    }
                }
            }
            &Op::Add(a, b) => {
                self.add_scaled(grads, a, g, 1.0);
                self.add_scaled(grads, b, g, 1.0);
            }
            &Op::Sub(a, b) => {
                self.add_scaled(grads, a, g, 1.0);
                self.add_scaled(grads, b, g, -1.0);
            }
            &Op::Hadamard(a, b) => {
                if self.wants(a) {
                    let bv = self.value(b).data();
                    let acc = slot(grads, a, g.len());
                    for ((d, gi), bi) in acc.iter_mut().zip(g).zip(bv) {
                        *d += gi * bi;
                    }
                }
                if self.wants(b) {
                    let av = self.value(a).data();
                    let acc = slot(grads, b, g.len());
                    for ((d, gi), ai) in acc.iter_mut().zip(g).zip(av) {
                        *d += gi * ai;
                    }
                }
            }
            &Op::Scale(a, factor) => self.add_scaled(grads, a, g, factor),
            &Op::AddRow(x, b) => {
                self.add_scaled(grads, x, g, 1.0);
                if self.wants(b) {
                    let m = self.shape(b)[1];
                    let acc = slot(grads, b, m);
                    for row in g.chunks(m) {
                        for (d, gi) in acc.iter_mut().zip(row) {
                            *d += gi;
                        }
                    }
                }
            }
            &Op::Sigmoid(a) => {
                if self.wants(a) {
                    let acc = slot(grads, a, g.len());
                    for ((d, gi), y) in acc.iter_mut().zip(g).zip(out.data()) {
                        *d += gi * y * (1.0 - y);
                    }
                }
            }
            &Op::Tanh(a) => {
                if self.wants(a) {
                    let acc = slot(grads, a, g.len());
                    for ((d, gi), y) in acc.iter_mut().zip(g).zip(out.data()) {
                        *d += gi * (1.0 - y * y);
                    }
                }
            }
            &Op::SoftmaxRows(a) => {
                if self.wants(a) {
                    let m = out.cols();
                    let acc = slot(grads, a, g.len());
                    for ((dr, gr), yr) in acc.chunks_mut(m).zip(g.chunks(m)).zip(out.data().chunks(m)) {
                        let dot: f64 = gr.iter().zip(yr).map(|(x, y)| x * y).sum();
                        for ((d, gi), yi) in dr.iter_mut().zip(gr).zip(yr) {
                            *d += yi * (gi - dot);
                        }
                    }
                }
            }
            Op::Concat(parts, axis) => match axis {
                Axis::Rows => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        self.add_scaled(grads, p, &g[offset..offset + len], 1.0);
                        offset += len;
                    }
                }
                Axis::Cols => {
                    let total = out.cols();
                    let mut col = 0;
                    for &p in parts {
                        let [n, w] = self.shape(p);
                        if self.wants(p) {
                            let acc = slot(grads, p, n * w);
                            for r in 0..n {
                                for c in 0..w {
                                    acc[r * w + c] += g[r * total + col + c];
                                }
                            }
                        }
                        col += w;
                    }
                }
            },
            &Op::MeanRows(a) => {
                if self.wants(a) {
                    let [n, m] = self.shape(a);
                    let inv = 1.0 / n as f64;
                    let acc = slot(grads, a, n * m);
                    for row in acc.chunks_mut(m) {
                        for (d, gi) in row.iter_mut().zip(g) {
                            *d += gi * inv;
                        }
                    }
                }
            }
            &Op::Sum(a) => {
                if self.wants(a) {
                    let len = self.value(a).len();
                    let acc = slot(grads, a, len);
                    acc.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            &Op::SliceRows(a, start) => {
                if self.wants(a) {
                    let [n, m] = self.shape(a);
                    let acc = slot(grads, a, n * m);
                    for (d, gi) in acc[start * m..start * m + g.len()].iter_mut().zip(g) {
                        *d += gi;
                    }
                }
            }
            &Op::SliceCols(a, start) => {
                if self.wants(a) {
                    let [n, m] = self.shape(a);
                    let w = out.cols();
                    let acc = slot(grads, a, n * m);
                    for r in 0..n {
                        for c in 0..w {
                            acc[r * m + start + c] += g[r * w + c];
                        }
                    }
                }
            }
            Op::GatherRows(table, indices) => {
                let table = *table;
                if self.wants(table) {
                    let [n, m] = self.shape(table);
                    let acc = slot(grads, table, n * m);
                    for (k, &i) in indices.iter().enumerate() {
                        for c in 0..m {
                            acc[i * m + c] += g[k * m + c];
                        }
                    }
                }
            }
            Op::CrossEntropy { logits, target, probs } => {
                let logits = *logits;
                if self.wants(logits) {
                    let acc = slot(grads, logits, probs.len());
                    for (j, (d, p)) in acc.iter_mut().zip(probs).enumerate() {
                        let onehot = if j == *target { 1.0 } else { 0.0 };
                        *d += g[0] * (p - onehot);
                    }
                }
            }
        }
    }

    fn add_scaled(&self, grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64], factor: f64) {
        if !self.wants(v) {
            return;
        }
        let acc = slot(grads, v, g.len());
        for (d, gi) in acc.iter_mut().zip(g) {
            *d += factor * gi;
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::MatMulT(..) => "matmul_t",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Hadamard(..) => "hadamard",
        Op::Scale(..) => "scale",
        Op::AddRow(..) => "add_row",
        Op::Sigmoid(..) => "sigmoid",
        Op::Tanh(..) => "tanh",
        Op::SoftmaxRows(..) => "softmax_rows",
        Op::Concat(..) => "concat",
        Op::MeanRows(..) => "mean_rows",
        Op::Sum(..) => "sum",
        Op::SliceRows(..) => "slice_rows",
        Op::SliceCols(..) => "slice_cols",
        Op::GatherRows(..) => "gather_rows",
        Op::CrossEntropy { .. } => "cross_entropy",
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for t in 0..k {
            let ait = a[i * k + t];
            if ait == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b[t * m..(t + 1) * m]) {
                *o += ait * bv;
            }
        }
    }
    out
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = j;
        }
    }
    best
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    row.iter_mut().for_each(|x| *x /= total);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(rows: &[&[f64]]) -> Array {
        Array::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_small_cases() {
        let mut t = Tape::new();
        let i2 = t.constant(Array::identity(2));
        let b = t.constant(arr(&[&[3.0, 4.0], &[5.0, 6.0]]));
        let y = t.matmul(i2, b).unwrap();
        assert_eq!(t.value(y).data(), &[3.0, 4.0, 5.0, 6.0]);

        let a = t.constant(arr(&[&[1.0, 2.0]]));
        let c = t.constant(arr(&[&[3.0], &[4.0]]));
        let y = t.matmul(a, c).unwrap();
        assert_eq!(t.value(y).data(), &[11.0]);

        let err = t.matmul(a, a).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 2]") && msg.contains("matmul"), "{msg}");
    }

    #[test]
    fn softmax_examples() {
        let mut t = Tape::new();
        let x = t.constant(arr(&[&[0.0, 0.0]]));
        let y = t.softmax_rows(x).unwrap();
        assert_eq!(t.value(y).data(), &[0.5, 0.5]);

        let big = t.constant(arr(&[&[1000.0, 1000.0]]));
        let y = t.softmax_rows(big).unwrap();
        assert_eq!(t.value(y).data(), &[0.5, 0.5]);

        // exp(1), exp(2), exp(3) normalised, evaluated independently with Python's math.exp
        let x = t.constant(arr(&[&[1.0, 2.0, 3.0]]));
        let y = t.softmax_rows(x).unwrap();
        let expected = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (got, want) in t.value(y).data().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn elementwise_and_dense() {
        let mut t = Tape::new();
        let z = t.constant(Array::zeros(1, 1));
        let s = t.sigmoid(z).unwrap();
        assert_eq!(t.scalar(s), 0.5);

        let a = t.constant(arr(&[&[1.0, 2.0]]));
        let b = t.constant(arr(&[&[0.0, 1.0]]));
        let h = t.hadamard(a, b).unwrap();
        assert_eq!(t.value(h).data(), &[0.0, 2.0]);

        let p = t.constant(Array::zeros(7, 100));
        let q = t.constant(Array::zeros(12, 100));
        let c = t.concat(&[p, q], Axis::Rows).unwrap();
        assert_eq!(t.shape(c), [19, 100]);
        assert!(t.concat(&[p, q], Axis::Cols).is_err());

        let x = t.constant(Array::identity(2));
        let w = t.constant(Array::identity(2));
        let bias = t.constant(arr(&[&[1.0, 1.0]]));
        let y = t.dense(x, w, bias).unwrap();
        assert_eq!(t.value(y).data(), &[2.0, 1.0, 1.0, 2.0]);

        let w0 = t.constant(Array::zeros(2, 3));
        let c = t.constant(arr(&[&[0.5, -1.0, 2.0]]));
        let y = t.dense(x, w0, c).unwrap();
        assert_eq!(t.value(y).to_rows(), vec![vec![0.5, -1.0, 2.0]; 2]);

        assert!(t.add(a, x).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let mut t = Tape::new();
        let l = t.constant(arr(&[&[0.0, 0.0]]));
        let loss = t.bce_loss(l, 0).unwrap();
        assert!((t.scalar(loss) - 2f64.ln()).abs() < 1e-15);

        let l = t.constant(arr(&[&[10.0, -10.0]]));
        let loss = t.bce_loss(l, 0).unwrap();
        // ln(1 + e^-20)
        let want = (-20f64).exp().ln_1p();
        assert!((t.scalar(loss) - want).abs() < 1e-20);
        assert!((t.scalar(loss) - 2.06e-9).abs() < 1e-11);

        let l3 = t.constant(arr(&[&[0.0, 0.0, 0.0]]));
        let loss = t.cce_loss(l3, 2).unwrap();
        assert!((t.scalar(loss) - 3f64.ln()).abs() < 1e-15);

        assert!(matches!(t.cce_loss(l3, 3), Err(TensorError::Target { target: 3, classes: 3 })));
        assert!(t.bce_loss(l3, 0).is_err());
    }

    #[test]
    fn backward_basic_rules() {
        let mut t = Tape::new();
        let xa = arr(&[&[1.0, -2.0], &[3.0, 0.5]]).requires_grad();
        let x = t.leaf(&xa);
        let s = t.sum(x).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[1.0; 4]);

        let mut t = Tape::new();
        let x = t.leaf(&xa);
        let sq = t.hadamard(x, x).unwrap();
        let s = t.sum(sq).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[2.0, -4.0, 6.0, 1.0]);

        let non_scalar = t.backward(sq);
        assert!(matches!(non_scalar, Err(TensorError::NonScalarLoss { .. })));
    }

    #[test]
    fn frozen_leaves_get_no_gradient() {
        let mut t = Tape::new();
        let w = t.leaf(&Array::filled(2, 2, 1.0).requires_grad());
        let frozen = t.leaf(&Array::filled(2, 2, 3.0));
        let y = t.hadamard(w, frozen).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap(), &[3.0; 4]);
        assert!(g.get(frozen).is_none());
    }

    #[test]
    fn non_finite_results_are_errors() {
        let mut t = Tape::new();
        let x = t.constant(Array::filled(1, 1, 1e300));
        let err = t.hadamard(x, x).unwrap_err();
        assert!(matches!(err, TensorError::NonFinite { op: "hadamard", .. }));
    }
}
