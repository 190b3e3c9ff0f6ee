//! Wengert tape: operations are recorded during the forward pass and replayed
//! in reverse to propagate gradients. The tape is append-only, so creation
//! order is already a topological order.

use crate::error::{Error, Result};

use super::Tensor;

/// Index of a tensor on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// C[m,n] = A[m,k] @ B[k,n]
    Matmul { a: TensorId, b: TensorId },
    /// C[m,n] = A[m,k] @ B[n,k]^T  (used for attention scores)
    MatmulNt { a: TensorId, b: TensorId },
    /// Same-shape addition, or `[m,n] + [n]` with the vector broadcast
    /// across rows.
    Add { a: TensorId, b: TensorId },
    Scale { a: TensorId, factor: f64 },
    Concat { inputs: Vec<TensorId> },
    Relu { a: TensorId },
    Sigmoid { a: TensorId },
    Softplus { a: TensorId },
    SoftmaxRows { a: TensorId },
    LayerNorm { x: TensorId, gain: TensorId, bias: TensorId },
    Mse { a: TensorId, b: TensorId },
    MeanLastAxis { a: TensorId },
    EmbeddingLookup { table: TensorId, indices: Vec<usize> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Matmul { .. } => "matmul",
            Op::MatmulNt { .. } => "matmul_nt",
            Op::Add { .. } => "add",
            Op::Scale { .. } => "scale",
            Op::Concat { .. } => "concat_last_axis",
            Op::Relu { .. } => "relu",
            Op::Sigmoid { .. } => "sigmoid",
            Op::Softplus { .. } => "softplus",
            Op::SoftmaxRows { .. } => "softmax_rows",
            Op::LayerNorm { .. } => "layer_norm_last_axis",
            Op::Mse { .. } => "mse",
            Op::MeanLastAxis { .. } => "mean_last_axis",
            Op::EmbeddingLookup { .. } => "embedding_lookup",
        }
    }
}

struct Node {
    tensor: Tensor,
    op: Op,
    /// True when this node is a grad-requiring leaf or has one upstream.
    needs_grad: bool,
}

pub struct Tape {
    nodes: Vec<Node>,
    check_finite: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

const LAYER_NORM_EPS: f64 = 1e-5;

impl Tape {
    /// Finite-value checking after every op follows the build profile
    /// (on for debug builds); override with [`with_finite_checks`].
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            check_finite: cfg!(debug_assertions),
        }
    }

    pub fn with_finite_checks(checks: bool) -> Self {
        Tape {
            nodes: Vec::new(),
            check_finite: checks,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, tensor: Tensor) -> TensorId {
        let needs_grad = tensor.requires_grad;
        self.push(tensor, Op::Leaf, needs_grad)
    }

    /// Untracked constant leaf.
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<TensorId> {
        Ok(self.leaf(Tensor::new(shape, data)?))
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].tensor.grad.as_deref()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.tensor.zero_grad();
        }
    }

    fn push(&mut self, tensor: Tensor, op: Op, needs_grad: bool) -> TensorId {
        self.nodes.push(Node {
            tensor,
            op,
            needs_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn record(&mut self, out: Tensor, op: Op, inputs: &[TensorId]) -> Result<TensorId> {
        if self.check_finite {
            if let Some(bad) = out.data().iter().find(|v| !v.is_finite()) {
                return Err(Error::numeric(op.name(), format!("non-finite value {bad}")));
            }
        }
        let needs_grad = inputs.iter().any(|id| self.nodes[id.0].needs_grad);
        Ok(self.push(out, op, needs_grad))
    }

    fn dims2(t: &Tensor) -> (usize, usize) {
        match t.shape() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            other => panic!("expected 1-D or 2-D tensor, got {other:?}"),
        }
    }

    // ── Forward ops ─────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = Self::dims2(ta);
        let (k2, n) = Self::dims2(tb);
        if k != k2 {
            return Err(Error::contract(format!(
                "matmul: inner dims differ ({:?} x {:?})",
                ta.shape(),
                tb.shape()
            )));
        }
        let out = matmul_raw(ta.data(), tb.data(), m, k, n);
        self.record(Tensor::new(vec![m, n], out)?, Op::Matmul { a, b }, &[a, b])
    }

    /// `A @ B^T` with `A: [m,k]` and `B: [n,k]`.
    pub fn matmul_nt(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = Self::dims2(ta);
        let (n, k2) = Self::dims2(tb);
        if k != k2 {
            return Err(Error::contract(format!(
                "matmul_nt: inner dims differ ({:?} x {:?}^T)",
                ta.shape(),
                tb.shape()
            )));
        }
        let out = matmul_nt_raw(ta.data(), tb.data(), m, k, n);
        self.record(Tensor::new(vec![m, n], out)?, Op::MatmulNt { a, b }, &[a, b])
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out = if ta.shape() == tb.shape() {
            ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect()
        } else if tb.shape().len() == 1 && tb.last_axis() == ta.last_axis() {
            // row-broadcast: add the vector to every row
            let n = ta.last_axis();
            let mut out = ta.data().to_vec();
            for row in out.chunks_mut(n) {
                for (o, y) in row.iter_mut().zip(tb.data()) {
                    *o += y;
                }
            }
            out
        } else {
            return Err(Error::contract(format!(
                "add: incompatible shapes {:?} + {:?}",
                ta.shape(),
                tb.shape()
            )));
        };
        let shape = ta.shape().to_vec();
        self.record(Tensor::new(shape, out)?, Op::Add { a, b }, &[a, b])
    }

    pub fn scale(&mut self, a: TensorId, factor: f64) -> Result<TensorId> {
        let ta = self.value(a);
        let out: Vec<f64> = ta.data().iter().map(|x| x * factor).collect();
        let shape = ta.shape().to_vec();
        self.record(Tensor::new(shape, out)?, Op::Scale { a, factor }, &[a])
    }

    /// Concatenate along the last axis; all leading extents must agree.
    pub fn concat_last_axis(&mut self, inputs: &[TensorId]) -> Result<TensorId> {
        if inputs.is_empty() {
            return Err(Error::contract("concat_last_axis: no inputs"));
        }
        let rows = Self::dims2(self.value(inputs[0])).0;
        let mut widths = Vec::with_capacity(inputs.len());
        for &id in inputs {
            let (r, c) = Self::dims2(self.value(id));
            if r != rows {
                return Err(Error::contract(format!(
                    "concat_last_axis: leading dims differ ({} vs {})",
                    rows, r
                )));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&id, &w) in inputs.iter().zip(&widths) {
                let d = self.value(id).data();
                out.extend_from_slice(&d[r * w..(r + 1) * w]);
            }
        }
        let shape = if self.value(inputs[0]).shape().len() == 1 && inputs.len() >= 1 && rows == 1 {
            // vectors concatenate to a vector
            vec![total]
        } else {
            vec![rows, total]
        };
        self.record(
            Tensor::new(shape, out)?,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
            inputs,
        )
    }

    pub fn relu(&mut self, a: TensorId) -> Result<TensorId> {
        let ta = self.value(a);
        let out: Vec<f64> = ta.data().iter().map(|&x| x.max(0.0)).collect();
        let shape = ta.shape().to_vec();
        self.record(Tensor::new(shape, out)?, Op::Relu { a }, &[a])
    }

    pub fn sigmoid(&mut self, a: TensorId) -> Result<TensorId> {
        let ta = self.value(a);
        let out: Vec<f64> = ta.data().iter().map(|&x| sigmoid_stable(x)).collect();
        let shape = ta.shape().to_vec();
        self.record(Tensor::new(shape, out)?, Op::Sigmoid { a }, &[a])
    }

    /// Numerically stable `ln(1 + e^x)`.
    pub fn softplus(&mut self, a: TensorId) -> Result<TensorId> {
        let ta = self.value(a);
        let out: Vec<f64> = ta.data().iter().map(|&x| softplus_stable(x)).collect();
        let shape = ta.shape().to_vec();
        self.record(Tensor::new(shape, out)?, Op::Softplus { a }, &[a])
    }

    pub fn softmax_rows(&mut self, a: TensorId) -> Result<TensorId> {
        let ta = self.value(a);
        let (rows, n) = Self::dims2(ta);
        let mut out = vec![0.0; rows * n];
        for r in 0..rows {
            let row = &ta.data()[r * n..(r + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, &x) in out[r * n..(r + 1) * n].iter_mut().zip(row) {
                *o = (x - max).exp();
                sum += *o;
            }
            for o in &mut out[r * n..(r + 1) * n] {
                *o /= sum;
            }
        }
        let shape = ta.shape().to_vec();
        self.record(Tensor::new(shape, out)?, Op::SoftmaxRows { a }, &[a])
    }

    /// Normalize the last axis to zero mean / unit variance, then apply the
    /// per-feature affine `gain * xhat + bias`.
    pub fn layer_norm_last_axis(
        &mut self,
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
    ) -> Result<TensorId> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        let (rows, n) = Self::dims2(tx);
        if tg.numel() != n || tb.numel() != n {
            return Err(Error::contract(format!(
                "layer_norm_last_axis: affine params must have length {n}"
            )));
        }
        let mut out = vec![0.0; rows * n];
        for r in 0..rows {
            let row = &tx.data()[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for j in 0..n {
                let xhat = (row[j] - mean) * inv_std;
                out[r * n + j] = tg.data()[j] * xhat + tb.data()[j];
            }
        }
        let shape = tx.shape().to_vec();
        self.record(
            Tensor::new(shape, out)?,
            Op::LayerNorm { x, gain, bias },
            &[x, gain, bias],
        )
    }

    /// Mean squared error over all elements; returns a scalar.
    pub fn mse(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::contract(format!(
                "mse: shapes differ {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let n = ta.numel() as f64;
        let sum: f64 = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.record(Tensor::scalar(sum / n), Op::Mse { a, b }, &[a, b])
    }

    pub fn mean_last_axis(&mut self, a: TensorId) -> Result<TensorId> {
        let ta = self.value(a);
        let (rows, n) = Self::dims2(ta);
        let out: Vec<f64> = (0..rows)
            .map(|r| ta.data()[r * n..(r + 1) * n].iter().sum::<f64>() / n as f64)
            .collect();
        self.record(Tensor::new(vec![rows], out)?, Op::MeanLastAxis { a }, &[a])
    }

    /// Gather rows of `table` at `indices`.
    pub fn embedding_lookup(&mut self, table: TensorId, indices: &[usize]) -> Result<TensorId> {
        let tt = self.value(table);
        let (vocab, d) = Self::dims2(tt);
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab) {
            return Err(Error::contract(format!(
                "embedding_lookup: index {bad} out of range (table rows {vocab})"
            )));
        }
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            out.extend_from_slice(&tt.data()[i * d..(i + 1) * d]);
        }
        self.record(
            Tensor::new(vec![indices.len(), d], out)?,
            Op::EmbeddingLookup {
                table,
                indices: indices.to_vec(),
            },
            &[table],
        )
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Each call propagates into fresh
    /// buffers and then adds them onto the persistent per-node gradients,
    /// so repeated calls accumulate until [`zero_grads`].
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::contract(format!(
                "backward: loss must be scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut local: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        local[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(gout) = local[idx].take() else {
                continue;
            };
            self.propagate(idx, &gout, &mut local)?;
            if self.nodes[idx].tensor.requires_grad {
                self.nodes[idx].tensor.accumulate_grad(&gout);
            }
        }
        Ok(())
    }

    fn needs(&self, id: TensorId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn acc(local: &mut [Option<Vec<f64>>], id: TensorId, delta: Vec<f64>) {
        match &mut local[id.0] {
            Some(buf) => {
                for (b, d) in buf.iter_mut().zip(&delta) {
                    *b += d;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(
        &self,
        idx: usize,
        gout: &[f64],
        local: &mut [Option<Vec<f64>>],
    ) -> Result<()> {
        let op = self.nodes[idx].op.clone();
        match op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (ta, tb) = (self.value(a), self.value(b));
                let (m, k) = Self::dims2(ta);
                let n = Self::dims2(tb).1;
                if self.needs(a) {
                    // dA = G @ B^T
                    Self::acc(local, a, matmul_nt_raw(gout, tb.data(), m, n, k));
                }
                if self.needs(b) {
                    // dB = A^T @ G
                    Self::acc(local, b, matmul_tn_raw(ta.data(), gout, m, k, n));
                }
            }
            Op::MatmulNt { a, b } => {
                let (ta, tb) = (self.value(a), self.value(b));
                let (m, k) = Self::dims2(ta);
                let n = Self::dims2(tb).0;
                if self.needs(a) {
                    // dA = G @ B
                    Self::acc(local, a, matmul_raw(gout, tb.data(), m, n, k));
                }
                if self.needs(b) {
                    // dB = G^T @ A
                    Self::acc(local, b, matmul_tn_raw(gout, ta.data(), m, n, k));
                }
            }
            Op::Add { a, b } => {
                let (ta, tb) = (self.value(a), self.value(b));
                if self.needs(a) {
                    Self::acc(local, a, gout.to_vec());
                }
                if self.needs(b) {
                    if ta.shape() == tb.shape() {
                        Self::acc(local, b, gout.to_vec());
                    } else {
                        // broadcast vector: column-sum the upstream gradient
                        let n = tb.numel();
                        let mut gb = vec![0.0; n];
                        for row in gout.chunks(n) {
                            for (g, r) in gb.iter_mut().zip(row) {
                                *g += r;
                            }
                        }
                        Self::acc(local, b, gb);
                    }
                }
            }
            Op::Scale { a, factor } => {
                if self.needs(a) {
                    Self::acc(local, a, gout.iter().map(|g| g * factor).collect());
                }
            }
            Op::Concat { inputs } => {
                let rows = Self::dims2(&self.nodes[idx].tensor).0;
                let widths: Vec<usize> =
                    inputs.iter().map(|&id| Self::dims2(self.value(id)).1).collect();
                let total: usize = widths.iter().sum();
                let mut offset = 0;
                for (&id, &w) in inputs.iter().zip(&widths) {
                    if self.needs(id) {
                        let mut g = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            g.extend_from_slice(&gout[r * total + offset..r * total + offset + w]);
                        }
                        Self::acc(local, id, g);
                    }
                    offset += w;
                }
            }
            Op::Relu { a } => {
                if self.needs(a) {
                    let ta = self.value(a);
                    let g = ta
                        .data()
                        .iter()
                        .zip(gout)
                        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                        .collect();
                    Self::acc(local, a, g);
                }
            }
            Op::Sigmoid { a } => {
                if self.needs(a) {
                    let s = self.nodes[idx].tensor.data();
                    let g = s.iter().zip(gout).map(|(&s, &g)| g * s * (1.0 - s)).collect();
                    Self::acc(local, a, g);
                }
            }
            Op::Softplus { a } => {
                if self.needs(a) {
                    let ta = self.value(a);
                    let g = ta
                        .data()
                        .iter()
                        .zip(gout)
                        .map(|(&x, &g)| g * sigmoid_stable(x))
                        .collect();
                    Self::acc(local, a, g);
                }
            }
            Op::SoftmaxRows { a } => {
                if self.needs(a) {
                    let s = self.nodes[idx].tensor.data();
                    let (rows, n) = Self::dims2(&self.nodes[idx].tensor);
                    let mut g = vec![0.0; rows * n];
                    for r in 0..rows {
                        let srow = &s[r * n..(r + 1) * n];
                        let grow = &gout[r * n..(r + 1) * n];
                        let dot: f64 = srow.iter().zip(grow).map(|(s, g)| s * g).sum();
                        for j in 0..n {
                            g[r * n + j] = srow[j] * (grow[j] - dot);
                        }
                    }
                    Self::acc(local, a, g);
                }
            }
            Op::LayerNorm { x, gain, bias } => {
                let (tx, tg) = (self.value(x), self.value(gain));
                let (rows, n) = Self::dims2(tx);
                let nf = n as f64;
                let mut gx = vec![0.0; rows * n];
                let mut gg = vec![0.0; n];
                let mut gb = vec![0.0; n];
                for r in 0..rows {
                    let row = &tx.data()[r * n..(r + 1) * n];
                    let grow = &gout[r * n..(r + 1) * n];
                    let mean = row.iter().sum::<f64>() / nf;
                    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / nf;
                    let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                    // h = gout * gain; dx = inv_std * (h - mean(h) - xhat * mean(h*xhat))
                    let mut mean_h = 0.0;
                    let mut mean_hx = 0.0;
                    for j in 0..n {
                        let xhat = (row[j] - mean) * inv_std;
                        let h = grow[j] * tg.data()[j];
                        mean_h += h;
                        mean_hx += h * xhat;
                        gg[j] += grow[j] * xhat;
                        gb[j] += grow[j];
                    }
                    mean_h /= nf;
                    mean_hx /= nf;
                    for j in 0..n {
                        let xhat = (row[j] - mean) * inv_std;
                        let h = grow[j] * tg.data()[j];
                        gx[r * n + j] = inv_std * (h - mean_h - xhat * mean_hx);
                    }
                }
                if self.needs(x) {
                    Self::acc(local, x, gx);
                }
                if self.needs(gain) {
                    Self::acc(local, gain, gg);
                }
                if self.needs(bias) {
                    Self::acc(local, bias, gb);
                }
            }
            Op::Mse { a, b } => {
                let (ta, tb) = (self.value(a), self.value(b));
                let n = ta.numel() as f64;
                let g0 = gout[0];
                if self.needs(a) {
                    let g = ta
                        .data()
                        .iter()
                        .zip(tb.data())
                        .map(|(x, y)| g0 * 2.0 * (x - y) / n)
                        .collect();
                    Self::acc(local, a, g);
                }
                if self.needs(b) {
                    let g = ta
                        .data()
                        .iter()
                        .zip(tb.data())
                        .map(|(x, y)| g0 * -2.0 * (x - y) / n)
                        .collect();
                    Self::acc(local, b, g);
                }
            }
            Op::MeanLastAxis { a } => {
                if self.needs(a) {
                    let ta = self.value(a);
                    let (rows, n) = Self::dims2(ta);
                    let mut g = vec![0.0; rows * n];
                    for r in 0..rows {
                        let gr = gout[r] / n as f64;
                        for j in 0..n {
                            g[r * n + j] = gr;
                        }
                    }
                    Self::acc(local, a, g);
                }
            }
            Op::EmbeddingLookup { table, indices } => {
                if self.needs(table) {
                    let tt = self.value(table);
                    let d = Self::dims2(tt).1;
                    let mut g = vec![0.0; tt.numel()];
                    for (row, &i) in indices.iter().enumerate() {
                        for j in 0..d {
                            g[i * d + j] += gout[row * d + j];
                        }
                    }
                    Self::acc(local, table, g);
                }
            }
        }
        Ok(())
    }
}

// ── Raw kernels ─────────────────────────────────────────────────────────

/// C[m,n] = A[m,k] @ B[k,n]
fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
    c
}

/// C[m,n] = A[m,k] @ B[n,k]^T
fn matmul_nt_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            c[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    c
}

/// C[k,n] = A[m,k]^T @ B[m,n]
fn matmul_tn_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * n];
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
    c
}

pub(crate) fn sigmoid_stable(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus_stable(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor2(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let i = tape.leaf(tensor2(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let v = tape.leaf(tensor2(&[&[3.0], &[4.0]]));
        let out = tape.matmul(i, v).unwrap();
        assert_eq!(tape.value(out).data(), &[3.0, 4.0]);
    }

    #[test]
    fn softmax_symmetry() {
        let mut tape = Tape::new();
        let x = tape.leaf(tensor2(&[&[0.0, 0.0]]));
        let out = tape.softmax_rows(x).unwrap();
        assert_eq!(tape.value(out).data(), &[0.5, 0.5]);
    }

    #[test]
    fn mse_zero_residual() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let b = tape.leaf(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let out = tape.mse(a, b).unwrap();
        assert_eq!(tape.value(out).data(), &[0.0]);
    }

    #[test]
    fn backward_linear_regression_grad() {
        // loss = mse(w*x, y) with w=1, x=2, y=0  =>  dloss/dw = 2*(wx-y)*x = 8
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::new(vec![1, 1], vec![1.0]).unwrap().with_grad());
        let x = tape.leaf(Tensor::new(vec![1, 1], vec![2.0]).unwrap());
        let y = tape.leaf(Tensor::new(vec![1, 1], vec![0.0]).unwrap());
        let pred = tape.matmul(w, x).unwrap();
        let loss = tape.mse(pred, y).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &[8.0]);
    }

    #[test]
    fn backward_sigmoid_at_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0).with_grad());
        let s = tape.sigmoid(x).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[0.25]);
    }

    #[test]
    fn backward_is_linear_in_the_loss() {
        // grads from backward(a_loss) + backward(b_loss) equal grads from
        // backward(a_loss + b_loss)
        let build = |tape: &mut Tape| {
            let x = tape.leaf(Tensor::new(vec![2], vec![0.3, -1.2]).unwrap().with_grad());
            let s = tape.sigmoid(x).unwrap();
            let r = tape.relu(x).unwrap();
            let zero = tape.leaf(Tensor::zeros(vec![2]));
            let la = tape.mse(s, zero).unwrap();
            let lb = tape.mse(r, zero).unwrap();
            (x, la, lb)
        };
        let mut t1 = Tape::new();
        let (x1, la, lb) = build(&mut t1);
        t1.backward(la).unwrap();
        t1.backward(lb).unwrap();
        let accumulated = t1.grad(x1).unwrap().to_vec();

        let mut t2 = Tape::new();
        let (x2, la, lb) = build(&mut t2);
        let sum = t2.add(la, lb).unwrap();
        t2.backward(sum).unwrap();
        let joint = t2.grad(x2).unwrap();

        for (a, j) in accumulated.iter().zip(joint) {
            assert!((a - j).abs() < 1e-14, "{a} vs {j}");
        }
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap().with_grad());
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn add_row_broadcast_and_grad() {
        let mut tape = Tape::new();
        let x = tape.leaf(tensor2(&[&[1.0, 2.0], &[3.0, 4.0]]).with_grad());
        let b = tape.leaf(Tensor::new(vec![2], vec![10.0, 20.0]).unwrap().with_grad());
        let y = tape.add(x, b).unwrap();
        assert_eq!(tape.value(y).data(), &[11.0, 22.0, 13.0, 24.0]);
        let zero = tape.leaf(Tensor::zeros(vec![2, 2]));
        let loss = tape.mse(y, zero).unwrap();
        tape.backward(loss).unwrap();
        // dloss/db_j = sum_rows 2*y_ij/4
        let gb = tape.grad(b).unwrap();
        assert!((gb[0] - 2.0 * (11.0 + 13.0) / 4.0).abs() < 1e-12);
        assert!((gb[1] - 2.0 * (22.0 + 24.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn concat_splits_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(tensor2(&[&[1.0], &[2.0]]).with_grad());
        let b = tape.leaf(tensor2(&[&[3.0, 4.0], &[5.0, 6.0]]).with_grad());
        let c = tape.concat_last_axis(&[a, b]).unwrap();
        assert_eq!(tape.value(c).shape(), &[2, 3]);
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let target = tape.leaf(Tensor::zeros(vec![2, 3]));
        let loss = tape.mse(c, target).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(a).unwrap().len(), 2);
        assert_eq!(tape.grad(b).unwrap().len(), 4);
    }

    #[test]
    fn embedding_lookup_scatter_grad() {
        let mut tape = Tape::new();
        let table = tape.leaf(tensor2(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).with_grad());
        let rows = tape.embedding_lookup(table, &[2, 0, 2]).unwrap();
        assert_eq!(tape.value(rows).data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let target = tape.leaf(Tensor::zeros(vec![3, 2]));
        let loss = tape.mse(rows, target).unwrap();
        tape.backward(loss).unwrap();
        let g = tape.grad(table).unwrap();
        // row 2 was gathered twice, row 1 never
        assert!((g[4] - 2.0 * (5.0 + 5.0) / 6.0).abs() < 1e-12);
        assert_eq!(g[2], 0.0);
        assert_eq!(g[3], 0.0);
    }

    #[test]
    fn finite_check_catches_inf() {
        let mut tape = Tape::with_finite_checks(true);
        let x = tape.leaf(Tensor::new(vec![1], vec![1e308]).unwrap());
        let doubled = tape.scale(x, 10.0);
        assert!(matches!(doubled, Err(Error::Numeric { .. })));
    }

    #[test]
    fn ops_are_pure() {
        let run = || {
            let mut tape = Tape::new();
            let x = tape.leaf(tensor2(&[&[0.3, -0.7, 1.9], &[2.2, -0.1, 0.5]]));
            let g = tape.leaf(Tensor::new(vec![3], vec![1.0, 1.0, 1.0]).unwrap());
            let b = tape.leaf(Tensor::new(vec![3], vec![0.0, 0.0, 0.0]).unwrap());
            let ln = tape.layer_norm_last_axis(x, g, b).unwrap();
            let sm = tape.softmax_rows(ln).unwrap();
            tape.value(sm).data().to_vec()
        };
        assert_eq!(run(), run());
    }
}
