//! Tape-based reverse-mode automatic differentiation.
//!
//! Every operation appends a node holding its output value and whatever it
//! needs for the backward pass. Operations are fused at the granularity of
//! a layer (linear, layer norm, attention, ...) and each has a hand-written
//! gradient. Tensors are 2-D `[rows, cols]`; sequence batches are stored as
//! `[batch * len, features]`.

use crate::error::{shape_err, NnError, Result};
use crate::tensor::{gemm, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Sum { a: Var },
    AddPositional { x: Var, pos: Var, len: usize },
    Gelu { x: Var },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Attention { qkv: Var, batch: usize, len: usize, heads: usize, probs: Vec<f64> },
    MeanPool { x: Var, mask: Vec<bool>, len: usize },
    Concat { a: Var, b: Var },
    Embedding { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<f64>, probs: Vec<f64> },
    Select { x: Var, index: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

pub const LAYER_NORM_EPS: f64 = 1e-10;

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    consumed: bool,
}

fn dims(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

fn gelu_parts(x: f64) -> (f64, f64) {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    let u = C * (x + 0.044_715 * x * x * x);
    let t = u.tanh();
    let y = 0.5 * x * (1.0 + t);
    let du = C * (1.0 + 3.0 * 0.044_715 * x * x);
    let dy = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
    (y, dy)
}

/// Row-wise softmax over entries whose `keep` flag is set; others get 0.
fn masked_softmax(row: &mut [f64], keep: impl Fn(usize) -> bool) {
    let mut max = f64::NEG_INFINITY;
    for (j, v) in row.iter().enumerate() {
        if keep(j) {
            max = max.max(*v);
        }
    }
    if max == f64::NEG_INFINITY {
        row.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let mut sum = 0.0;
    for (j, v) in row.iter_mut().enumerate() {
        *v = if keep(j) { (*v - max).exp() } else { 0.0 };
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

pub fn softmax_rows(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    let c = t.cols();
    for row in out.data.chunks_mut(c) {
        masked_softmax(row, |_| true);
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward pass with respect to `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Leaf whose gradient is tracked (parameters, attribution inputs).
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: t, op: Op::Leaf, needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// Leaf excluded from differentiation (data).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: t, op: Op::Leaf, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// `x·w + b` for `x: [n, i]`, `w: [i, o]`, `b: [1, o]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (n, i) = dims(self.value(x));
        let (wi, o) = dims(self.value(w));
        if wi != i || self.value(b).len() != o {
            return Err(shape_err("linear", (i, o), (self.value(w).shape.clone(), self.value(b).shape.clone())));
        }
        let mut out = Vec::with_capacity(n * o);
        let bias = &self.value(b).data;
        for _ in 0..n {
            out.extend_from_slice(bias);
        }
        gemm(n, i, o, &self.value(x).data, (i, 1), &self.value(w).data, (o, 1), 1.0, &mut out, (o, 1));
        Ok(self.push(Tensor { shape: vec![n, o], data: out }, Op::Linear { x, w, b }, &[x, w, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape != self.value(b).shape {
            return Err(shape_err("add", &self.value(a).shape, &self.value(b).shape));
        }
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(x, y)| x + y).collect();
        let shape = self.value(a).shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::Add { a, b }, &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape != self.value(b).shape {
            return Err(shape_err("mul", &self.value(a).shape, &self.value(b).shape));
        }
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(x, y)| x * y).collect();
        let shape = self.value(a).shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::Mul { a, b }, &[a, b]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { a }, &[a])
    }

    /// Adds row `r % len` of `pos` to row `r` of `x`.
    pub fn add_positional(&mut self, x: Var, pos: Var, len: usize) -> Result<Var> {
        let (n, d) = dims(self.value(x));
        let (max_len, pd) = dims(self.value(pos));
        if pd != d || len > max_len || len == 0 || n % len != 0 {
            return Err(shape_err("add_positional", (max_len, d, "len | rows"), (pd, len, n)));
        }
        let mut data = self.value(x).data.clone();
        let p = &self.value(pos).data;
        for (r, row) in data.chunks_mut(d).enumerate() {
            let l = r % len;
            for (v, q) in row.iter_mut().zip(&p[l * d..(l + 1) * d]) {
                *v += q;
            }
        }
        Ok(self.push(Tensor { shape: vec![n, d], data }, Op::AddPositional { x, pos, len }, &[x, pos]))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data.iter().map(|&v| gelu_parts(v).0).collect();
        let shape = t.shape.clone();
        self.push(Tensor { shape, data }, Op::Gelu { x }, &[x])
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (n, d) = dims(self.value(x));
        if self.value(gamma).len() != d || self.value(beta).len() != d {
            return Err(shape_err("layer_norm", d, (self.value(gamma).len(), self.value(beta).len())));
        }
        let xs = &self.value(x).data;
        let g = &self.value(gamma).data;
        let b = &self.value(beta).data;
        let mut xhat = vec![0.0; n * d];
        let mut rstd = vec![0.0; n];
        let mut out = vec![0.0; n * d];
        for r in 0..n {
            let row = &xs[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[r] = s;
            for j in 0..d {
                let h = (row[j] - mean) * s;
                xhat[r * d + j] = h;
                out[r * d + j] = g[j] * h + b[j];
            }
        }
        Ok(self.push(Tensor { shape: vec![n, d], data: out }, Op::LayerNorm { x, gamma, beta, xhat, rstd }, &[x, gamma, beta]))
    }

    /// Multi-head scaled dot-product self-attention.
    ///
    /// `qkv` is `[batch * len, 3d]` holding Q, K and V side by side; head `h`
    /// uses columns `h*dh..(h+1)*dh` of each. Keys with `mask == false` are
    /// excluded (an additive −∞ before the softmax). Output is `[batch * len, d]`.
    pub fn attention(&mut self, qkv: Var, mask: &[bool], batch: usize, len: usize, heads: usize) -> Result<Var> {
        let (n, w) = dims(self.value(qkv));
        if n != batch * len || mask.len() != n || w % 3 != 0 || (w / 3) % heads != 0 {
            return Err(shape_err("attention", (batch * len, "3·d, d % heads == 0"), (n, w, heads)));
        }
        let d = w / 3;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let src = &self.value(qkv).data;
        let mut out = vec![0.0; n * d];
        let mut probs = vec![0.0; batch * heads * len * len];
        for b in 0..batch {
            let keep = |j: usize| mask[b * len + j];
            for h in 0..heads {
                let q_off = b * len * w + h * dh;
                let p = &mut probs[(b * heads + h) * len * len..][..len * len];
                gemm(len, dh, len, &src[q_off..], (w, 1), &src[q_off + d..], (1, w), 0.0, p, (len, 1));
                for row in p.chunks_mut(len) {
                    row.iter_mut().for_each(|v| *v *= scale);
                    masked_softmax(row, keep);
                }
                gemm(len, len, dh, p, (len, 1), &src[q_off + 2 * d..], (w, 1), 0.0, &mut out[b * len * d + h * dh..], (d, 1));
            }
        }
        let op = Op::Attention { qkv, batch, len, heads, probs };
        Ok(self.push(Tensor { shape: vec![n, d], data: out }, op, &[qkv]))
    }

    /// Mean over valid rows of each length-`len` block: `[batch * len, d] -> [batch, d]`.
    pub fn mean_pool(&mut self, x: Var, mask: &[bool], len: usize) -> Result<Var> {
        let (n, d) = dims(self.value(x));
        if len == 0 || n % len != 0 || mask.len() != n {
            return Err(shape_err("mean_pool", ("rows divisible by len", n), (len, mask.len())));
        }
        let batch = n / len;
        let xs = &self.value(x).data;
        let mut out = vec![0.0; batch * d];
        for b in 0..batch {
            let valid = mask[b * len..(b + 1) * len].iter().filter(|&&m| m).count();
            if valid == 0 {
                continue;
            }
            let o = &mut out[b * d..(b + 1) * d];
            for l in (0..len).filter(|&l| mask[b * len + l]) {
                for (acc, v) in o.iter_mut().zip(&xs[(b * len + l) * d..][..d]) {
                    *acc += v;
                }
            }
            o.iter_mut().for_each(|v| *v /= valid as f64);
        }
        Ok(self.push(Tensor { shape: vec![batch, d], data: out }, Op::MeanPool { x, mask: mask.to_vec(), len }, &[x]))
    }

    /// Column-wise concatenation `[n, p] ++ [n, q] -> [n, p + q]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, p) = dims(self.value(a));
        let (nb, q) = dims(self.value(b));
        if n != nb {
            return Err(shape_err("concat_cols", n, nb));
        }
        let mut data = Vec::with_capacity(n * (p + q));
        for r in 0..n {
            data.extend_from_slice(self.value(a).row(r));
            data.extend_from_slice(self.value(b).row(r));
        }
        Ok(self.push(Tensor { shape: vec![n, p + q], data }, Op::Concat { a, b }, &[a, b]))
    }

    /// Row lookup `table[ids[r]]`.
    pub fn embedding(&mut self, table: Var, ids: Vec<usize>) -> Result<Var> {
        let (v, d) = dims(self.value(table));
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(shape_err("embedding", format!("id < {v}"), bad));
        }
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in &ids {
            data.extend_from_slice(self.value(table).row(i));
        }
        let shape = vec![ids.len(), d];
        Ok(self.push(Tensor { shape, data }, Op::Embedding { table, ids }, &[table]))
    }

    /// Mean softmax cross-entropy against class labels, with optional label smoothing.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize], smoothing: f64) -> Result<Var> {
        let (b, c) = dims(self.value(logits));
        if labels.len() != b || labels.iter().any(|&l| l >= c) {
            return Err(shape_err("cross_entropy", (b, format!("labels < {c}")), labels.len()));
        }
        let probs = softmax_rows(self.value(logits)).data;
        let mut targets = vec![smoothing / c as f64; b * c];
        for (r, &l) in labels.iter().enumerate() {
            targets[r * c + l] += 1.0 - smoothing;
        }
        let z = &self.value(logits).data;
        let mut loss = 0.0;
        for r in 0..b {
            let row = &z[r * c..(r + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for j in 0..c {
                loss += targets[r * c + j] * (lse - row[j]);
            }
        }
        loss /= b as f64;
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, targets, probs }, &[logits]))
    }

    /// Scalar element `x.data[index]`.
    pub fn select(&mut self, x: Var, index: usize) -> Result<Var> {
        let t = self.value(x);
        if index >= t.len() {
            return Err(shape_err("select", format!("index < {}", t.len()), index));
        }
        let v = t.data[index];
        Ok(self.push(Tensor::scalar(v), Op::Select { x, index }, &[x]))
    }

    /// Reverse-mode pass from a scalar. A graph supports exactly one backward pass.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(NnError::GraphConsumed);
        }
        let Some(root) = self.nodes.get(loss.0) else {
            return Err(NnError::UnknownVar);
        };
        if root.value.len() != 1 {
            return Err(NnError::NotScalar(root.value.shape.clone()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn backward_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let val = |v: Var| &nodes[v.0].value;
        fn acc<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
            if !nodes[v.0].needs_grad {
                return None;
            }
            let n = nodes[v.0].value.len();
            Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
        }
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (n, k) = dims(val(*x));
                let o = val(*w).cols();
                if let Some(dx) = acc(nodes, grads, *x) {
                    gemm(n, o, k, g, (o, 1), &val(*w).data, (1, o), 1.0, dx, (k, 1));
                }
                if let Some(dw) = acc(nodes, grads, *w) {
                    gemm(k, n, o, &val(*x).data, (1, k), g, (o, 1), 1.0, dw, (o, 1));
                }
                if let Some(db) = acc(nodes, grads, *b) {
                    for row in g.chunks(o) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    if let Some(d) = acc(nodes, grads, v) {
                        d.iter_mut().zip(g).for_each(|(d, g)| *d += g);
                    }
                }
            }
            Op::Mul { a, b } => {
                if let Some(d) = acc(nodes, grads, *a) {
                    for ((d, g), y) in d.iter_mut().zip(g).zip(&val(*b).data) {
                        *d += g * y;
                    }
                }
                if let Some(d) = acc(nodes, grads, *b) {
                    for ((d, g), x) in d.iter_mut().zip(g).zip(&val(*a).data) {
                        *d += g * x;
                    }
                }
            }
            Op::Sum { a } => {
                if let Some(d) = acc(nodes, grads, *a) {
                    d.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::AddPositional { x, pos, len } => {
                if let Some(d) = acc(nodes, grads, *x) {
                    d.iter_mut().zip(g).for_each(|(d, g)| *d += g);
                }
                let dm = val(*pos).cols();
                if let Some(dp) = acc(nodes, grads, *pos) {
                    for (r, row) in g.chunks(dm).enumerate() {
                        let l = r % len;
                        for (d, v) in dp[l * dm..(l + 1) * dm].iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                }
            }
            Op::Gelu { x } => {
                if let Some(d) = acc(nodes, grads, *x) {
                    for ((d, g), &xv) in d.iter_mut().zip(g).zip(&val(*x).data) {
                        *d += g * gelu_parts(xv).1;
                    }
                }
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let dm = val(*gamma).len();
                let gm = &val(*gamma).data;
                if let Some(dg) = acc(nodes, grads, *gamma) {
                    for (row_g, row_h) in g.chunks(dm).zip(xhat.chunks(dm)) {
                        for j in 0..dm {
                            dg[j] += row_g[j] * row_h[j];
                        }
                    }
                }
                if let Some(db) = acc(nodes, grads, *beta) {
                    for row_g in g.chunks(dm) {
                        db.iter_mut().zip(row_g).for_each(|(d, v)| *d += v);
                    }
                }
                if let Some(dx) = acc(nodes, grads, *x) {
                    let mut dxhat = vec![0.0; dm];
                    for r in 0..rstd.len() {
                        let gr = &g[r * dm..(r + 1) * dm];
                        let hr = &xhat[r * dm..(r + 1) * dm];
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for j in 0..dm {
                            dxhat[j] = gr[j] * gm[j];
                            m1 += dxhat[j];
                            m2 += dxhat[j] * hr[j];
                        }
                        m1 /= dm as f64;
                        m2 /= dm as f64;
                        for j in 0..dm {
                            dx[r * dm + j] += rstd[r] * (dxhat[j] - m1 - hr[j] * m2);
                        }
                    }
                }
            }
            Op::Attention { qkv, batch, len, heads, probs } => {
                let Some(dqkv) = acc(nodes, grads, *qkv) else { return };
                let (batch, len, heads) = (*batch, *len, *heads);
                let src = &val(*qkv).data;
                let w = val(*qkv).cols();
                let d = w / 3;
                let dh = d / heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let mut dp = vec![0.0; len * len];
                for b in 0..batch {
                    for h in 0..heads {
                        let q_off = b * len * w + h * dh;
                        let o_off = b * len * d + h * dh;
                        let p = &probs[(b * heads + h) * len * len..][..len * len];
                        // dV += Pᵀ dO
                        gemm(len, len, dh, p, (1, len), &g[o_off..], (d, 1), 1.0, &mut dqkv[q_off + 2 * d..], (w, 1));
                        // dP = dO Vᵀ
                        gemm(len, dh, len, &g[o_off..], (d, 1), &src[q_off + 2 * d..], (1, w), 0.0, &mut dp, (len, 1));
                        // dS = P ⊙ (dP − rowsum(dP ⊙ P)), scaled
                        for (drow, prow) in dp.chunks_mut(len).zip(p.chunks(len)) {
                            let dot: f64 = drow.iter().zip(prow).map(|(a, b)| a * b).sum();
                            for (dv, pv) in drow.iter_mut().zip(prow) {
                                *dv = pv * (*dv - dot) * scale;
                            }
                        }
                        // dQ += dS K, dK += dSᵀ Q
                        gemm(len, len, dh, &dp, (len, 1), &src[q_off + d..], (w, 1), 1.0, &mut dqkv[q_off..], (w, 1));
                        gemm(len, len, dh, &dp, (1, len), &src[q_off..], (w, 1), 1.0, &mut dqkv[q_off + d..], (w, 1));
                    }
                }
            }
            Op::MeanPool { x, mask, len } => {
                let Some(dx) = acc(nodes, grads, *x) else { return };
                let dm = val(*x).cols();
                for (b, gb) in g.chunks(dm).enumerate() {
                    let m = &mask[b * len..(b + 1) * len];
                    let valid = m.iter().filter(|&&v| v).count();
                    if valid == 0 {
                        continue;
                    }
                    for l in (0..*len).filter(|&l| m[l]) {
                        for (d, v) in dx[(b * len + l) * dm..][..dm].iter_mut().zip(gb) {
                            *d += v / valid as f64;
                        }
                    }
                }
            }
            Op::Concat { a, b } => {
                let p = val(*a).cols();
                let q = val(*b).cols();
                if let Some(da) = acc(nodes, grads, *a) {
                    for (r, row) in g.chunks(p + q).enumerate() {
                        da[r * p..(r + 1) * p].iter_mut().zip(&row[..p]).for_each(|(d, v)| *d += v);
                    }
                }
                if let Some(db) = acc(nodes, grads, *b) {
                    for (r, row) in g.chunks(p + q).enumerate() {
                        db[r * q..(r + 1) * q].iter_mut().zip(&row[p..]).for_each(|(d, v)| *d += v);
                    }
                }
            }
            Op::Embedding { table, ids } => {
                let dm = val(*table).cols();
                if let Some(dt) = acc(nodes, grads, *table) {
                    for (row, &id) in g.chunks(dm).zip(ids) {
                        dt[id * dm..(id + 1) * dm].iter_mut().zip(row).for_each(|(d, v)| *d += v);
                    }
                }
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let b = val(*logits).rows() as f64;
                if let Some(d) = acc(nodes, grads, *logits) {
                    for ((d, p), t) in d.iter_mut().zip(probs).zip(targets) {
                        *d += g[0] * (p - t) / b;
                    }
                }
            }
            Op::Select { x, index } => {
                if let Some(d) = acc(nodes, grads, *x) {
                    d[*index] += g[0];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn second_backward_fails() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(2.0));
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        assert!(matches!(g.backward(y), Err(NnError::GraphConsumed)));
    }

    #[test]
    fn non_scalar_and_foreign_vars_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![2, 2]));
        assert!(matches!(g.backward(x), Err(NnError::NotScalar(_))));
        let mut empty = Graph::new();
        assert!(matches!(empty.backward(x), Err(NnError::UnknownVar)));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let t = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -500.0, 0.0, 700.0]).unwrap();
        let s = softmax_rows(&t);
        for r in 0..2 {
            assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_valid_key_returns_its_value() {
        let mut g = Graph::new();
        // batch 1, len 3, d 2, one head; only key 1 is valid
        let mut data = Vec::new();
        for r in 0..3 {
            let r = r as f64;
            data.extend([r, 1.0 - r, 0.3 * r, 2.0, 10.0 + r, -r]);
        }
        let qkv = g.leaf(Tensor::matrix(3, 6, data).unwrap());
        let out = g.attention(qkv, &[false, true, false], 1, 3, 1).unwrap();
        for r in 0..3 {
            assert_eq!(g.value(out).row(r), &[11.0, -1.0]);
        }
    }

    #[test]
    fn layer_norm_rows_are_standardised() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::matrix(2, 4, vec![1.0, 2.0, 3.0, 10.0, -4.0, 0.5, 0.25, 8.0]).unwrap());
        let gamma = g.leaf(Tensor::matrix(1, 4, vec![1.0; 4]).unwrap());
        let beta = g.leaf(Tensor::zeros(vec![1, 4]));
        let y = g.layer_norm(x, gamma, beta).unwrap();
        for r in 0..2 {
            let row = g.value(y).row(r);
            let mean = row.iter().sum::<f64>() / 4.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-8);
        }
    }
}
