//! Reverse-mode differentiation over a linear tape of 2-D arrays.
//!
//! Every value is an `Array2`. Scalars are `1×1`, row vectors `1×n`. Nodes are
//! appended in evaluation order, so a reverse sweep visits each node after all
//! of its consumers.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{s, Array2, ArrayView1, LinalgScalar, ScalarOperand, Zip};
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

pub const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044715;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Contiguous row block `[start, start + len)` treated as one causal sequence.
pub type Segment = (usize, usize);

enum Op<F> {
    Leaf,
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, F),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Embed { table: Var, ids: Vec<usize> },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Array2<F>, rstd: Vec<F> },
    Gelu(Var),
    Attention { q: Var, k: Var, v: Var, heads: usize, segments: Vec<Segment>, probs: Vec<Array2<F>> },
    Dropout { x: Var, mask: Array2<F> },
    CrossEntropy { logits: Var, targets: Vec<usize>, weights: Vec<F>, probs: Array2<F> },
    Distill { logits: Var, targets: Vec<usize>, weights: Vec<F>, probs: Array2<F>, soft: Array2<F>, alpha: F, temperature: F },
}

struct Node<F> {
    value: Array2<F>,
    op: Op<F>,
    requires_grad: bool,
}

pub struct Graph<F: Real> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Log-sum-exp and softmax of one row, accumulated in f64.
pub(crate) fn softmax_row<F: Real>(row: ArrayView1<F>, out: &mut [F]) -> f64 {
    let m = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x.as_f64()));
    let z: f64 = row.iter().map(|&x| (x.as_f64() - m).exp()).sum();
    let lse = m + z.ln();
    for (o, &x) in out.iter_mut().zip(row.iter()) {
        *o = F::of((x.as_f64() - lse).exp());
    }
    lse
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<F>, op: Op<F>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<F>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Array2<F>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Array2<F> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> F {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Softmax rows of the attention op at `v`, one `len×len` matrix per
    /// (segment, head) in segment-major order.
    pub fn attention_probs(&self, v: Var) -> Option<&[Array2<F>]> {
        match &self.nodes[v.0].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b), &[a, b])
    }

    /// `x + row` with `row` broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let value = self.value(x) + &self.value(row).row(0);
        self.push(value, Op::AddRow(x, row), &[x, row])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: F) -> Var {
        let value = self.value(a) * c;
        self.push(value, Op::Scale(a, c), &[a])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b).t());
        self.push(value, Op::MatMulBt(a, b), &[a, b])
    }

    /// Gather rows of `table`.
    pub fn embed(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut value = Array2::zeros((ids.len(), t.ncols()));
        for (mut row, &id) in value.rows_mut().into_iter().zip(ids) {
            row.assign(&t.row(id));
        }
        self.push(value, Op::Embed { table, ids: ids.to_vec() }, &[table])
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut xhat = Array2::zeros(xv.raw_dim());
        let mut rstd = Vec::with_capacity(xv.nrows());
        for (src, mut dst) in xv.rows().into_iter().zip(xhat.rows_mut()) {
            let mean = src.iter().map(|&v| v.as_f64()).sum::<f64>() / d;
            let var = src.iter().map(|&v| (v.as_f64() - mean).powi(2)).sum::<f64>() / d;
            let r = 1.0 / (var + LN_EPS).sqrt();
            for (o, &v) in dst.iter_mut().zip(src.iter()) {
                *o = F::of((v.as_f64() - mean) * r);
            }
            rstd.push(F::of(r));
        }
        let value = &(&xhat * &self.value(gain).row(0)) + &self.value(bias).row(0);
        self.push(value, Op::LayerNorm { x, gain, bias, xhat, rstd }, &[x, gain, bias])
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| {
            let u = v.as_f64();
            F::of(0.5 * u * (1.0 + (GELU_C * (u + GELU_K * u * u * u)).tanh()))
        });
        self.push(value, Op::Gelu(x), &[x])
    }

    /// Causal multi-head attention. `q`, `k`, `v` are `N×d` with heads laid
    /// out as contiguous column blocks; rows are split into `segments` that
    /// never attend to each other.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, segments: &[Segment]) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.ncols();
        let dh = d / heads;
        let scale = F::of(1.0 / (dh as f64).sqrt());
        let mut out = Array2::zeros(qv.raw_dim());
        let mut probs = Vec::with_capacity(segments.len() * heads);
        for &(start, len) in segments {
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                let rows = start..start + len;
                let qh = qv.slice(s![rows.clone(), cols.clone()]);
                let kh = kv.slice(s![rows.clone(), cols.clone()]);
                let vh = vv.slice(s![rows.clone(), cols.clone()]);
                let scores = qh.dot(&kh.t()) * scale;
                let mut p = Array2::zeros((len, len));
                for i in 0..len {
                    let mut buf = vec![F::zero(); i + 1];
                    softmax_row(scores.slice(s![i, ..=i]), &mut buf);
                    for (j, b) in buf.into_iter().enumerate() {
                        p[[i, j]] = b;
                    }
                }
                out.slice_mut(s![rows, cols]).assign(&p.dot(&vh));
                probs.push(p);
            }
        }
        let op = Op::Attention { q, k, v, heads, segments: segments.to_vec(), probs };
        self.push(out, op, &[q, k, v])
    }

    /// Inverted dropout with keep-probability `1 - p`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Var {
        if p <= 0.0 {
            return x;
        }
        let keep = F::of(1.0 / (1.0 - p));
        let mask = self.value(x).mapv(|_| if rng.random::<f64>() < p { F::zero() } else { keep });
        let value = self.value(x) * &mask;
        self.push(value, Op::Dropout { x, mask }, &[x])
    }

    /// `Σ_i w_i · CE(logits_i, targets_i)` as a `1×1` value.
    pub fn cross_entropy_sum(&mut self, logits: Var, targets: &[usize], weights: &[F]) -> Var {
        let lv = self.value(logits);
        let mut probs = Array2::zeros(lv.raw_dim());
        let mut total = 0.0f64;
        for (i, (row, mut prow)) in lv.rows().into_iter().zip(probs.rows_mut()).enumerate() {
            let lse = softmax_row(row, prow.as_slice_mut().expect("contiguous"));
            if weights[i] != F::zero() {
                total += weights[i].as_f64() * (lse - row[targets[i]].as_f64());
            }
        }
        let op = Op::CrossEntropy { logits, targets: targets.to_vec(), weights: weights.to_vec(), probs };
        self.push(Array2::from_elem((1, 1), F::of(total)), op, &[logits])
    }

    /// `Σ_i w_i · (α·CE_i + (1−α)·T²·KL(softmax(t_i/T) ‖ softmax(s_i/T)))`.
    pub fn distill_sum(
        &mut self,
        logits: Var,
        teacher: &Array2<F>,
        targets: &[usize],
        weights: &[F],
        alpha: F,
        temperature: F,
    ) -> Var {
        let lv = self.value(logits);
        let n = lv.ncols();
        let t = temperature.as_f64();
        let a = alpha.as_f64();
        let mut probs = Array2::zeros(lv.raw_dim());
        let mut soft = Array2::zeros(lv.raw_dim());
        let mut total = 0.0f64;
        let mut ps = vec![F::zero(); n];
        let mut pt = vec![F::zero(); n];
        for i in 0..lv.nrows() {
            let row = lv.row(i);
            let lse = softmax_row(row, probs.row_mut(i).as_slice_mut().expect("contiguous"));
            if weights[i] == F::zero() {
                continue;
            }
            let ce = lse - row[targets[i]].as_f64();
            let kl = soft_kl(row, teacher.row(i), temperature, &mut ps, &mut pt);
            for (j, o) in soft.row_mut(i).iter_mut().enumerate() {
                *o = ps[j] - pt[j];
            }
            total += weights[i].as_f64() * (a * ce + (1.0 - a) * t * t * kl);
        }
        let op = Op::Distill {
            logits,
            targets: targets.to_vec(),
            weights: weights.to_vec(),
            probs,
            soft,
            alpha,
            temperature,
        };
        self.push(Array2::from_elem((1, 1), F::of(total)), op, &[logits])
    }

    /// Reverse sweep from the scalar `loss`. Returns gradients for every leaf
    /// created with `requires_grad`, zeros for leaves the loss does not touch.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        let root = &self.nodes[loss.0];
        if root.value.dim() != (1, 1) {
            return Err(Error::Graph(format!("loss must be 1x1, got {:?}", root.value.dim())));
        }
        if !root.requires_grad {
            return Err(Error::Graph("loss does not depend on any trainable leaf".into()));
        }
        let mut grads: Vec<Option<Array2<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::from_elem((1, 1), F::one()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, g, &mut grads);
        }
        let leaves = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                (matches!(n.op, Op::Leaf) && n.requires_grad)
                    .then(|| grads[i].take().unwrap_or_else(|| Array2::zeros(n.value.raw_dim())))
            })
            .collect();
        Ok(Gradients { grads: leaves })
    }

    fn accumulate(&self, grads: &mut [Option<Array2<F>>], v: Var, g: Array2<F>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => *acc += &g,
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, op: &Op<F>, g: Array2<F>, grads: &mut [Option<Array2<F>>]) {
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *b, g.clone());
                self.accumulate(grads, *a, g);
            }
            Op::AddRow(x, row) => {
                let gr = sum_rows(&g);
                self.accumulate(grads, *row, gr);
                self.accumulate(grads, *x, g);
            }
            Op::Mul(a, b) => {
                let ga = &g * self.value(*b);
                let gb = &g * self.value(*a);
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, g * *c),
            Op::MatMul(a, b) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, g.dot(&self.value(*b).t()));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, self.value(*a).t().dot(&g));
                }
            }
            Op::MatMulBt(a, b) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, g.dot(self.value(*b)));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, g.t().dot(self.value(*a)));
                }
            }
            Op::Embed { table, ids } => {
                let mut gt = Array2::zeros(self.value(*table).raw_dim());
                for (row, &id) in g.rows().into_iter().zip(ids) {
                    let mut dst = gt.row_mut(id);
                    dst += &row;
                }
                self.accumulate(grads, *table, gt);
            }
            Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                let gv = self.value(*gain);
                if self.requires_grad(*gain) {
                    self.accumulate(grads, *gain, sum_rows(&(&g * xhat)));
                }
                if self.requires_grad(*bias) {
                    self.accumulate(grads, *bias, sum_rows(&g));
                }
                if self.requires_grad(*x) {
                    let d = g.ncols() as f64;
                    let dxhat = &g * &gv.row(0);
                    let mut dx = Array2::zeros(g.raw_dim());
                    for (r, mut dst) in dx.rows_mut().into_iter().enumerate() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let m1 = dh.iter().map(|v| v.as_f64()).sum::<f64>() / d;
                        let m2 = dh.iter().zip(xh.iter()).map(|(a, b)| a.as_f64() * b.as_f64()).sum::<f64>() / d;
                        let rs = rstd[r].as_f64();
                        for ((o, &a), &b) in dst.iter_mut().zip(dh.iter()).zip(xh.iter()) {
                            *o = F::of(rs * (a.as_f64() - m1 - b.as_f64() * m2));
                        }
                    }
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::Gelu(x) => {
                let mut dx = g;
                Zip::from(&mut dx).and(self.value(*x)).for_each(|d, &v| {
                    let u = v.as_f64();
                    let th = (GELU_C * (u + GELU_K * u * u * u)).tanh();
                    let dudx = GELU_C * (1.0 + 3.0 * GELU_K * u * u);
                    *d = *d * F::of(0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * dudx);
                });
                self.accumulate(grads, *x, dx);
            }
            Op::Attention { q, k, v, heads, segments, probs } => {
                let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                let dh = qv.ncols() / heads;
                let scale = F::of(1.0 / (dh as f64).sqrt());
                let mut dq = Array2::zeros(qv.raw_dim());
                let mut dk = Array2::zeros(kv.raw_dim());
                let mut dv = Array2::zeros(vv.raw_dim());
                let mut pi = 0;
                for &(start, len) in segments {
                    for h in 0..*heads {
                        let cols = h * dh..(h + 1) * dh;
                        let rows = start..start + len;
                        let p = &probs[pi];
                        pi += 1;
                        let go = g.slice(s![rows.clone(), cols.clone()]);
                        let qh = qv.slice(s![rows.clone(), cols.clone()]);
                        let kh = kv.slice(s![rows.clone(), cols.clone()]);
                        let vh = vv.slice(s![rows.clone(), cols.clone()]);
                        dv.slice_mut(s![rows.clone(), cols.clone()]).assign(&p.t().dot(&go));
                        let dp = go.dot(&vh.t());
                        let mut ds = Array2::zeros((len, len));
                        for i in 0..len {
                            let dot: f64 = (0..=i).map(|j| dp[[i, j]].as_f64() * p[[i, j]].as_f64()).sum();
                            for j in 0..=i {
                                ds[[i, j]] = p[[i, j]] * (dp[[i, j]] - F::of(dot)) * scale;
                            }
                        }
                        dq.slice_mut(s![rows.clone(), cols.clone()]).assign(&ds.dot(&kh));
                        dk.slice_mut(s![rows, cols]).assign(&ds.t().dot(&qh));
                    }
                }
                self.accumulate(grads, *q, dq);
                self.accumulate(grads, *k, dk);
                self.accumulate(grads, *v, dv);
            }
            Op::Dropout { x, mask } => self.accumulate(grads, *x, g * mask),
            Op::CrossEntropy { logits, targets, weights, probs } => {
                let g0 = g[[0, 0]];
                let mut dl = Array2::zeros(probs.raw_dim());
                for (i, mut row) in dl.rows_mut().into_iter().enumerate() {
                    if weights[i] == F::zero() {
                        continue;
                    }
                    let c = g0 * weights[i];
                    for (j, o) in row.iter_mut().enumerate() {
                        let hard = if j == targets[i] { F::one() } else { F::zero() };
                        *o = c * (probs[[i, j]] - hard);
                    }
                }
                self.accumulate(grads, *logits, dl);
            }
            Op::Distill { logits, targets, weights, probs, soft, alpha, temperature } => {
                let g0 = g[[0, 0]];
                let beta = (F::one() - *alpha) * *temperature;
                let mut dl = Array2::zeros(probs.raw_dim());
                for (i, mut row) in dl.rows_mut().into_iter().enumerate() {
                    if weights[i] == F::zero() {
                        continue;
                    }
                    let c = g0 * weights[i];
                    for (j, o) in row.iter_mut().enumerate() {
                        let hard = if j == targets[i] { F::one() } else { F::zero() };
                        *o = c * (*alpha * (probs[[i, j]] - hard) + beta * soft[[i, j]]);
                    }
                }
                self.accumulate(grads, *logits, dl);
            }
        }
    }
}

/// `KL(softmax(t/T) ‖ softmax(s/T))` in nats for one row; fills the two
/// tempered distributions.
pub(crate) fn soft_kl<F: Real>(
    student: ArrayView1<F>,
    teacher: ArrayView1<F>,
    temperature: F,
    ps: &mut [F],
    pt: &mut [F],
) -> f64 {
    let t = temperature.as_f64();
    let s_t = student.mapv(|x| F::of(x.as_f64() / t));
    let t_t = teacher.mapv(|x| F::of(x.as_f64() / t));
    let lse_s = softmax_row(s_t.view(), ps);
    let lse_t = softmax_row(t_t.view(), pt);
    let mut kl = 0.0;
    for j in 0..ps.len() {
        let p = pt[j].as_f64();
        if p > 0.0 {
            let log_pt = t_t[j].as_f64() - lse_t;
            let log_ps = s_t[j].as_f64() - lse_s;
            kl += p * (log_pt - log_ps);
        }
    }
    kl
}

fn sum_rows<F: Real>(g: &Array2<F>) -> Array2<F> {
    let mut acc = vec![0.0f64; g.ncols()];
    for row in g.rows() {
        for (a, &v) in acc.iter_mut().zip(row.iter()) {
            *a += v.as_f64();
        }
    }
    Array2::from_shape_vec((1, g.ncols()), acc.into_iter().map(F::of).collect()).expect("shape")
}

/// Leaf gradients indexed by [`Var`].
pub struct Gradients<F> {
    grads: Vec<Option<Array2<F>>>,
}

impl<F: Real> Gradients<F> {
    pub fn get(&self, v: Var) -> Option<&Array2<F>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Array2<F>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }

    pub fn count(&self) -> usize {
        self.grads.iter().filter(|g| g.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| StandardNormal.sample(rng))
    }

    #[test]
    fn square_at_three() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(array![[3.0]], true);
        let y = g.mul(x, x);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap()[[0, 0]], 6.0);
    }

    #[test]
    fn detached_and_non_scalar_losses() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(array![[3.0]]);
        let y = g.mul(x, x);
        assert!(matches!(g.backward(y), Err(Error::Graph(_))));
        let w = g.leaf(array![[1.0, 2.0]], true);
        assert!(matches!(g.backward(w), Err(Error::Graph(_))));
    }

    #[test]
    fn frozen_leaves_get_nothing() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(array![[1.0, 2.0]], true);
        let b = g.leaf(array![[3.0], [4.0]], false);
        let c = g.matmul(a, b);
        let grads = g.backward(c).unwrap();
        assert!(grads.get(b).is_none());
        assert_eq!(grads.get(a).unwrap(), &array![[3.0, 4.0]]);
        assert_eq!(grads.count(), 1);
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = Graph::<f64>::new();
        let q = g.constant(randn(&mut rng, 7, 8));
        let k = g.constant(randn(&mut rng, 7, 8));
        let v = g.constant(randn(&mut rng, 7, 8));
        let o = g.attention(q, k, v, 2, &[(0, 3), (3, 4)]);
        let probs = g.attention_probs(o).unwrap();
        assert_eq!(probs.len(), 4);
        for p in probs {
            for (i, row) in p.rows().into_iter().enumerate() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
                assert!(row.iter().skip(i + 1).all(|&x| x == 0.0));
            }
        }
    }

    /// Central-difference check of a scalar function of several leaves.
    fn check<B>(inputs: Vec<Array2<f64>>, build: B)
    where
        B: Fn(&mut Graph<f64>, &[Var]) -> Var,
    {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|a| g.leaf(a.clone(), true)).collect();
        let loss = build(&mut g, &vars);
        let grads = g.backward(loss).unwrap();
        let h = 1e-6;
        for (k, base) in inputs.iter().enumerate() {
            for idx in 0..base.len() {
                let eval = |delta: f64| {
                    let mut g = Graph::new();
                    let vars: Vec<Var> = inputs
                        .iter()
                        .enumerate()
                        .map(|(j, a)| {
                            let mut a = a.clone();
                            if j == k {
                                a.as_slice_mut().unwrap()[idx] += delta;
                            }
                            g.leaf(a, true)
                        })
                        .collect();
                    let l = build(&mut g, &vars);
                    g.scalar(l)
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grads.get(vars[k]).unwrap().as_slice().unwrap()[idx];
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                assert!(err < 1e-5, "input {k} index {idx}: fd {fd} analytic {an}");
            }
        }
    }

    fn weighted_sum(g: &mut Graph<f64>, x: Var, seed: u64) -> Var {
        let (r, c) = g.value(x).dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = g.constant(randn(&mut rng, c, 1));
        let y = g.matmul(x, w);
        let ones = g.constant(Array2::ones((1, r)));
        g.matmul(ones, y)
    }

    #[test]
    fn gradcheck_linear_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = randn(&mut rng, 3, 4);
        let b = randn(&mut rng, 4, 5);
        let c = randn(&mut rng, 1, 5);
        check(vec![a.clone(), b.clone(), c], |g, v| {
            let m = g.matmul(v[0], v[1]);
            let m = g.add_row(m, v[2]);
            let m2 = g.mul(m, m);
            let s = g.scale(m2, 0.3);
            weighted_sum(g, s, 9)
        });
        check(vec![a, randn(&mut rng, 5, 4)], |g, v| {
            let m = g.matmul_bt(v[0], v[1]);
            let m = g.add(m, m);
            weighted_sum(g, m, 3)
        });
    }

    #[test]
    fn gradcheck_norm_gelu_embed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        check(
            vec![randn(&mut rng, 6, 5), randn(&mut rng, 1, 5), randn(&mut rng, 1, 5)],
            |g, v| {
                let e = g.embed(v[0], &[1, 4, 1, 0]);
                let n = g.layer_norm(e, v[1], v[2]);
                let a = g.gelu(n);
                weighted_sum(g, a, 4)
            },
        );
    }

    #[test]
    fn gradcheck_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        check(
            vec![randn(&mut rng, 5, 4), randn(&mut rng, 5, 4), randn(&mut rng, 5, 4)],
            |g, v| {
                let o = g.attention(v[0], v[1], v[2], 2, &[(0, 2), (2, 3)]);
                weighted_sum(g, o, 5)
            },
        );
    }

    #[test]
    fn gradcheck_losses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let teacher = randn(&mut rng, 4, 6);
        check(vec![randn(&mut rng, 4, 6)], |g, v| g.cross_entropy_sum(v[0], &[1, 0, 5, 2], &[1.0, 0.0, 1.0, 2.0]));
        check(vec![randn(&mut rng, 4, 6)], move |g, v| {
            g.distill_sum(v[0], &teacher, &[1, 0, 5, 2], &[1.0, 1.0, 0.0, 1.0], 0.3, 2.5)
        });
    }

    #[test]
    fn dropout_masks_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Array2::ones((20, 20)), true);
        let y = g.dropout(x, 0.5, &mut rng);
        let kept = g.value(y).iter().filter(|&&v| v != 0.0).count();
        assert!(kept > 100 && kept < 300);
        assert!(g.value(y).iter().all(|&v| v == 0.0 || v == 2.0));
        let l = weighted_sum(&mut g, y, 1);
        let grads = g.backward(l).unwrap();
        let gx = grads.get(x).unwrap();
        Zip::from(gx).and(g.value(y)).for_each(|&d, &v| assert_eq!(d == 0.0, v == 0.0));
    }

    #[test]
    fn distill_with_alpha_one_matches_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let logits = randn(&mut rng, 5, 9).mapv(|x| x as f32);
        let teacher = randn(&mut rng, 5, 9).mapv(|x| x as f32);
        let targets = [0, 3, 8, 1, 1];
        let w = [1.0f32, 1.0, 0.0, 1.0, 1.0];
        let mut g1 = Graph::<f32>::new();
        let l1 = g1.leaf(logits.clone(), true);
        let c = g1.cross_entropy_sum(l1, &targets, &w);
        let mut g2 = Graph::<f32>::new();
        let l2 = g2.leaf(logits, true);
        let d = g2.distill_sum(l2, &teacher, &targets, &w, 1.0, 10.0);
        assert_eq!(g1.scalar(c).to_bits(), g2.scalar(d).to_bits());
        let ga = g1.backward(c).unwrap();
        let gb = g2.backward(d).unwrap();
        assert_eq!(ga.get(l1).unwrap(), gb.get(l2).unwrap());
    }
}
