//! Reverse-mode differentiation over [`Tensor2`] values.
//!
//! A [`GradTape`] records every primitive application in evaluation order.
//! Because each node only references earlier nodes, walking the tape
//! backwards is a reverse topological traversal; gradients reaching a node
//! through several consumers are summed.

use std::ops::Range;

use super::entropy::{clamped_ln, LOG_EPS};
use super::Tensor2;
use crate::{Error, Result};

/// Handle to a value recorded on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<'a> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    RowScale(Var, Var),
    /// `out_v = self_weight * x_v + sum_{u in N(v)} x_u`
    NeighborAggregate {
        x: Var,
        self_weight: f64,
        neighbors: &'a [Vec<usize>],
    },
    SegmentSum(Var, Vec<Range<usize>>),
    SegmentMean(Var, Vec<Range<usize>>),
    Softmax(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Tensor2,
    },
    KlDivergence {
        target: Tensor2,
        q: Var,
    },
    Sum(Var),
    WeightedSum(Var, Tensor2),
    MeanBinaryEntropy(Var),
}

struct Node<'a> {
    value: Tensor2,
    op: Op<'a>,
    needs_grad: bool,
}

/// Recorded computation with saved activations.
pub struct GradTape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of a scalar output with respect to every recorded value that
/// depends on a differentiable leaf.
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `var`; zeros when the output does not depend on it.
    pub fn get(&self, var: Var) -> Tensor2 {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Tensor2::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor2 {
        match self.grads[var.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[var.0];
                Tensor2::zeros(r, c)
            }
        }
    }
}

impl Default for GradTape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> GradTape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor2 {
        &self.nodes[var.0].value
    }

    /// Differentiable input.
    pub fn param(&mut self, value: Tensor2) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input treated as a constant.
    pub fn constant(&mut self, value: Tensor2) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor2, op: Op<'a>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let needs = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), needs))
    }

    /// Adds the `1 x cols` row `bias` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(bias);
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::Shape {
                op: "add_bias",
                left: xv.shape(),
                right: bv.shape(),
            });
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for (o, b) in value.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let needs = self.needs(&[x, bias]);
        Ok(self.push(value, Op::AddBias(x, bias), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let needs = self.needs(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x).scale(factor);
        let needs = self.needs(&[x]);
        self.push(value, Op::Scale(x, factor), needs)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        let needs = self.needs(&[x]);
        self.push(value, Op::Relu(x), needs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        let needs = self.needs(&[x]);
        self.push(value, Op::Sigmoid(x), needs)
    }

    /// Multiplies row `i` of `x` by `s[i]`, where `s` is an `n x 1` column.
    pub fn row_scale(&mut self, x: Var, s: Var) -> Result<Var> {
        let xv = self.value(x);
        let sv = self.value(s);
        if sv.cols() != 1 || sv.rows() != xv.rows() {
            return Err(Error::Shape {
                op: "row_scale",
                left: xv.shape(),
                right: sv.shape(),
            });
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            let f = sv.get(r, 0);
            value.row_mut(r).iter_mut().for_each(|v| *v *= f);
        }
        let needs = self.needs(&[x, s]);
        Ok(self.push(value, Op::RowScale(x, s), needs))
    }

    /// GIN aggregation over neighbor lists.
    pub fn neighbor_aggregate(
        &mut self,
        x: Var,
        self_weight: f64,
        neighbors: &'a [Vec<usize>],
    ) -> Result<Var> {
        let xv = self.value(x);
        if neighbors.len() != xv.rows() {
            return Err(Error::Shape {
                op: "neighbor_aggregate",
                left: xv.shape(),
                right: (neighbors.len(), 0),
            });
        }
        let mut value = xv.scale(self_weight);
        for (v, nbrs) in neighbors.iter().enumerate() {
            for &u in nbrs {
                if u >= xv.rows() {
                    return Err(Error::NodeIndex {
                        index: u,
                        num_nodes: xv.rows(),
                    });
                }
                let cols = xv.cols();
                for c in 0..cols {
                    let add = xv.get(u, c);
                    value.data_mut()[v * cols + c] += add;
                }
            }
        }
        let needs = self.needs(&[x]);
        Ok(self.push(
            value,
            Op::NeighborAggregate {
                x,
                self_weight,
                neighbors,
            },
            needs,
        ))
    }

    /// Sums rows of `x` within each range; one output row per range.
    pub fn segment_sum(&mut self, x: Var, ranges: &[Range<usize>]) -> Result<Var> {
        let value = self.segment_reduce(x, ranges, false)?;
        let needs = self.needs(&[x]);
        Ok(self.push(value, Op::SegmentSum(x, ranges.to_vec()), needs))
    }

    /// Averages rows of `x` within each (non-empty) range.
    pub fn segment_mean(&mut self, x: Var, ranges: &[Range<usize>]) -> Result<Var> {
        let value = self.segment_reduce(x, ranges, true)?;
        let needs = self.needs(&[x]);
        Ok(self.push(value, Op::SegmentMean(x, ranges.to_vec()), needs))
    }

    fn segment_reduce(&self, x: Var, ranges: &[Range<usize>], mean: bool) -> Result<Tensor2> {
        let xv = self.value(x);
        let mut out = Tensor2::zeros(ranges.len(), xv.cols());
        for (g, range) in ranges.iter().enumerate() {
            if range.end > xv.rows() || range.start > range.end || (mean && range.is_empty()) {
                return Err(Error::Shape {
                    op: "segment_reduce",
                    left: xv.shape(),
                    right: (range.start, range.end),
                });
            }
            let scale = if mean { 1.0 / range.len() as f64 } else { 1.0 };
            let out_row = out.row_mut(g);
            for r in range.clone() {
                for (o, v) in out_row.iter_mut().zip(xv.row(r)) {
                    *o += v;
                }
            }
            out_row.iter_mut().for_each(|o| *o *= scale);
        }
        Ok(out)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut value = xv.clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        let needs = self.needs(&[x]);
        self.push(value, Op::Softmax(x), needs)
    }

    /// Mean over rows of `-ln softmax(logits_r)[target_r]`; a `1 x 1` output.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if targets.len() != lv.rows() || lv.rows() == 0 {
            return Err(Error::Shape {
                op: "softmax_cross_entropy",
                left: lv.shape(),
                right: (targets.len(), 1),
            });
        }
        let mut probs = lv.clone();
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= lv.cols() {
                return Err(Error::ClassCount {
                    expected: lv.cols(),
                    found: t + 1,
                });
            }
            total += log_sum_exp(lv.row(r)) - lv.get(r, t);
            softmax_in_place(probs.row_mut(r));
        }
        let value = Tensor2::scalar(total / lv.rows() as f64);
        let needs = self.needs(&[logits]);
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            needs,
        ))
    }

    /// Mean over rows of `KL(target_r || q_r)`, with `target` fixed.
    pub fn kl_divergence(&mut self, target: &Tensor2, q: Var) -> Result<Var> {
        let qv = self.value(q);
        target.check_same(qv, "kl_divergence")?;
        if qv.rows() == 0 {
            return Err(Error::EmptyInput("kl_divergence"));
        }
        let mut total = 0.0;
        for (p, qi) in target.data().iter().zip(qv.data()) {
            if *p > 0.0 {
                total += p * (clamped_ln(*p) - clamped_ln(*qi));
            }
        }
        let value = Tensor2::scalar(total / qv.rows() as f64);
        let needs = self.needs(&[q]);
        Ok(self.push(
            value,
            Op::KlDivergence {
                target: target.clone(),
                q,
            },
            needs,
        ))
    }

    /// Sum of all entries; a `1 x 1` output.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor2::scalar(self.value(x).sum());
        let needs = self.needs(&[x]);
        self.push(value, Op::Sum(x), needs)
    }

    /// `sum(x * weights)` for a fixed weight tensor of the same shape.
    pub fn weighted_sum(&mut self, x: Var, weights: &Tensor2) -> Result<Var> {
        let xv = self.value(x);
        weights.check_same(xv, "weighted_sum")?;
        let value = Tensor2::scalar(
            xv.data()
                .iter()
                .zip(weights.data())
                .map(|(a, b)| a * b)
                .sum(),
        );
        let needs = self.needs(&[x]);
        Ok(self.push(value, Op::WeightedSum(x, weights.clone()), needs))
    }

    /// Mean element-wise binary entropy of values in `[0, 1]`.
    pub fn mean_binary_entropy(&mut self, p: Var) -> Result<Var> {
        let pv = self.value(p);
        if pv.is_empty() {
            return Err(Error::EmptyInput("mean_binary_entropy"));
        }
        let value = Tensor2::scalar(super::mean_binary_entropy(pv.data()));
        let needs = self.needs(&[p]);
        Ok(self.push(value, Op::MeanBinaryEntropy(p), needs))
    }

    /// Reverse pass from the scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_shape = self.value(output).shape();
        if out_shape != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                left: out_shape,
                right: (1, 1),
            });
        }
        let mut grads: Vec<Option<Tensor2>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor2::scalar(1.0));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor2>], var: Var, delta: Tensor2) -> Result<()> {
        if !self.nodes[var.0].needs_grad {
            return Ok(());
        }
        match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => {
                *slot = Some(delta);
                Ok(())
            }
        }
    }

    fn propagate(&self, node: &Node<'a>, g: &Tensor2, grads: &mut [Option<Tensor2>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].needs_grad {
                    let da = g.matmul_t(self.value(*b))?;
                    self.accumulate(grads, *a, da)?;
                }
                if self.nodes[b.0].needs_grad {
                    let db = self.value(*a).t_matmul(g)?;
                    self.accumulate(grads, *b, db)?;
                }
            }
            Op::AddBias(x, bias) => {
                self.accumulate(grads, *x, g.clone())?;
                if self.nodes[bias.0].needs_grad {
                    let mut db = Tensor2::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, v) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, *bias, db)?;
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone())?;
                self.accumulate(grads, *b, g.clone())?;
            }
            Op::Scale(x, factor) => {
                self.accumulate(grads, *x, g.scale(*factor))?;
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (d, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                    if *v <= 0.0 {
                        *d = 0.0;
                    }
                }
                self.accumulate(grads, *x, dx)?;
            }
            Op::Sigmoid(x) => {
                let mut dx = g.clone();
                for (d, s) in dx.data_mut().iter_mut().zip(node.value.data()) {
                    *d *= s * (1.0 - s);
                }
                self.accumulate(grads, *x, dx)?;
            }
            Op::RowScale(x, s) => {
                let xv = self.value(*x);
                let sv = self.value(*s);
                if self.nodes[x.0].needs_grad {
                    let mut dx = g.clone();
                    for r in 0..dx.rows() {
                        let f = sv.get(r, 0);
                        dx.row_mut(r).iter_mut().for_each(|v| *v *= f);
                    }
                    self.accumulate(grads, *x, dx)?;
                }
                if self.nodes[s.0].needs_grad {
                    let ds: Vec<f64> = (0..xv.rows())
                        .map(|r| xv.row(r).iter().zip(g.row(r)).map(|(a, b)| a * b).sum())
                        .collect();
                    self.accumulate(grads, *s, Tensor2::column(ds))?;
                }
            }
            Op::NeighborAggregate {
                x,
                self_weight,
                neighbors,
            } => {
                let mut dx = g.scale(*self_weight);
                let cols = g.cols();
                for (v, nbrs) in neighbors.iter().enumerate() {
                    for &u in nbrs {
                        for c in 0..cols {
                            dx.data_mut()[u * cols + c] += g.get(v, c);
                        }
                    }
                }
                self.accumulate(grads, *x, dx)?;
            }
            Op::SegmentSum(x, ranges) | Op::SegmentMean(x, ranges) => {
                let mean = matches!(node.op, Op::SegmentMean(..));
                let (rows, cols) = self.value(*x).shape();
                let mut dx = Tensor2::zeros(rows, cols);
                for (seg, range) in ranges.iter().enumerate() {
                    let scale = if mean { 1.0 / range.len() as f64 } else { 1.0 };
                    for r in range.clone() {
                        for (d, v) in dx.row_mut(r).iter_mut().zip(g.row(seg)) {
                            *d += v * scale;
                        }
                    }
                }
                self.accumulate(grads, *x, dx)?;
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let mut dx = g.clone();
                for r in 0..y.rows() {
                    let dot: f64 = y.row(r).iter().zip(g.row(r)).map(|(a, b)| a * b).sum();
                    for (d, yi) in dx.row_mut(r).iter_mut().zip(y.row(r)) {
                        *d = yi * (*d - dot);
                    }
                }
                self.accumulate(grads, *x, dx)?;
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let upstream = g.item() / probs.rows() as f64;
                let mut dx = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    let v = dx.get(r, t);
                    dx.set(r, t, v - 1.0);
                }
                self.accumulate(grads, *logits, dx.scale(upstream))?;
            }
            Op::KlDivergence { target, q } => {
                let qv = self.value(*q);
                let upstream = g.item() / qv.rows() as f64;
                let mut dq = Tensor2::zeros(qv.rows(), qv.cols());
                for ((d, p), qi) in dq.data_mut().iter_mut().zip(target.data()).zip(qv.data()) {
                    if *p > 0.0 && *qi > LOG_EPS {
                        *d = -upstream * p / qi;
                    }
                }
                self.accumulate(grads, *q, dq)?;
            }
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                self.accumulate(grads, *x, Tensor2::filled(r, c, g.item()))?;
            }
            Op::WeightedSum(x, weights) => {
                self.accumulate(grads, *x, weights.scale(g.item()))?;
            }
            Op::MeanBinaryEntropy(p) => {
                let pv = self.value(*p);
                let upstream = g.item() / pv.len() as f64;
                let dp = pv.map(|v| upstream * (clamped_ln(1.0 - v) - clamped_ln(v)));
                self.accumulate(grads, *p, dp)?;
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

/// Softmax of a single logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}
