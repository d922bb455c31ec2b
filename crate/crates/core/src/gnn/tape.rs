//! Reverse-mode differentiation over dense matrices.
//!
//! Operations are appended to a [`Tape`] as they run; [`Tape::backward`]
//! walks the record in reverse and accumulates gradients for every node
//! that depends on a trainable leaf.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{DenseMatrix, Rng};

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregator {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pooling {
    Mean,
    Sum,
}

/// Per-node neighbor lists used by one aggregation, possibly sampled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    ids: Vec<usize>,
}

impl Neighborhoods {
    pub fn full(g: &Graph) -> Self {
        Self {
            offsets: g.csr_offsets().to_vec(),
            ids: g.csr_neighbors().to_vec(),
        }
    }

    /// At most `sample_size` neighbors per node (0 keeps all).
    pub fn sampled(g: &Graph, sample_size: usize, rng: &mut Rng) -> Self {
        if sample_size == 0 {
            return Self::full(g);
        }
        let mut offsets = vec![0];
        let mut ids = Vec::with_capacity(g.num_nodes() * sample_size);
        for v in 0..g.num_nodes() {
            ids.extend(super::sample_neighbors(g, v, sample_size, rng));
            offsets.push(ids.len());
        }
        Self { offsets, ids }
    }

    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut offsets = vec![0];
        let mut ids = Vec::new();
        for l in lists {
            ids.extend_from_slice(l);
            offsets.push(ids.len());
        }
        Self { offsets, ids }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn of(&self, v: usize) -> &[usize] {
        &self.ids[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Row `v` of the result is the sum or mean of `m`'s rows over `S(v)`;
    /// empty neighborhoods give zero rows.
    pub fn aggregate(&self, m: &DenseMatrix, how: Aggregator) -> DenseMatrix {
        let cols = m.cols();
        let mut out = DenseMatrix::zeros(self.num_nodes(), cols);
        if cols == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(v, row)| {
                let nbrs = self.of(v);
                for &u in nbrs {
                    for (o, &x) in row.iter_mut().zip(m.row(u)) {
                        *o += x;
                    }
                }
                if how == Aggregator::Mean && !nbrs.is_empty() {
                    let inv = 1.0 / nbrs.len() as f64;
                    row.iter_mut().for_each(|o| *o *= inv);
                }
            });
        out
    }

    /// Adjoint of [`Neighborhoods::aggregate`].
    pub fn aggregate_adjoint(
        &self,
        grad: &DenseMatrix,
        how: Aggregator,
        input_rows: usize,
    ) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(input_rows, grad.cols());
        for v in 0..self.num_nodes() {
            let nbrs = self.of(v);
            if nbrs.is_empty() {
                continue;
            }
            let scale = match how {
                Aggregator::Mean => 1.0 / nbrs.len() as f64,
                Aggregator::Sum => 1.0,
            };
            let g = grad.row(v);
            for &u in nbrs {
                for (o, &x) in out.row_mut(u).iter_mut().zip(g) {
                    *o += scale * x;
                }
            }
        }
        out
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `H·W_self + Agg(H·W_neigh)`, where `W = [W_self; W_neigh]`. Equal to
    /// `[H ∥ Agg(H)]·W` because aggregation is linear in the rows.
    SageLinear {
        input: Var,
        weight: Var,
        nbrs: Arc<Neighborhoods>,
        how: Aggregator,
    },
    Linear {
        input: Var,
        weight: Var,
    },
    AddBias {
        input: Var,
        bias: Var,
    },
    Relu {
        input: Var,
    },
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    Pool {
        input: Var,
        segments: Vec<usize>,
        how: Pooling,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<(usize, usize)>,
        probs: DenseMatrix,
    },
}

#[derive(Debug)]
struct Node {
    value: DenseMatrix,
    requires_grad: bool,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&DenseMatrix> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<DenseMatrix> {
        self.grads[v.0].take()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: DenseMatrix, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(value, false, Op::Leaf)
    }

    /// Trainable leaf.
    pub fn parameter(&mut self, value: DenseMatrix) -> Var {
        self.push(value, true, Op::Leaf)
    }

    pub fn sage_linear(
        &mut self,
        input: Var,
        weight: Var,
        nbrs: Arc<Neighborhoods>,
        how: Aggregator,
    ) -> Result<Var> {
        let h = self.value(input);
        let w = self.value(weight);
        let d_in = h.cols();
        if w.rows() != 2 * d_in {
            return Err(Error::ShapeMismatch(format!(
                "SAGE weight has {} rows for input width {d_in} (expected {})",
                w.rows(),
                2 * d_in
            )));
        }
        if nbrs.num_nodes() != h.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows for {} nodes",
                h.rows(),
                nbrs.num_nodes()
            )));
        }
        let (w_self, w_neigh) = split_rows(w, d_in);
        let mut out = h.matmul(&w_self)?;
        let msg = h.matmul(&w_neigh)?;
        out.add_assign(&nbrs.aggregate(&msg, how));
        let rg = self.needs(input) || self.needs(weight);
        Ok(self.push(
            out,
            rg,
            Op::SageLinear {
                input,
                weight,
                nbrs,
                how,
            },
        ))
    }

    pub fn linear(&mut self, input: Var, weight: Var) -> Result<Var> {
        let out = self.value(input).matmul(self.value(weight))?;
        let rg = self.needs(input) || self.needs(weight);
        Ok(self.push(out, rg, Op::Linear { input, weight }))
    }

    pub fn add_bias(&mut self, input: Var, bias: Var) -> Result<Var> {
        let b = self.value(bias);
        let mut out = self.value(input).clone();
        if b.rows() != 1 || b.cols() != out.cols() {
            return Err(Error::ShapeMismatch(format!(
                "bias {:?} for values {:?}",
                b.shape(),
                out.shape()
            )));
        }
        let b = b.row(0).to_vec();
        for i in 0..out.rows() {
            for (o, x) in out.row_mut(i).iter_mut().zip(&b) {
                *o += x;
            }
        }
        let rg = self.needs(input) || self.needs(bias);
        Ok(self.push(out, rg, Op::AddBias { input, bias }))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let mut out = self.value(input).clone();
        out.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
        let rg = self.needs(input);
        self.push(out, rg, Op::Relu { input })
    }

    /// Inverted dropout: kept entries are scaled by `1 / (1 - rate)`.
    pub fn dropout(&mut self, input: Var, rate: f64, rng: &mut Rng) -> Var {
        if rate <= 0.0 {
            return input;
        }
        let keep = 1.0 / (1.0 - rate);
        let mut out = self.value(input).clone();
        let mask: Vec<f64> = (0..out.as_slice().len())
            .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
            .collect();
        for (x, m) in out.as_mut_slice().iter_mut().zip(&mask) {
            *x *= m;
        }
        let rg = self.needs(input);
        self.push(out, rg, Op::Dropout { input, mask })
    }

    /// Pools rows `segments[s]..segments[s+1]` into output row `s`.
    pub fn pool(&mut self, input: Var, segments: Vec<usize>, how: Pooling) -> Result<Var> {
        let h = self.value(input);
        if segments.last().copied() != Some(h.rows()) || segments.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::ShapeMismatch(format!(
                "pool segments {segments:?} do not cover {} rows",
                h.rows()
            )));
        }
        let mut out = DenseMatrix::zeros(segments.len() - 1, h.cols());
        for s in 0..segments.len() - 1 {
            let (lo, hi) = (segments[s], segments[s + 1]);
            let row = out.row_mut(s);
            for r in lo..hi {
                for (o, &x) in row.iter_mut().zip(h.row(r)) {
                    *o += x;
                }
            }
            if how == Pooling::Mean && hi > lo {
                let inv = 1.0 / (hi - lo) as f64;
                row.iter_mut().for_each(|o| *o *= inv);
            }
        }
        let rg = self.needs(input);
        Ok(self.push(
            out,
            rg,
            Op::Pool {
                input,
                segments,
                how,
            },
        ))
    }

    /// Mean of `-log softmax(logits[row])[class]` over `(row, class)` targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<(usize, usize)>) -> Result<Var> {
        if targets.is_empty() {
            return Err(Error::EmptyMask);
        }
        let z = self.value(logits);
        let probs = softmax_rows(z);
        let mut total = 0.0;
        for &(r, c) in &targets {
            if r >= z.rows() || c >= z.cols() {
                return Err(Error::ShapeMismatch(format!(
                    "target ({r}, {c}) outside logits {:?}",
                    z.shape()
                )));
            }
            total -= log_softmax_at(z.row(r), c);
        }
        let loss = DenseMatrix::filled(1, 1, total / targets.len() as f64);
        let rg = self.needs(logits);
        Ok(self.push(
            loss,
            rg,
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            },
        ))
    }

    /// Gradients of the scalar `output` with respect to every recorded value
    /// that requires one. `d output / d output = 1`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).shape() != (1, 1) {
            return Err(Error::ShapeMismatch(format!(
                "backward from a non-scalar {:?}",
                self.value(output).shape()
            )));
        }
        let mut grads: Vec<Option<DenseMatrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(DenseMatrix::filled(1, 1, 1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::SageLinear {
                    input,
                    weight,
                    nbrs,
                    how,
                } => {
                    let h = self.value(*input);
                    let w = self.value(*weight);
                    let d_in = h.cols();
                    let d_msg = nbrs.aggregate_adjoint(&g, *how, h.rows());
                    if self.needs(*weight) {
                        let dw_self = h.t_matmul(&g)?;
                        let dw_neigh = h.t_matmul(&d_msg)?;
                        accumulate(
                            *weight,
                            DenseMatrix::vstack([&dw_self, &dw_neigh])?,
                            &mut grads,
                        );
                    }
                    if self.needs(*input) {
                        let (w_self, w_neigh) = split_rows(w, d_in);
                        let mut dh = g.matmul_t(&w_self)?;
                        dh.add_assign(&d_msg.matmul_t(&w_neigh)?);
                        accumulate(*input, dh, &mut grads);
                    }
                }
                Op::Linear { input, weight } => {
                    if self.needs(*weight) {
                        accumulate(*weight, self.value(*input).t_matmul(&g)?, &mut grads);
                    }
                    if self.needs(*input) {
                        accumulate(*input, g.matmul_t(self.value(*weight))?, &mut grads);
                    }
                }
                Op::AddBias { input, bias } => {
                    if self.needs(*bias) {
                        let mut db = DenseMatrix::zeros(1, g.cols());
                        for i in 0..g.rows() {
                            for (o, &x) in db.row_mut(0).iter_mut().zip(g.row(i)) {
                                *o += x;
                            }
                        }
                        accumulate(*bias, db, &mut grads);
                    }
                    if self.needs(*input) {
                        accumulate(*input, g, &mut grads);
                    }
                }
                Op::Relu { input } => {
                    let mut d = g;
                    for (x, &y) in d.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                        if y <= 0.0 {
                            *x = 0.0;
                        }
                    }
                    accumulate(*input, d, &mut grads);
                }
                Op::Dropout { input, mask } => {
                    let mut d = g;
                    for (x, m) in d.as_mut_slice().iter_mut().zip(mask) {
                        *x *= m;
                    }
                    accumulate(*input, d, &mut grads);
                }
                Op::Pool {
                    input,
                    segments,
                    how,
                } => {
                    let rows = self.value(*input).rows();
                    let mut d = DenseMatrix::zeros(rows, g.cols());
                    for s in 0..segments.len() - 1 {
                        let (lo, hi) = (segments[s], segments[s + 1]);
                        let scale = match how {
                            Pooling::Mean if hi > lo => 1.0 / (hi - lo) as f64,
                            _ => 1.0,
                        };
                        for r in lo..hi {
                            for (o, &x) in d.row_mut(r).iter_mut().zip(g.row(s)) {
                                *o = scale * x;
                            }
                        }
                    }
                    accumulate(*input, d, &mut grads);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let upstream = g.get(0, 0);
                    let scale = upstream / targets.len() as f64;
                    let mut d = DenseMatrix::zeros(probs.rows(), probs.cols());
                    for &(r, c) in targets {
                        for (o, &p) in d.row_mut(r).iter_mut().zip(probs.row(r)) {
                            *o += scale * p;
                        }
                        let cur = d.get(r, c);
                        d.set(r, c, cur - scale);
                    }
                    accumulate(*logits, d, &mut grads);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(target: Var, delta: DenseMatrix, grads: &mut [Option<DenseMatrix>]) {
    match &mut grads[target.0] {
        Some(acc) => acc.add_assign(&delta),
        slot => *slot = Some(delta),
    }
}

fn split_rows(w: &DenseMatrix, top: usize) -> (DenseMatrix, DenseMatrix) {
    let cols = w.cols();
    let data = w.as_slice();
    let a = DenseMatrix::from_vec(top, cols, data[..top * cols].to_vec()).expect("split shape");
    let b = DenseMatrix::from_vec(w.rows() - top, cols, data[top * cols..].to_vec())
        .expect("split shape");
    (a, b)
}

pub(crate) fn softmax_rows(z: &DenseMatrix) -> DenseMatrix {
    let mut p = z.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        row.iter_mut().for_each(|x| *x /= total);
    }
    p
}

pub(crate) fn log_softmax_at(row: &[f64], class: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    row[class] - lse
}
