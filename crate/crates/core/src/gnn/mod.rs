//! A small GraphSAGE: concatenating SAGE layers, a linear head, optional
//! mean/sum readout for graph classification, cross-entropy loss and Adam.

mod tape;
mod train;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use tape::{Aggregator, Gradients, Neighborhoods, Pooling, Tape, Var};
pub use train::{accuracy, fit_graph, fit_node, FitOutcome, GraphBatch};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeLabels};
use crate::numerics::{DenseMatrix, Rng};

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregator::Mean => "mean",
            Aggregator::Sum => "sum",
        })
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregator::Mean),
            "sum" => Ok(Aggregator::Sum),
            _ => Err(Error::InvalidArgument(format!(
                "unknown aggregator {s:?} (mean|sum)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Readout {
    /// Node-level task; no pooling.
    None,
    Mean,
    Sum,
}

impl Readout {
    fn pooling(self) -> Option<Pooling> {
        match self {
            Readout::None => None,
            Readout::Mean => Some(Pooling::Mean),
            Readout::Sum => Some(Pooling::Sum),
        }
    }
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Readout::None => "none",
            Readout::Mean => "mean",
            Readout::Sum => "sum",
        })
    }
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Readout::None),
            "mean" => Ok(Readout::Mean),
            "sum" => Ok(Readout::Sum),
            _ => Err(Error::InvalidArgument(format!(
                "unknown readout {s:?} (none|mean|sum)"
            ))),
        }
    }
}

/// A trainable matrix and its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
}

impl Tensor {
    pub fn new(value: DenseMatrix) -> Self {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| (2.0 * rng.uniform() - 1.0) * limit)
            .collect();
        Self::new(DenseMatrix::from_vec(rows, cols, data).expect("glorot shape"))
    }
}

/// `h'_v = ReLU(W^T [h_v ∥ agg_{u ∈ S(v)} h_u] + b)` with `W` of shape
/// `(2 d_in) x d_out`; the top half multiplies the node's own row.
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub aggregator: Aggregator,
}

impl SageLayer {
    pub fn new(d_in: usize, d_out: usize, aggregator: Aggregator, rng: &mut Rng) -> Self {
        Self {
            weight: Tensor::glorot(2 * d_in, d_out, rng),
            bias: Tensor::new(DenseMatrix::zeros(1, d_out)),
            aggregator,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.rows() / 2
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.cols()
    }

    /// Output before the ReLU.
    pub fn pre_activation(&self, h: &DenseMatrix, nbrs: &Neighborhoods) -> Result<DenseMatrix> {
        let mut tape = Tape::new();
        let z = self.record(&mut tape, h.clone(), Arc::new(nbrs.clone()))?;
        Ok(tape.value(z).clone())
    }

    pub fn forward(&self, h: &DenseMatrix, nbrs: &Neighborhoods) -> Result<DenseMatrix> {
        let mut z = self.pre_activation(h, nbrs)?;
        z.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
        Ok(z)
    }

    fn record(&self, tape: &mut Tape, h: DenseMatrix, nbrs: Arc<Neighborhoods>) -> Result<Var> {
        let h = tape.constant(h);
        let w = tape.parameter(self.weight.value.clone());
        let b = tape.parameter(self.bias.value.clone());
        let z = tape.sage_linear(h, w, nbrs, self.aggregator)?;
        tape.add_bias(z, b)
    }
}

/// Up to `s` distinct neighbors of `v`, uniformly without replacement.
/// `s = 0` or `deg(v) <= s` returns the whole neighbor list.
pub fn sample_neighbors(g: &Graph, v: usize, s: usize, rng: &mut Rng) -> Vec<usize> {
    let nbrs = g.adj(v);
    if s == 0 || nbrs.len() <= s {
        return nbrs.to_vec();
    }
    rand::seq::index::sample(rng, nbrs.len(), s)
        .into_iter()
        .map(|i| nbrs[i])
        .collect()
}

/// One SAGE layer (ReLU included) with neighborhoods sampled from `rng`.
pub fn sage_forward(
    layer: &SageLayer,
    h: &DenseMatrix,
    g: &Graph,
    sample_size: usize,
    rng: &mut Rng,
) -> Result<DenseMatrix> {
    if h.rows() != g.num_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} nodes",
            h.rows(),
            g.num_nodes()
        )));
    }
    layer.forward(h, &Neighborhoods::sampled(g, sample_size, rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub aggregator: Aggregator,
    pub readout: Readout,
    /// 0 means the full neighborhood.
    pub sample_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout: f64,
    /// Graphs per optimizer step in graph tasks.
    pub batch_size: usize,
}

impl ModelConfig {
    pub fn node_defaults() -> Self {
        Self {
            num_layers: 2,
            hidden_dim: 64,
            aggregator: Aggregator::Mean,
            readout: Readout::None,
            sample_size: 0,
            learning_rate: 0.01,
            epochs: 200,
            dropout: 0.5,
            batch_size: 32,
        }
    }

    pub fn graph_defaults() -> Self {
        Self {
            num_layers: 3,
            readout: Readout::Sum,
            epochs: 100,
            dropout: 0.0,
            ..Self::node_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.num_layers == 0 {
            return bad("num_layers must be at least 1");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be a positive finite number");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// How a forward pass treats stochastic parts.
pub enum Pass<'a> {
    /// Full neighborhoods, no dropout.
    Eval,
    /// Sampled neighborhoods (if configured) and dropout, drawn from the Rng.
    Train(&'a mut Rng),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SageModel {
    config: ModelConfig,
    in_dim: usize,
    num_classes: usize,
    pub layers: Vec<SageLayer>,
    pub head_weight: Tensor,
    pub head_bias: Tensor,
}

struct Recorded {
    logits: Var,
    pooled: Option<Var>,
    params: Vec<Var>,
}

impl SageModel {
    pub fn new(
        in_dim: usize,
        num_classes: usize,
        config: ModelConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        if in_dim == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument(format!(
                "model needs positive input width and class count (got {in_dim}, {num_classes})"
            )));
        }
        let mut layers = Vec::with_capacity(config.num_layers);
        let mut d = in_dim;
        for _ in 0..config.num_layers {
            layers.push(SageLayer::new(d, config.hidden_dim, config.aggregator, rng));
            d = config.hidden_dim;
        }
        Ok(Self {
            head_weight: Tensor::glorot(d, num_classes, rng),
            head_bias: Tensor::new(DenseMatrix::zeros(1, num_classes)),
            layers,
            in_dim,
            num_classes,
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Layer weights and biases in order, then the head.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.head_weight);
        out.push(&self.head_bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|t| t.value.as_slice().len()).sum()
    }

    fn check_input(&self, g: &Graph, x: &DenseMatrix) -> Result<()> {
        if x.rows() != g.num_nodes() || x.cols() != self.in_dim {
            return Err(Error::ShapeMismatch(format!(
                "features {:?} for a graph of {} nodes and a model of input width {}",
                x.shape(),
                g.num_nodes(),
                self.in_dim
            )));
        }
        Ok(())
    }

    fn record(
        &self,
        tape: &mut Tape,
        g: &Graph,
        x: &DenseMatrix,
        segments: Option<Vec<usize>>,
        pass: &mut Pass<'_>,
    ) -> Result<Recorded> {
        self.check_input(g, x)?;
        let mut params = Vec::new();
        let mut h = tape.constant(x.clone());
        for layer in &self.layers {
            let nbrs = match pass {
                Pass::Eval => Neighborhoods::full(g),
                Pass::Train(rng) => Neighborhoods::sampled(g, self.config.sample_size, rng),
            };
            let w = tape.parameter(layer.weight.value.clone());
            let b = tape.parameter(layer.bias.value.clone());
            params.extend([w, b]);
            let z = tape.sage_linear(h, w, Arc::new(nbrs), layer.aggregator)?;
            let z = tape.add_bias(z, b)?;
            h = tape.relu(z);
            if let Pass::Train(rng) = pass {
                h = tape.dropout(h, self.config.dropout, rng);
            }
        }
        let pooled = match segments {
            Some(seg) => {
                let how = self.config.readout.pooling().ok_or_else(|| {
                    Error::InvalidArgument("graph forward needs a mean or sum readout".into())
                })?;
                h = tape.pool(h, seg, how)?;
                Some(h)
            }
            None => None,
        };
        let w = tape.parameter(self.head_weight.value.clone());
        let b = tape.parameter(self.head_bias.value.clone());
        params.extend([w, b]);
        let z = tape.linear(h, w)?;
        let logits = tape.add_bias(z, b)?;
        Ok(Recorded {
            logits,
            pooled,
            params,
        })
    }

    /// Logits `N x C`.
    pub fn forward_node(
        &self,
        g: &Graph,
        x: &DenseMatrix,
        mut pass: Pass<'_>,
    ) -> Result<DenseMatrix> {
        let mut tape = Tape::new();
        let r = self.record(&mut tape, g, x, None, &mut pass)?;
        Ok(tape.value(r.logits).clone())
    }

    /// Logits of a single graph.
    pub fn forward_graph(&self, g: &Graph, x: &DenseMatrix, pass: Pass<'_>) -> Result<Vec<f64>> {
        let batch = GraphBatch::new(&[g], &[x])?;
        Ok(self.forward_batch(&batch, pass)?.row(0).to_vec())
    }

    /// One logit row per graph in the batch.
    pub fn forward_batch(&self, batch: &GraphBatch, mut pass: Pass<'_>) -> Result<DenseMatrix> {
        let mut tape = Tape::new();
        let r = self.record(
            &mut tape,
            &batch.graph,
            &batch.features,
            Some(batch.segments.clone()),
            &mut pass,
        )?;
        Ok(tape.value(r.logits).clone())
    }

    /// Pooled node embeddings of one graph, before the head.
    pub fn pooled_embedding(&self, g: &Graph, x: &DenseMatrix) -> Result<Vec<f64>> {
        let batch = GraphBatch::new(&[g], &[x])?;
        let mut tape = Tape::new();
        let r = self.record(
            &mut tape,
            &batch.graph,
            &batch.features,
            Some(batch.segments),
            &mut Pass::Eval,
        )?;
        Ok(tape.value(r.pooled.expect("pooled")).row(0).to_vec())
    }

    /// Cross-entropy over `mask`; parameter gradients are overwritten.
    pub fn node_loss_backward(
        &mut self,
        g: &Graph,
        x: &DenseMatrix,
        labels: &NodeLabels,
        mask: &[usize],
        mut pass: Pass<'_>,
    ) -> Result<f64> {
        let targets = node_targets(labels, mask)?;
        let mut tape = Tape::new();
        let r = self.record(&mut tape, g, x, None, &mut pass)?;
        self.finish_backward(tape, r, targets)
    }

    /// Cross-entropy over the graphs of `batch` with labels `labels`.
    pub fn graph_loss_backward(
        &mut self,
        batch: &GraphBatch,
        labels: &[usize],
        mut pass: Pass<'_>,
    ) -> Result<f64> {
        if labels.len() != batch.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} graphs",
                labels.len(),
                batch.len()
            )));
        }
        let targets = labels.iter().copied().enumerate().collect();
        let mut tape = Tape::new();
        let r = self.record(
            &mut tape,
            &batch.graph,
            &batch.features,
            Some(batch.segments.clone()),
            &mut pass,
        )?;
        self.finish_backward(tape, r, targets)
    }

    fn finish_backward(
        &mut self,
        mut tape: Tape,
        r: Recorded,
        targets: Vec<(usize, usize)>,
    ) -> Result<f64> {
        let loss = tape.cross_entropy(r.logits, targets)?;
        let value = tape.value(loss).get(0, 0);
        let mut grads = tape.backward(loss)?;
        for (t, v) in self.params_mut().into_iter().zip(&r.params) {
            t.grad = grads
                .take(*v)
                .unwrap_or_else(|| DenseMatrix::zeros(t.value.rows(), t.value.cols()));
        }
        Ok(value)
    }
}

fn node_targets(labels: &NodeLabels, mask: &[usize]) -> Result<Vec<(usize, usize)>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    mask.iter()
        .map(|&v| match labels.as_slice().get(v) {
            Some(Some(c)) => Ok((v, *c)),
            Some(None) => Err(Error::InvalidArgument(format!(
                "node {v} in mask has no label"
            ))),
            None => Err(Error::NodeOutOfRange {
                node: v,
                num_nodes: labels.len(),
            }),
        })
        .collect()
}

pub fn model_forward_node(
    model: &SageModel,
    g: &Graph,
    x: &DenseMatrix,
    pass: Pass<'_>,
) -> Result<DenseMatrix> {
    model.forward_node(g, x, pass)
}

pub fn model_forward_graph(
    model: &SageModel,
    g: &Graph,
    x: &DenseMatrix,
    pass: Pass<'_>,
) -> Result<Vec<f64>> {
    model.forward_graph(g, x, pass)
}

/// Mean over `mask` of `-log softmax(logits[v])[label(v)]`.
pub fn cross_entropy(logits: &DenseMatrix, labels: &NodeLabels, mask: &[usize]) -> Result<f64> {
    let targets = node_targets(labels, mask)?;
    let mut total = 0.0;
    for (v, c) in &targets {
        if *v >= logits.rows() || *c >= logits.cols() {
            return Err(Error::ShapeMismatch(format!(
                "target ({v}, {c}) outside logits {:?}",
                logits.shape()
            )));
        }
        total -= tape::log_softmax_at(logits.row(*v), *c);
    }
    Ok(total / targets.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        let zeros = |t: &&Tensor| DenseMatrix::zeros(t.value.rows(), t.value.cols());
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
        }
    }

    pub fn for_model(model: &SageModel) -> Self {
        Self::new(&model.params())
    }
}

/// Bias-corrected Adam update in place.
pub fn adam_step(params: &mut [&mut Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != state.first.len()
        || params
            .iter()
            .zip(&state.first)
            .any(|(p, m)| p.shape() != m.shape() || p.grad.shape() != m.shape())
    {
        return Err(Error::ShapeMismatch(
            "Adam moments do not match parameters".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for ((p, m), v) in params
        .iter_mut()
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        let grads = p.grad.as_slice().to_vec();
        for (((w, g), m), v) in p
            .value
            .as_mut_slice()
            .iter_mut()
            .zip(&grads)
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
