use crate::error::{Error, Result};
use crate::graph::{Graph, NodeLabels};
use crate::numerics::{DenseMatrix, Rng};

use super::{adam_step, AdamState, Pass, SageModel};

/// Several graphs merged into one disjoint union for a single forward pass.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub graph: Graph,
    pub features: DenseMatrix,
    /// Node offsets of each member graph, ending with the total node count.
    pub segments: Vec<usize>,
}

impl GraphBatch {
    pub fn new(graphs: &[&Graph], features: &[&DenseMatrix]) -> Result<Self> {
        if graphs.len() != features.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} graphs with {} feature matrices",
                graphs.len(),
                features.len()
            )));
        }
        for (i, (g, x)) in graphs.iter().zip(features).enumerate() {
            if g.num_nodes() != x.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "graph {i}: {} nodes, {} feature rows",
                    g.num_nodes(),
                    x.rows()
                )));
            }
        }
        let (graph, segments) = Graph::disjoint_union(graphs.iter().copied());
        let features = DenseMatrix::vstack(features.iter().copied())?;
        Ok(Self {
            graph,
            features,
            segments,
        })
    }

    pub fn select(graphs: &[Graph], features: &[DenseMatrix], ids: &[usize]) -> Result<Self> {
        let gs: Vec<&Graph> = ids.iter().map(|&i| &graphs[i]).collect();
        let xs: Vec<&DenseMatrix> = ids.iter().map(|&i| &features[i]).collect();
        Self::new(&gs, &xs)
    }

    pub fn len(&self) -> usize {
        self.segments.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    /// 1-based; 0 when no epoch completed.
    pub best_epoch: usize,
    /// Selection accuracy at `best_epoch`, in `[0, 1]`.
    pub best_val_acc: f64,
    pub test_acc: f64,
    pub final_loss: f64,
    pub diverged: bool,
}

impl FitOutcome {
    fn start() -> Self {
        Self {
            best_epoch: 0,
            best_val_acc: f64::NEG_INFINITY,
            test_acc: 0.0,
            final_loss: f64::NAN,
            diverged: false,
        }
    }

    fn finish(mut self) -> Self {
        if self.best_epoch == 0 {
            self.best_val_acc = 0.0;
        }
        self
    }
}

/// Fraction of `(row, class)` targets whose argmax (lowest index on ties)
/// equals the class. Rows with non-finite logits count as wrong.
pub fn accuracy(logits: &DenseMatrix, targets: &[(usize, usize)]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let hits = targets
        .iter()
        .filter(|&&(r, c)| {
            let row = logits.row(r);
            if row.iter().any(|x| !x.is_finite()) {
                return false;
            }
            let mut best = 0;
            for (j, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = j;
                }
            }
            best == c
        })
        .count();
    hits as f64 / targets.len() as f64
}

fn params_finite(model: &SageModel) -> bool {
    model.params().iter().all(|t| t.value.is_finite())
}

fn labeled(labels: &NodeLabels, ids: &[usize]) -> Result<Vec<(usize, usize)>> {
    ids.iter()
        .map(|&v| {
            labels
                .get(v)
                .map(|c| (v, c))
                .ok_or_else(|| Error::InvalidArgument(format!("node {v} has no label")))
        })
        .collect()
}

/// Full-batch training on `train`; each epoch is scored on `val` (or on
/// `train` if `val` is empty) and the test accuracy of the best-scoring epoch
/// is reported. Earliest epoch wins ties.
#[allow(clippy::too_many_arguments)]
pub fn fit_node(
    model: &mut SageModel,
    g: &Graph,
    x: &DenseMatrix,
    labels: &NodeLabels,
    train: &[usize],
    val: &[usize],
    test: &[usize],
    rng: &mut Rng,
) -> Result<FitOutcome> {
    let selection = labeled(labels, if val.is_empty() { train } else { val })?;
    let test = labeled(labels, test)?;
    let lr = model.config().learning_rate;
    let mut adam = AdamState::for_model(model);
    let mut out = FitOutcome::start();
    for epoch in 1..=model.config().epochs {
        let loss = model.node_loss_backward(g, x, labels, train, Pass::Train(rng))?;
        out.final_loss = loss;
        if !loss.is_finite() {
            out.diverged = true;
            break;
        }
        adam_step(&mut model.params_mut(), &mut adam, lr)?;
        if !params_finite(model) {
            out.diverged = true;
            break;
        }
        let logits = model.forward_node(g, x, Pass::Eval)?;
        let score = accuracy(&logits, &selection);
        if score > out.best_val_acc {
            out.best_val_acc = score;
            out.best_epoch = epoch;
            out.test_acc = accuracy(&logits, &test);
        }
    }
    Ok(out.finish())
}

/// Minibatch training over the graphs listed in `train`, with per-epoch
/// selection on `val` (or `train` if `val` is empty).
#[allow(clippy::too_many_arguments)]
pub fn fit_graph(
    model: &mut SageModel,
    graphs: &[Graph],
    features: &[DenseMatrix],
    labels: &[usize],
    train: &[usize],
    val: &[usize],
    test: &[usize],
    rng: &mut Rng,
) -> Result<FitOutcome> {
    if graphs.len() != features.len() || graphs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} graphs, {} feature matrices, {} labels",
            graphs.len(),
            features.len(),
            labels.len()
        )));
    }
    if train.is_empty() {
        return Err(Error::EmptyMask);
    }
    let sel_ids = if val.is_empty() { train } else { val };
    let sel_batch = GraphBatch::select(graphs, features, sel_ids)?;
    let sel_targets: Vec<_> = sel_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (i, labels[id]))
        .collect();
    let test_batch = GraphBatch::select(graphs, features, test)?;
    let test_targets: Vec<_> = test
        .iter()
        .enumerate()
        .map(|(i, &id)| (i, labels[id]))
        .collect();

    let lr = model.config().learning_rate;
    let batch_size = model.config().batch_size;
    let mut adam = AdamState::for_model(model);
    let mut out = FitOutcome::start();
    let mut order = train.to_vec();
    'epochs: for epoch in 1..=model.config().epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch = GraphBatch::select(graphs, features, chunk)?;
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let loss = model.graph_loss_backward(&batch, &y, Pass::Train(rng))?;
            if !loss.is_finite() {
                out.final_loss = loss;
                out.diverged = true;
                break 'epochs;
            }
            total += loss * chunk.len() as f64;
            adam_step(&mut model.params_mut(), &mut adam, lr)?;
            if !params_finite(model) {
                out.diverged = true;
                break 'epochs;
            }
        }
        out.final_loss = total / order.len() as f64;
        let logits = model.forward_batch(&sel_batch, Pass::Eval)?;
        let score = accuracy(&logits, &sel_targets);
        if score > out.best_val_acc {
            out.best_val_acc = score;
            out.best_epoch = epoch;
            out.test_acc = if test.is_empty() {
                0.0
            } else {
                accuracy(
                    &model.forward_batch(&test_batch, Pass::Eval)?,
                    &test_targets,
                )
            };
        }
    }
    Ok(out.finish())
}
