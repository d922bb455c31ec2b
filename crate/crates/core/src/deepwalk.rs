//! Truncated random walks and skip-gram training with negative sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{DenseMatrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub walk_len: usize,
    pub walks_per_node: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial step size, decayed linearly to 1e-4 of itself.
    pub learning_rate: f64,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            walk_len: 40,
            walks_per_node: 10,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
        }
    }
}

impl WalkParams {
    pub fn validate(&self) -> Result<()> {
        if self.walk_len == 0 || self.window == 0 || self.negatives == 0 {
            return Err(Error::InvalidArgument(format!(
                "walk_len, window and negatives must be positive: {self:?}"
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    num_nodes: usize,
    walks: Vec<Vec<usize>>,
}

impl WalkCorpus {
    pub fn new(num_nodes: usize, walks: Vec<Vec<usize>>) -> Result<Self> {
        if let Some(&bad) = walks.iter().flatten().find(|&&v| v >= num_nodes) {
            return Err(Error::NodeOutOfRange {
                node: bad,
                num_nodes,
            });
        }
        Ok(Self { num_nodes, walks })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn walks(&self) -> &[Vec<usize>] {
        &self.walks
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.iter().all(Vec::is_empty)
    }
}

/// `walks_per_node` walks from every node, grouped by round.
///
/// Each start node draws from its own sub-stream of `rng`, so the corpus
/// does not depend on thread scheduling.
pub fn generate_walks(g: &Graph, params: &WalkParams, rng: &Rng) -> WalkCorpus {
    let n = g.num_nodes();
    let per_node: Vec<Vec<Vec<usize>>> = (0..n)
        .into_par_iter()
        .map(|start| {
            let mut stream = rng.split_index("walk", start as u64);
            (0..params.walks_per_node)
                .map(|_| single_walk(g, start, params.walk_len, &mut stream))
                .collect()
        })
        .collect();
    let mut walks = Vec::with_capacity(n * params.walks_per_node);
    for round in 0..params.walks_per_node {
        for node_walks in &per_node {
            walks.push(node_walks[round].clone());
        }
    }
    WalkCorpus {
        num_nodes: n,
        walks,
    }
}

fn single_walk(g: &Graph, start: usize, len: usize, rng: &mut Rng) -> Vec<usize> {
    let mut walk = Vec::with_capacity(len);
    let mut current = start;
    walk.push(current);
    while walk.len() < len {
        let nbrs = g.adj(current);
        if nbrs.is_empty() {
            break;
        }
        current = nbrs[rng.below(nbrs.len())];
        walk.push(current);
    }
    walk
}

/// Input ("center") and output ("context") vectors of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub input_vectors: DenseMatrix,
    pub output_vectors: DenseMatrix,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn log_sigmoid(x: f64) -> f64 {
    // log σ(x) = -log(1 + e^{-x}), stable for large |x|
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Negative log-likelihood of one center/context pair with its negatives:
/// `-(log σ(u_c·v) + Σ log σ(-u_n·v))`.
pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut loss = -log_sigmoid(dot(context, center));
    for n in negatives {
        loss -= log_sigmoid(-dot(n, center));
    }
    loss
}

/// Gradient of [`sgns_loss`] with respect to the center, context and each
/// negative vector, in that order.
pub fn sgns_gradients(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let dim = center.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut d_center = vec![0.0; dim];
    let mut targets: Vec<(&[f64], f64)> = vec![(context, 1.0)];
    targets.extend(negatives.iter().map(|n| (*n, 0.0)));
    let mut d_targets = Vec::with_capacity(targets.len());
    for (u, label) in targets {
        // d/ds of -log σ(±s) collapses to σ(s) - label
        let coeff = sigmoid(dot(u, center)) - label;
        for (d, &x) in d_center.iter_mut().zip(u) {
            *d += coeff * x;
        }
        d_targets.push(center.iter().map(|&x| coeff * x).collect::<Vec<_>>());
    }
    let d_context = d_targets.remove(0);
    (d_center, d_context, d_targets)
}

/// One (center, context, negatives) training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SgnsSample {
    pub center: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

/// Stateful trainer; [`train_skipgram`] wraps it for the common case.
#[derive(Debug)]
pub struct SkipGramTrainer<'a> {
    corpus: &'a WalkCorpus,
    params: WalkParams,
    table: EmbeddingTable,
    noise: Option<WeightedIndex<f64>>,
    rng: Rng,
    epochs_done: usize,
    total_pairs: usize,
    pairs_seen: usize,
}

impl<'a> SkipGramTrainer<'a> {
    pub fn new(corpus: &'a WalkCorpus, dim: usize, params: WalkParams, rng: &Rng) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "embedding dim must be positive".into(),
            ));
        }
        if corpus.is_empty() {
            return Err(Error::InvalidArgument("empty walk corpus".into()));
        }
        let n = corpus.num_nodes();
        let mut init = rng.split("skipgram-init");
        let scale = 0.5 / dim as f64;
        let input: Vec<f64> = (0..n * dim)
            .map(|_| (init.uniform() * 2.0 - 1.0) * scale)
            .collect();

        let mut counts = vec![0.0f64; n];
        for &v in corpus.walks().iter().flatten() {
            counts[v] += 1.0;
        }
        let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
        // A corpus of single-node walks has no positive pairs and no noise
        // distribution is needed; any node with nonzero weight suffices otherwise.
        let noise = WeightedIndex::new(&weights).ok();

        let total_pairs = corpus
            .walks()
            .iter()
            .map(|w| context_pairs(w.len(), params.window))
            .sum::<usize>()
            * params.epochs.max(1);

        Ok(Self {
            corpus,
            params,
            table: EmbeddingTable {
                input_vectors: DenseMatrix::from_vec(n, dim, input)?,
                output_vectors: DenseMatrix::zeros(n, dim),
            },
            noise,
            rng: rng.split("skipgram-sgd"),
            epochs_done: 0,
            total_pairs,
            pairs_seen: 0,
        })
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn into_table(self) -> EmbeddingTable {
        self.table
    }

    /// Draws a fixed evaluation set of examples from the corpus.
    pub fn sample_pairs(&self, count: usize, rng: &mut Rng) -> Vec<SgnsSample> {
        let mut out = Vec::with_capacity(count);
        let walks = self.corpus.walks();
        let Some(noise) = &self.noise else {
            return out;
        };
        let mut guard = 0;
        while out.len() < count && guard < count * 100 {
            guard += 1;
            let w = &walks[rng.below(walks.len())];
            if w.len() < 2 {
                continue;
            }
            let i = rng.below(w.len());
            let lo = i.saturating_sub(self.params.window);
            let hi = (i + self.params.window).min(w.len() - 1);
            let j = lo + rng.below(hi - lo + 1);
            if j == i {
                continue;
            }
            let negatives = (0..self.params.negatives)
                .map(|_| noise.sample(rng))
                .collect();
            out.push(SgnsSample {
                center: w[i],
                context: w[j],
                negatives,
            });
        }
        out
    }

    /// Mean of `log σ(u_c·v) + Σ log σ(-u_n·v)` over the samples (higher is better).
    pub fn mean_objective(&self, samples: &[SgnsSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let t = &self.table;
        let total: f64 = samples
            .iter()
            .map(|s| {
                let negs: Vec<&[f64]> = s
                    .negatives
                    .iter()
                    .map(|&n| t.output_vectors.row(n))
                    .collect();
                -sgns_loss(
                    t.input_vectors.row(s.center),
                    t.output_vectors.row(s.context),
                    &negs,
                )
            })
            .sum();
        total / samples.len() as f64
    }

    /// One pass over the corpus in a freshly shuffled walk order.
    pub fn run_epoch(&mut self) -> Result<()> {
        let Some(noise) = self.noise.clone() else {
            self.epochs_done += 1;
            return Ok(());
        };
        let dim = self.table.input_vectors.cols();
        let window = self.params.window;
        let lr0 = self.params.learning_rate;
        let mut order: Vec<usize> = (0..self.corpus.len()).collect();
        self.rng.shuffle(&mut order);
        let mut grad_center = vec![0.0; dim];

        for &wi in &order {
            let walk = &self.corpus.walks()[wi];
            for (i, &center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(window);
                let hi = (i + window).min(walk.len().saturating_sub(1));
                for (j, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let progress = self.pairs_seen as f64 / self.total_pairs.max(1) as f64;
                    let lr = lr0 * (1.0 - progress).max(1e-4);
                    self.pairs_seen += 1;

                    grad_center.iter_mut().for_each(|g| *g = 0.0);
                    for t in 0..=self.params.negatives {
                        let (target, label) = if t == 0 {
                            (context, 1.0)
                        } else {
                            let s = noise.sample(&mut self.rng);
                            if s == context {
                                continue;
                            }
                            (s, 0.0)
                        };
                        let v = self.table.input_vectors.row(center);
                        let u = self.table.output_vectors.row(target);
                        let score: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                        // Same coefficient as sgns_gradients.
                        let coeff = sigmoid(score) - label;
                        for (g, &x) in grad_center.iter_mut().zip(u) {
                            *g += coeff * x;
                        }
                        let v = v.to_vec();
                        let u = self.table.output_vectors.row_mut(target);
                        for (x, &c) in u.iter_mut().zip(&v) {
                            *x -= lr * coeff * c;
                        }
                    }
                    let v = self.table.input_vectors.row_mut(center);
                    for (x, &g) in v.iter_mut().zip(&grad_center) {
                        *x -= lr * g;
                    }
                }
            }
        }
        self.epochs_done += 1;
        if !self.table.input_vectors.is_finite() || !self.table.output_vectors.is_finite() {
            return Err(Error::NonFinite(format!(
                "skip-gram embeddings after epoch {} (learning rate {lr0} too high?)",
                self.epochs_done
            )));
        }
        Ok(())
    }
}

fn context_pairs(len: usize, window: usize) -> usize {
    (0..len)
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(len.saturating_sub(1));
            hi - lo
        })
        .sum()
}

/// Trains `params.epochs` passes of SGNS over the corpus.
pub fn train_skipgram(
    corpus: &WalkCorpus,
    dim: usize,
    params: &WalkParams,
    rng: &Rng,
) -> Result<EmbeddingTable> {
    let mut trainer = SkipGramTrainer::new(corpus, dim, *params, rng)?;
    for _ in 0..params.epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.into_table())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::from_edge_list(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn walks_follow_edges() {
        let g = triangle();
        let c = generate_walks(&g, &WalkParams::default(), &Rng::new(1));
        for w in c.walks() {
            assert_eq!(w.len(), 40);
            assert!(w.windows(2).all(|p| g.has_edge(p[0], p[1])));
        }
    }

    #[test]
    fn isolated_start_gives_single_node_walk() {
        let g = Graph::from_edge_list(3, &[(0, 1)]).unwrap();
        let c = generate_walks(&g, &WalkParams::default(), &Rng::new(1));
        assert!(c
            .walks()
            .iter()
            .filter(|w| w[0] == 2)
            .all(|w| w == &vec![2]));
    }

    #[test]
    fn walk_count() {
        let g = Graph::from_edge_list(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let p = WalkParams {
            walks_per_node: 10,
            ..Default::default()
        };
        assert_eq!(generate_walks(&g, &p, &Rng::new(0)).len(), 50);
    }

    #[test]
    fn context_pair_count_matches_loop() {
        assert_eq!(context_pairs(1, 5), 0);
        assert_eq!(context_pairs(3, 1), 4);
        assert_eq!(context_pairs(40, 5), 40 * 10 - 2 * (5 + 4 + 3 + 2 + 1));
    }

    #[test]
    fn invalid_params_rejected() {
        let g = triangle();
        let c = generate_walks(&g, &WalkParams::default(), &Rng::new(1));
        let bad = WalkParams {
            window: 0,
            ..Default::default()
        };
        assert!(train_skipgram(&c, 4, &bad, &Rng::new(1)).is_err());
        let empty = WalkCorpus::new(3, vec![]).unwrap();
        assert!(train_skipgram(&empty, 4, &WalkParams::default(), &Rng::new(1)).is_err());
    }

    #[test]
    fn huge_learning_rate_is_reported() {
        let edges: Vec<_> = (0..12).map(|i| (i, (i + 1) % 12)).collect();
        let g = Graph::from_edge_list(12, &edges).unwrap();
        let p = WalkParams {
            learning_rate: 1e200,
            epochs: 3,
            ..Default::default()
        };
        let c = generate_walks(&g, &p, &Rng::new(3));
        assert!(matches!(
            train_skipgram(&c, 8, &p, &Rng::new(3)),
            Err(Error::NonFinite(_))
        ));
    }
}
