use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankSettings {
    pub damping: f64,
    /// L1 change between successive iterates.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankSettings {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Stationary scores of the damped random walk `p = (1-d)/n + d·Pᵀp`.
///
/// Mass sitting on zero-degree nodes is spread uniformly over all nodes.
pub fn pagerank(g: &Graph, settings: PageRankSettings) -> Result<Vec<f64>> {
    let PageRankSettings {
        damping,
        tol,
        max_iter,
    } = settings;
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "damping must lie in (0, 1), got {damping}"
        )));
    }
    let n = g.num_nodes();
    if n == 0 {
        return Ok(Vec::new());
    }
    let inv_n = 1.0 / n as f64;
    let inv_deg: Vec<f64> = (0..n)
        .map(|v| match g.deg(v) {
            0 => 0.0,
            d => 1.0 / d as f64,
        })
        .collect();

    let mut scores = vec![inv_n; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&v| g.deg(v) == 0).map(|v| scores[v]).sum();
        let base = (1.0 - damping) * inv_n + damping * dangling * inv_n;
        for (v, out) in next.iter_mut().enumerate() {
            let inflow: f64 = g.adj(v).iter().map(|&u| scores[u] * inv_deg[u]).sum();
            *out = base + damping * inflow;
        }
        // Renormalize away rounding drift.
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        residual = scores.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut scores, &mut next);
        if residual < tol {
            return Ok(scores);
        }
    }
    Err(Error::NoConvergence {
        what: "pagerank",
        iterations: max_iter,
        residual,
    })
}
