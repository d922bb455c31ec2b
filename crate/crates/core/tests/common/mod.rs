//! Fixture graphs and independent dense oracles shared by the integration
//! tests. Nothing here calls into the numerics under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nodefeat::gnn::SageModel;
use nodefeat::{DenseMatrix, Graph, Rng};

pub fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    Graph::from_edge_list(n, edges).expect("fixture edges are valid")
}

pub fn path(n: usize) -> Graph {
    let e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    graph(n, &e)
}

pub fn cycle(n: usize) -> Graph {
    let e: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    graph(n, &e)
}

pub fn star(leaves: usize) -> Graph {
    let e: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
    graph(leaves + 1, &e)
}

pub fn complete(n: usize) -> Graph {
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            e.push((i, j));
        }
    }
    graph(n, &e)
}

pub fn grid(rows: usize, cols: usize) -> Graph {
    let mut e = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                e.push((v, v + 1));
            }
            if r + 1 < rows {
                e.push((v, v + cols));
            }
        }
    }
    graph(rows * cols, &e)
}

/// Two 4-cliques joined by a single edge.
pub fn barbell() -> Graph {
    let mut e = Vec::new();
    for base in [0, 4] {
        for i in 0..4 {
            for j in i + 1..4 {
                e.push((base + i, base + j));
            }
        }
    }
    e.push((3, 4));
    graph(8, &e)
}

pub fn petersen() -> Graph {
    let mut e = Vec::new();
    for i in 0..5 {
        e.push((i, (i + 1) % 5));
        e.push((i, i + 5));
        e.push((5 + i, 5 + (i + 2) % 5));
    }
    graph(10, &e)
}

/// Random tree on `n` nodes plus each remaining pair with probability `p`.
pub fn random_connected(n: usize, p: f64, rng: &mut Rng) -> Graph {
    let mut e = Vec::new();
    for v in 1..n {
        e.push((rng.below(v), v));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform() < p {
                e.push((i, j));
            }
        }
    }
    graph(n, &e)
}

/// Blocks of the given sizes; pairs inside a block connect with probability
/// `p_in`, pairs across blocks with `p_out`. Returns the block of each node.
pub fn planted_partition(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    rng: &mut Rng,
) -> (Graph, Vec<usize>) {
    let block: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
        .collect();
    let mut e = Vec::new();
    for i in 0..block.len() {
        for j in i + 1..block.len() {
            let p = if block[i] == block[j] { p_in } else { p_out };
            if rng.uniform() < p {
                e.push((i, j));
            }
        }
    }
    (graph(block.len(), &e), block)
}

/// Connected fixtures, each with at least two nodes.
pub fn connected_fixtures() -> Vec<(String, Graph)> {
    let mut out = vec![
        ("path5".to_string(), path(5)),
        ("path2".to_string(), path(2)),
        ("cycle6".to_string(), cycle(6)),
        ("cycle7".to_string(), cycle(7)),
        ("star6".to_string(), star(6)),
        ("complete5".to_string(), complete(5)),
        ("grid3x4".to_string(), grid(3, 4)),
        ("barbell".to_string(), barbell()),
        ("petersen".to_string(), petersen()),
    ];
    let mut rng = Rng::new(17);
    for i in 0..8 {
        let n = 3 + rng.below(18);
        out.push((format!("random{i}"), random_connected(n, 0.2, &mut rng)));
    }
    out
}

/// Connected fixtures plus graphs with several components and isolated nodes.
pub fn all_fixtures() -> Vec<(String, Graph)> {
    let mut out = connected_fixtures();
    out.push((
        "two-triangles+isolated".into(),
        graph(7, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]),
    ));
    out.push(("edgeless4".into(), Graph::empty(4)));
    out.push(("single".into(), Graph::empty(1)));
    out.push(("star+isolated".into(), graph(5, &[(0, 1), (0, 2), (0, 3)])));
    out
}

pub fn adjacency(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    DMatrix::from_fn(n, n, |i, j| if g.has_edge(i, j) { 1.0 } else { 0.0 })
}

/// `D^-1/2 A D^-1/2` built entry by entry; isolated rows stay zero.
pub fn normalized_adjacency(g: &Graph) -> DMatrix<f64> {
    let a = adjacency(g);
    let d: Vec<f64> = (0..g.num_nodes()).map(|i| a.row(i).sum()).collect();
    DMatrix::from_fn(g.num_nodes(), g.num_nodes(), |i, j| {
        if a[(i, j)] == 0.0 {
            0.0
        } else {
            1.0 / (d[i] * d[j]).sqrt()
        }
    })
}

/// Eigenvalues of the normalized adjacency, descending.
pub fn dense_spectrum(g: &Graph) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(normalized_adjacency(g))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Solves `(I - d M) p = (1 - d)/n` where `M` is the column-stochastic walk
/// matrix with zero-degree columns replaced by the uniform distribution.
pub fn dense_pagerank(g: &Graph, damping: f64) -> Vec<f64> {
    let n = g.num_nodes();
    let a = adjacency(g);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let deg = a.column(j).sum();
        for i in 0..n {
            m[(i, j)] = if deg == 0.0 {
                1.0 / n as f64
            } else {
                a[(i, j)] / deg
            };
        }
    }
    let lhs = DMatrix::identity(n, n) - m * damping;
    let rhs = DVector::from_element(n, (1.0 - damping) / n as f64);
    lhs.lu()
        .solve(&rhs)
        .expect("I - dM is nonsingular")
        .iter()
        .copied()
        .collect()
}

/// Entry-wise relative error below which finite differences and analytic
/// gradients agree. The floor keeps near-zero entries from dividing by noise.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Max relative error between the gradients `loss` leaves in the model's
/// tensors and central differences of `loss` with step `h`.
pub fn gradient_check(model: &mut SageModel, h: f64, loss: impl Fn(&mut SageModel) -> f64) -> f64 {
    loss(model);
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|t| t.grad.as_slice().to_vec())
        .collect();
    let mut worst = 0.0f64;
    for (p, grads) in analytic.iter().enumerate() {
        for (e, &g) in grads.iter().enumerate() {
            let original = model.params()[p].value.as_slice()[e];
            model.params_mut()[p].value.as_mut_slice()[e] = original + h;
            let plus = loss(model);
            model.params_mut()[p].value.as_mut_slice()[e] = original - h;
            let minus = loss(model);
            model.params_mut()[p].value.as_mut_slice()[e] = original;
            worst = worst.max(relative_error(g, (plus - minus) / (2.0 * h)));
        }
    }
    worst
}

/// `gradient_check` for a mean cross-entropy over the rows of `logits`.
///
/// The central difference is taken on the logits and the change in loss is
/// assembled with `exp_m1`/`ln_1p`. Subtracting two rounded losses instead
/// loses everything below ulp(loss) / h, which swamps small gradient entries
/// whenever one row is confidently wrong.
pub fn cross_entropy_gradient_check(
    model: &mut SageModel,
    h: f64,
    targets: &[usize],
    logits: impl Fn(&SageModel) -> DenseMatrix,
    loss: impl Fn(&mut SageModel) -> f64,
) -> f64 {
    let reported = loss(model);
    let z = logits(model);
    let direct: f64 = (0..z.rows())
        .map(|r| {
            let row = z.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln() - row[targets[r]]
        })
        .sum::<f64>()
        / z.rows() as f64;
    assert!(
        relative_error(reported, direct) < 1e-12,
        "loss {reported} vs {direct}"
    );

    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|t| t.grad.as_slice().to_vec())
        .collect();
    let mut worst = 0.0f64;
    for (p, grads) in analytic.iter().enumerate() {
        for (e, &g) in grads.iter().enumerate() {
            let original = model.params()[p].value.as_slice()[e];
            model.params_mut()[p].value.as_mut_slice()[e] = original + h;
            let plus = logits(model);
            model.params_mut()[p].value.as_mut_slice()[e] = original - h;
            let minus = logits(model);
            model.params_mut()[p].value.as_mut_slice()[e] = original;
            let mut delta = 0.0;
            for (r, &c) in targets.iter().enumerate() {
                let (zp, zm) = (plus.row(r), minus.row(r));
                let m = zm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mut base, mut change) = (0.0, 0.0);
                for (a, b) in zp.iter().zip(zm) {
                    let w = (b - m).exp();
                    base += w;
                    change += w * (a - b).exp_m1();
                }
                delta += (change / base).ln_1p() - (zp[c] - zm[c]);
            }
            let fd = delta / targets.len() as f64 / (2.0 * h);
            worst = worst.max(relative_error(g, fd));
        }
    }
    worst
}

/// Uniformly random permutation of `0..n`.
pub fn permutation(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut p);
    p
}
