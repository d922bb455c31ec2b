//! Leading eigenpairs of a symmetric sparse operator.
//!
//! Block power iteration on the shifted operator `(A + I) / 2`, which maps a
//! spectrum inside `[-1, 1]` onto `[0, 1]` without changing the order, so the
//! algebraically largest eigenvalues dominate. A Rayleigh-Ritz projection
//! after every multiply separates vectors inside the block; earlier vectors
//! are thereby deflated from later ones.

use super::{DenseMatrix, Rng};
use crate::error::{Error, Result};
use crate::graph::SparseSymmetric;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSettings {
    /// Bound on `‖A v − λ v‖₂` for every returned pair.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    /// Descending.
    pub values: Vec<f64>,
    /// One unit-norm column per eigenvalue.
    pub vectors: DenseMatrix,
}

/// Top-`k` eigenpairs by descending eigenvalue.
///
/// The operator's spectrum must lie in `[-1, 1]` (true for any normalized
/// adjacency). Each vector's first component with magnitude above `1e-12`
/// is made positive.
pub fn top_k_eigs(op: &SparseSymmetric, k: usize, settings: EigenSettings) -> Result<EigenPairs> {
    let n = op.dim();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}x{n} operator"
        )));
    }
    if k == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(n, 0),
        });
    }

    let block = n.min(k + (k / 4).max(8));
    let mut rng = Rng::new(0x5eed_e16e);
    let mut basis: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gaussian()).collect())
        .collect();
    orthonormalize(&mut basis, &mut rng);
    let mut images = apply_all(op, &basis);

    let mut residual = f64::INFINITY;
    for _ in 0..settings.max_iter {
        // Shifted power step reusing A Q from the previous projection.
        for (q, aq) in basis.iter_mut().zip(&images) {
            for (x, &y) in q.iter_mut().zip(aq) {
                *x = 0.5 * (*x + y);
            }
        }
        orthonormalize(&mut basis, &mut rng);
        images = apply_all(op, &basis);

        let (theta, rotation) = rayleigh_ritz(&basis, &images);
        basis = rotate(&basis, &rotation);
        images = rotate(&images, &rotation);

        residual = (0..k)
            .map(|j| {
                images[j]
                    .iter()
                    .zip(&basis[j])
                    .map(|(av, v)| (av - theta[j] * v).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if residual <= settings.tol {
            let mut vectors = DenseMatrix::zeros(n, k);
            for (j, v) in basis.iter_mut().take(k).enumerate() {
                fix_sign(v);
                for (i, &x) in v.iter().enumerate() {
                    vectors.set(i, j, x);
                }
            }
            return Ok(EigenPairs {
                values: theta[..k].to_vec(),
                vectors,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "eigensolver",
        iterations: settings.max_iter,
        residual,
    })
}

fn apply_all(op: &SparseSymmetric, vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    vectors
        .iter()
        .map(|v| {
            let mut out = vec![0.0; v.len()];
            op.apply(v, &mut out);
            out
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt, two passes. Collapsed vectors are redrawn.
fn orthonormalize(vectors: &mut [Vec<f64>], rng: &mut Rng) {
    for j in 0..vectors.len() {
        let mut attempts = 0;
        loop {
            let (done, rest) = vectors.split_at_mut(j);
            let v = &mut rest[0];
            let before = dot(v, v).sqrt();
            for _ in 0..2 {
                for q in done.iter() {
                    let c = dot(q, v);
                    for (x, y) in v.iter_mut().zip(q) {
                        *x -= c * y;
                    }
                }
            }
            let norm = dot(v, v).sqrt();
            if norm > 1e-10 * before.max(1e-300) && norm > 1e-300 {
                v.iter_mut().for_each(|x| *x /= norm);
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "cannot extend orthonormal basis");
            v.iter_mut().for_each(|x| *x = rng.gaussian());
        }
    }
}

/// Eigen-decomposition of `Q^T A Q`; columns of the rotation sorted by
/// descending Ritz value.
fn rayleigh_ritz(basis: &[Vec<f64>], images: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = basis.len();
    let mut t = vec![0.0; p * p];
    for i in 0..p {
        for j in i..p {
            let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
            t[i * p + j] = v;
            t[j * p + i] = v;
        }
    }
    let (values, vectors) = jacobi_eigen(t, p);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let theta = order.iter().map(|&c| values[c]).collect();
    let rotation = order
        .iter()
        .map(|&c| (0..p).map(|r| vectors[r * p + c]).collect())
        .collect();
    (theta, rotation)
}

/// New vectors `Σ_i rotation[j][i] · vectors[i]` for each column `j`.
fn rotate(vectors: &[Vec<f64>], rotation: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = vectors.first().map_or(0, Vec::len);
    rotation
        .iter()
        .map(|coeffs| {
            let mut out = vec![0.0; n];
            for (c, v) in coeffs.iter().zip(vectors) {
                if *c != 0.0 {
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += c * x;
                    }
                }
            }
            out
        })
        .collect()
}

/// Cyclic Jacobi on a dense symmetric row-major matrix.
/// Returns eigenvalues and row-major eigenvectors (one per column).
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>();
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

fn fix_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn jacobi_on_diagonalizable_2x2() {
        let (vals, vecs) = jacobi_eigen(vec![2.0, 1.0, 1.0, 2.0], 2);
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 1.0).abs() < 1e-14 && (sorted[1] - 3.0).abs() < 1e-14);
        let dot01 = vecs[0] * vecs[1] + vecs[2] * vecs[3];
        assert!(dot01.abs() < 1e-14);
    }

    #[test]
    fn triangle_leading_pair() {
        let g = Graph::from_edge_list(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let eig = top_k_eigs(&g.normalized_adjacency(), 1, EigenSettings::default()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-9);
        for i in 0..3 {
            assert!((eig.vectors.get(i, 0) - 1.0 / 3f64.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn path_leading_vector_is_sqrt_degree() {
        let g = Graph::from_edge_list(3, &[(0, 1), (1, 2)]).unwrap();
        let eig = top_k_eigs(&g.normalized_adjacency(), 1, EigenSettings::default()).unwrap();
        let expect = [1.0, 2f64.sqrt(), 1.0].map(|x| x / 2.0);
        assert!((eig.values[0] - 1.0).abs() < 1e-9);
        for (i, e) in expect.iter().enumerate() {
            assert!((eig.vectors.get(i, 0) - e).abs() < 1e-6);
        }
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let g = Graph::from_edge_list(2, &[(0, 1)]).unwrap();
        assert!(top_k_eigs(&g.normalized_adjacency(), 3, EigenSettings::default()).is_err());
    }

    #[test]
    fn iteration_budget_exhaustion_reports_residual() {
        // 200-cycle: slow-converging, almost-degenerate top of spectrum.
        let edges: Vec<_> = (0..200).map(|i| (i, (i + 1) % 200)).collect();
        let g = Graph::from_edge_list(200, &edges).unwrap();
        let err = top_k_eigs(
            &g.normalized_adjacency(),
            4,
            EigenSettings {
                tol: 1e-12,
                max_iter: 2,
            },
        )
        .unwrap_err();
        match err {
            Error::NoConvergence {
                residual,
                iterations,
                ..
            } => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
