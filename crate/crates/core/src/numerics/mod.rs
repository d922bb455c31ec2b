//! Deterministic numeric kernels shared by the feature builders and models.

mod dense;
mod eigen;
mod pagerank;
mod rng;

pub use dense::DenseMatrix;
pub use eigen::{top_k_eigs, EigenPairs, EigenSettings};
pub use pagerank::{pagerank, PageRankSettings};
pub use rng::Rng;

/// Random standard-normal matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.gaussian()).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("length matches shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_matrix_is_seed_deterministic() {
        let a = gaussian_matrix(4, 3, &mut Rng::new(7));
        let b = gaussian_matrix(4, 3, &mut Rng::new(7));
        assert_eq!(a, b);
        let c = gaussian_matrix(4, 3, &mut Rng::new(8));
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_matrix_moments() {
        let m = gaussian_matrix(10_000, 1, &mut Rng::new(2024));
        let n = m.as_slice().len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let var = m.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!(var > 0.9 && var < 1.1, "variance {var}");
    }
}
