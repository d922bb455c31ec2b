//! Artificial node features for graph neural networks on non-attributed
//! graphs, a small trainable GraphSAGE, and the benchmark harness that
//! compares them.
//!
//! Feature families:
//!
//! * positional: `random`, `one_hot`, `eigen`, `deepwalk`
//! * structural: `shared`, `degree`, `degree_plus`, `pagerank`
//!
//! plus pass-through `real` features when a dataset ships them.

pub mod bench;
pub mod cli;
pub mod datasets;
pub mod deepwalk;
pub mod error;
pub mod features;
pub mod gnn;
pub mod graph;
pub mod numerics;

pub use error::{Error, Result};
pub use graph::{Graph, GraphCollection, NodeLabels, SparseSymmetric};
pub use numerics::{DenseMatrix, Rng};
