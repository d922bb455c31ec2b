//! Artificial node features.
//!
//! Each recipe in [`FeatureSpec`] turns a bare [`Graph`] into an N×d
//! [`FeatureMatrix`]. Positional recipes give every node an identity or a
//! coordinate in the global graph; structural recipes describe only the
//! node's local connectivity, so structurally equivalent nodes get equal rows.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::deepwalk::{generate_walks, train_skipgram, WalkParams};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphCollection};
use crate::numerics::{
    gaussian_matrix, pagerank, top_k_eigs, DenseMatrix, EigenSettings, PageRankSettings, Rng,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureKind {
    Random,
    OneHot,
    Eigen,
    Deepwalk,
    Shared,
    Degree,
    DegreePlus,
    Pagerank,
    Real,
}

impl FeatureKind {
    /// Canonical table order.
    pub const ALL: [FeatureKind; 9] = [
        FeatureKind::Random,
        FeatureKind::OneHot,
        FeatureKind::Eigen,
        FeatureKind::Deepwalk,
        FeatureKind::Shared,
        FeatureKind::Degree,
        FeatureKind::DegreePlus,
        FeatureKind::Pagerank,
        FeatureKind::Real,
    ];

    pub fn type_tag(self) -> TypeTag {
        match self {
            FeatureKind::Random
            | FeatureKind::OneHot
            | FeatureKind::Eigen
            | FeatureKind::Deepwalk => TypeTag::Positional,
            FeatureKind::Shared
            | FeatureKind::Degree
            | FeatureKind::DegreePlus
            | FeatureKind::Pagerank => TypeTag::Structural,
            FeatureKind::Real => TypeTag::Real,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Random => "random",
            FeatureKind::OneHot => "one_hot",
            FeatureKind::Eigen => "eigen",
            FeatureKind::Deepwalk => "deepwalk",
            FeatureKind::Shared => "shared",
            FeatureKind::Degree => "degree",
            FeatureKind::DegreePlus => "degree_plus",
            FeatureKind::Pagerank => "pagerank",
            FeatureKind::Real => "real",
        }
    }

    /// Label used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            FeatureKind::OneHot => "one-hot",
            FeatureKind::DegreePlus => "degree+",
            FeatureKind::Real => "real feat.",
            other => other.name(),
        }
    }

    /// Whether the features change with the run seed.
    pub fn is_seeded(self) -> bool {
        matches!(self, FeatureKind::Random | FeatureKind::Deepwalk)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "random" => FeatureKind::Random,
            "one_hot" | "onehot" => FeatureKind::OneHot,
            "eigen" => FeatureKind::Eigen,
            "deepwalk" => FeatureKind::Deepwalk,
            "shared" => FeatureKind::Shared,
            "degree" => FeatureKind::Degree,
            "degree_plus" | "degree+" => FeatureKind::DegreePlus,
            "pagerank" => FeatureKind::Pagerank,
            "real" => FeatureKind::Real,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown feature kind {s:?}"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeTag {
    Positional,
    Structural,
    Real,
}

impl TypeTag {
    pub fn symbol(self) -> &'static str {
        match self {
            TypeTag::Positional => "P",
            TypeTag::Structural => "S",
            TypeTag::Real => "-",
        }
    }
}

/// A feature recipe with exactly the parameters its kind uses.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSpec {
    Random {
        dim: usize,
        seed: u64,
    },
    OneHot,
    Eigen {
        k: usize,
    },
    Deepwalk {
        dim: usize,
        walk: WalkParams,
        seed: u64,
    },
    Shared {
        dim: usize,
    },
    Degree {
        cap: Option<usize>,
    },
    DegreePlus {
        bucket_base: usize,
    },
    Pagerank {
        dim: usize,
    },
    Real,
}

impl FeatureSpec {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureSpec::Random { .. } => FeatureKind::Random,
            FeatureSpec::OneHot => FeatureKind::OneHot,
            FeatureSpec::Eigen { .. } => FeatureKind::Eigen,
            FeatureSpec::Deepwalk { .. } => FeatureKind::Deepwalk,
            FeatureSpec::Shared { .. } => FeatureKind::Shared,
            FeatureSpec::Degree { .. } => FeatureKind::Degree,
            FeatureSpec::DegreePlus { .. } => FeatureKind::DegreePlus,
            FeatureSpec::Pagerank { .. } => FeatureKind::Pagerank,
            FeatureSpec::Real => FeatureKind::Real,
        }
    }

    /// Default recipe of a kind with the given width (where width applies).
    pub fn with_defaults(kind: FeatureKind, dim: usize) -> Self {
        match kind {
            FeatureKind::Random => FeatureSpec::Random { dim, seed: 0 },
            FeatureKind::OneHot => FeatureSpec::OneHot,
            FeatureKind::Eigen => FeatureSpec::Eigen { k: dim },
            FeatureKind::Deepwalk => FeatureSpec::Deepwalk {
                dim,
                walk: WalkParams::default(),
                seed: 0,
            },
            FeatureKind::Shared => FeatureSpec::Shared { dim },
            FeatureKind::Degree => FeatureSpec::Degree { cap: None },
            FeatureKind::DegreePlus => FeatureSpec::DegreePlus { bucket_base: 2 },
            FeatureKind::Pagerank => FeatureSpec::Pagerank { dim },
            FeatureKind::Real => FeatureSpec::Real,
        }
    }

    /// Same recipe reseeded; unseeded kinds are returned unchanged.
    pub fn reseeded(&self, new_seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            FeatureSpec::Random { seed, .. } | FeatureSpec::Deepwalk { seed, .. } => {
                *seed = new_seed
            }
            _ => {}
        }
        out
    }

    /// Same recipe with a new width, for kinds that have one.
    pub fn with_dim(&self, new_dim: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            FeatureSpec::Random { dim, .. }
            | FeatureSpec::Deepwalk { dim, .. }
            | FeatureSpec::Shared { dim }
            | FeatureSpec::Pagerank { dim } => *dim = new_dim,
            FeatureSpec::Eigen { k } => *k = new_dim,
            _ => {}
        }
        out
    }

    /// Width parameter (`dim` or `k`), if the kind has one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FeatureSpec::Random { dim, .. }
            | FeatureSpec::Deepwalk { dim, .. }
            | FeatureSpec::Shared { dim }
            | FeatureSpec::Pagerank { dim } => Some(*dim),
            FeatureSpec::Eigen { k } => Some(*k),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == Some(0) {
            return Err(Error::InvalidArgument(format!(
                "{} features need a positive dimension",
                self.kind()
            )));
        }
        match self {
            FeatureSpec::DegreePlus { bucket_base } if *bucket_base < 2 => {
                Err(Error::InvalidArgument(format!(
                    "bucket base must be at least 2, got {bucket_base}"
                )))
            }
            FeatureSpec::Deepwalk { walk, .. } => walk.validate(),
            _ => Ok(()),
        }
    }
}

/// Solver settings the spectral and PageRank recipes use.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NumericSettings {
    pub eigen: EigenSettings,
    pub pagerank: PageRankSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DenseMatrix,
    pub spec: FeatureSpec,
    pub type_tag: TypeTag,
}

impl FeatureMatrix {
    /// Tags `values` with the type of `spec`.
    pub fn new(values: DenseMatrix, spec: FeatureSpec) -> Self {
        let type_tag = spec.kind().type_tag();
        Self {
            values,
            spec,
            type_tag,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }
}

pub fn init_random(g: &Graph, dim: usize, rng: &mut Rng) -> FeatureMatrix {
    let seed = rng.seed();
    FeatureMatrix::new(
        gaussian_matrix(g.num_nodes(), dim, rng),
        FeatureSpec::Random { dim, seed },
    )
}

pub fn init_one_hot(g: &Graph) -> FeatureMatrix {
    FeatureMatrix::new(
        one_hot_rows(g.num_nodes(), g.num_nodes()),
        FeatureSpec::OneHot,
    )
}

pub fn init_shared(g: &Graph, dim: usize) -> FeatureMatrix {
    FeatureMatrix::new(
        DenseMatrix::filled(g.num_nodes(), dim, 1.0),
        FeatureSpec::Shared { dim },
    )
}

/// One-hot degree, width `min(max_degree, cap) + 1`.
pub fn init_degree(g: &Graph, cap: Option<usize>) -> FeatureMatrix {
    degree_features(g, g.max_degree(), cap)
}

fn degree_features(g: &Graph, max_degree: usize, cap: Option<usize>) -> FeatureMatrix {
    let top = cap.map_or(max_degree, |c| c.min(max_degree));
    let mut m = DenseMatrix::zeros(g.num_nodes(), top + 1);
    for v in 0..g.num_nodes() {
        m.set(v, g.deg(v).min(top), 1.0);
    }
    FeatureMatrix::new(m, FeatureSpec::Degree { cap })
}

/// Logarithmic degree bucket: 0 for isolated nodes, otherwise
/// `floor(log_base(d)) + 1`. Integer arithmetic, so exact at bucket edges.
pub fn degree_bucket(degree: usize, base: usize) -> usize {
    if degree == 0 {
        return 0;
    }
    let mut bucket = 1;
    let mut d = degree;
    while d >= base {
        d /= base;
        bucket += 1;
    }
    bucket
}

/// One-hot over logarithmic degree buckets.
pub fn init_degree_plus(g: &Graph, bucket_base: usize) -> Result<FeatureMatrix> {
    degree_plus_features(g, g.max_degree(), bucket_base)
}

fn degree_plus_features(g: &Graph, max_degree: usize, base: usize) -> Result<FeatureMatrix> {
    let spec = FeatureSpec::DegreePlus { bucket_base: base };
    spec.validate()?;
    let dim = degree_bucket(max_degree, base) + 1;
    let mut m = DenseMatrix::zeros(g.num_nodes(), dim);
    for v in 0..g.num_nodes() {
        m.set(v, degree_bucket(g.deg(v), base), 1.0);
    }
    Ok(FeatureMatrix::new(m, spec))
}

/// PageRank score tiled across `dim` columns.
pub fn init_pagerank(g: &Graph, dim: usize, settings: PageRankSettings) -> Result<FeatureMatrix> {
    let scores = pagerank(g, settings)?;
    let mut m = DenseMatrix::zeros(g.num_nodes(), dim);
    for (v, &s) in scores.iter().enumerate() {
        m.row_mut(v).fill(s);
    }
    Ok(FeatureMatrix::new(m, FeatureSpec::Pagerank { dim }))
}

/// Top-`k` eigenvectors of the normalized adjacency as columns.
///
/// Isolated nodes get zero rows. When fewer than `k` nodes have edges the
/// trailing columns are zero.
pub fn init_eigen(g: &Graph, k: usize, settings: EigenSettings) -> Result<FeatureMatrix> {
    if k > g.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} nodes of the graph",
            g.num_nodes()
        )));
    }
    eigen_features(g, k, settings)
}

fn eigen_features(g: &Graph, k: usize, settings: EigenSettings) -> Result<FeatureMatrix> {
    let active: Vec<usize> = (0..g.num_nodes()).filter(|&v| g.deg(v) > 0).collect();
    let mut m = DenseMatrix::zeros(g.num_nodes(), k);
    let k_eff = k.min(active.len());
    if k_eff > 0 {
        let op = g.normalized_adjacency().submatrix(&active);
        let eig = top_k_eigs(&op, k_eff, settings)?;
        for (row, &v) in active.iter().enumerate() {
            for j in 0..k_eff {
                m.set(v, j, eig.vectors.get(row, j));
            }
        }
    }
    Ok(FeatureMatrix::new(m, FeatureSpec::Eigen { k }))
}

/// Skip-gram input vectors trained on truncated random walks.
pub fn init_deepwalk(g: &Graph, dim: usize, walk: &WalkParams, rng: &Rng) -> Result<FeatureMatrix> {
    let corpus = generate_walks(g, walk, &rng.split("walks"));
    let table = train_skipgram(&corpus, dim, walk, &rng.split("skipgram"))?;
    Ok(FeatureMatrix::new(
        table.input_vectors,
        FeatureSpec::Deepwalk {
            dim,
            walk: *walk,
            seed: rng.seed(),
        },
    ))
}

/// Builds any non-`real` recipe for a single graph.
pub fn build_features(
    g: &Graph,
    spec: &FeatureSpec,
    settings: &NumericSettings,
) -> Result<FeatureMatrix> {
    spec.validate()?;
    let mut m = match spec {
        FeatureSpec::Random { dim, seed } => init_random(g, *dim, &mut Rng::new(*seed)),
        FeatureSpec::OneHot => init_one_hot(g),
        FeatureSpec::Eigen { k } => init_eigen(g, *k, settings.eigen)?,
        FeatureSpec::Deepwalk { dim, walk, seed } => {
            init_deepwalk(g, *dim, walk, &Rng::new(*seed))?
        }
        FeatureSpec::Shared { dim } => init_shared(g, *dim),
        FeatureSpec::Degree { cap } => init_degree(g, *cap),
        FeatureSpec::DegreePlus { bucket_base } => init_degree_plus(g, *bucket_base)?,
        FeatureSpec::Pagerank { dim } => init_pagerank(g, *dim, settings.pagerank)?,
        FeatureSpec::Real => {
            return Err(Error::InvalidArgument(
                "real features come from the dataset, not from a recipe".into(),
            ))
        }
    };
    m.spec = spec.clone();
    Ok(m)
}

/// Builds a recipe for every graph of a collection with a common width.
///
/// One-hot uses the position inside each graph over `global_max_nodes`
/// columns; degree recipes size themselves from `global_max_degree`; eigen
/// pads graphs smaller than `k` with zero columns; seeded recipes draw a
/// separate stream per graph.
pub fn build_collection_features(
    coll: &GraphCollection,
    spec: &FeatureSpec,
    settings: &NumericSettings,
) -> Result<Vec<FeatureMatrix>> {
    spec.validate()?;
    coll.graphs()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut m = match spec {
                FeatureSpec::OneHot => FeatureMatrix::new(
                    one_hot_rows(g.num_nodes(), coll.global_max_nodes()),
                    FeatureSpec::OneHot,
                ),
                FeatureSpec::Degree { cap } => degree_features(g, coll.global_max_degree(), *cap),
                FeatureSpec::DegreePlus { bucket_base } => {
                    degree_plus_features(g, coll.global_max_degree(), *bucket_base)?
                }
                FeatureSpec::Eigen { k } => eigen_features(g, *k, settings.eigen)?,
                FeatureSpec::Random { dim, seed } => {
                    let mut rng = Rng::new(*seed).split_index("graph", i as u64);
                    FeatureMatrix::new(gaussian_matrix(g.num_nodes(), *dim, &mut rng), spec.clone())
                }
                FeatureSpec::Deepwalk { dim, walk, seed } => init_deepwalk(
                    g,
                    *dim,
                    walk,
                    &Rng::new(*seed).split_index("graph", i as u64),
                )?,
                other => build_features(g, other, settings)?,
            };
            m.spec = spec.clone();
            Ok(m)
        })
        .collect()
}

fn one_hot_rows(rows: usize, cols: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for v in 0..rows {
        m.set(v, v, 1.0);
    }
    m
}

/// Reads a tab-separated float matrix, one node per line, and checks the
/// row count against the graph.
pub fn load_real_features(path: &Path, g: &Graph) -> Result<FeatureMatrix> {
    let values = read_tsv_matrix(path)?;
    if values.rows() != g.num_nodes() {
        return Err(Error::parse(
            path,
            values.rows() + 1,
            format!(
                "found {} feature rows for a graph of {} nodes",
                values.rows(),
                g.num_nodes()
            ),
        ));
    }
    Ok(FeatureMatrix::new(values, FeatureSpec::Real))
}

pub fn read_tsv_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split('\t')
            .map(|field| {
                field
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        Error::parse(path, i + 1, format!("not a finite number: {field:?}"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("{} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

/// Writes one node per line with tab-separated, round-trip-exact floats.
pub fn write_tsv_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut out = String::with_capacity(m.rows() * m.cols() * 8);
    for i in 0..m.rows() {
        let fields: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}
