//! Text-format dataset loaders and train/validation/test splits.
//!
//! Node tasks use a directory with `edges.tsv` (`src<TAB>dst`), `labels.tsv`
//! (`node<TAB>class`, class `-1` for unlabeled; one line per node, which
//! fixes the node count) and an optional `features.tsv`. Graph tasks use the
//! TU layout: `NAME_A.txt`, `NAME_graph_indicator.txt`,
//! `NAME_graph_labels.txt`, and optionally `NAME_node_labels.txt` and
//! `NAME_node_attributes.txt`, all 1-indexed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{load_real_features, write_tsv_matrix, FeatureMatrix};
use crate::graph::{Graph, GraphCollection, NodeLabels};
use crate::numerics::{DenseMatrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDataset {
    pub name: String,
    pub graph: Graph,
    pub labels: NodeLabels,
    pub real_features: Option<FeatureMatrix>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with 1-based line numbers.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    field: &str,
    what: &str,
) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{what} is not an integer: {field:?}")))
}

fn tab_fields<'a>(path: &Path, line: usize, text: &'a str, count: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = text.split('\t').collect();
    if fields.len() != count {
        return Err(Error::parse(
            path,
            line,
            format!("{} fields, expected {count}", fields.len()),
        ));
    }
    Ok(fields)
}

/// Class count implied by the observed ids; gaps are errors.
fn check_class_range(path: &Path, classes: &BTreeSet<usize>) -> Result<usize> {
    let num_classes = classes.iter().next_back().map_or(0, |m| m + 1);
    if let Some(missing) = (0..num_classes).find(|c| !classes.contains(c)) {
        return Err(Error::parse(
            path,
            0,
            format!("class ids are not contiguous: class {missing} never appears"),
        ));
    }
    Ok(num_classes)
}

pub fn load_node_dataset(dir: &Path) -> Result<NodeDataset> {
    let labels_path = dir.join("labels.tsv");
    let text = read_text(&labels_path)?;
    let rows: Vec<(usize, &str)> = numbered_lines(&text).collect();
    let n = rows.len();
    let mut labels: Vec<Option<Option<usize>>> = vec![None; n];
    let mut classes = BTreeSet::new();
    for (line, row) in rows {
        let f = tab_fields(&labels_path, line, row, 2)?;
        let node: usize = parse_field(&labels_path, line, f[0], "node id")?;
        let class: i64 = parse_field(&labels_path, line, f[1], "class")?;
        if node >= n {
            return Err(Error::parse(
                &labels_path,
                line,
                format!("node id {node} out of range for {n} nodes"),
            ));
        }
        if labels[node].is_some() {
            return Err(Error::DuplicateKey(format!(
                "{}:{line}: node {node} labeled twice",
                labels_path.display()
            )));
        }
        let class = match class {
            -1 => None,
            c if c >= 0 => Some(c as usize),
            c => {
                return Err(Error::parse(
                    &labels_path,
                    line,
                    format!("negative class {c}"),
                ))
            }
        };
        classes.extend(class);
        labels[node] = Some(class);
    }
    let num_classes = check_class_range(&labels_path, &classes)?;
    let labels = NodeLabels::new(
        labels.into_iter().map(|l| l.flatten()).collect(),
        num_classes,
    )?;

    let edges_path = dir.join("edges.tsv");
    let text = read_text(&edges_path)?;
    let mut edges = Vec::new();
    for (line, row) in numbered_lines(&text) {
        let f = tab_fields(&edges_path, line, row, 2)?;
        let u: usize = parse_field(&edges_path, line, f[0], "source")?;
        let v: usize = parse_field(&edges_path, line, f[1], "target")?;
        if u >= n || v >= n {
            return Err(Error::parse(
                &edges_path,
                line,
                format!("edge ({u}, {v}) references a node outside 0..{n}"),
            ));
        }
        edges.push((u, v));
    }
    let graph = Graph::from_edge_list(n, &edges)?;

    let features_path = dir.join("features.tsv");
    let real_features = if features_path.exists() {
        Some(load_real_features(&features_path, &graph)?)
    } else {
        None
    };
    Ok(NodeDataset {
        name: dataset_name(dir),
        graph,
        labels,
        real_features,
    })
}

fn dataset_name(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Writes the canonical layout read by [`load_node_dataset`].
pub fn write_node_dataset(dir: &Path, ds: &NodeDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut edges = String::new();
    for (u, v) in ds.graph.edges() {
        edges.push_str(&format!("{u}\t{v}\n"));
    }
    write_file(&dir.join("edges.tsv"), &edges)?;
    let mut labels = String::new();
    for (v, l) in ds.labels.as_slice().iter().enumerate() {
        match l {
            Some(c) => labels.push_str(&format!("{v}\t{c}\n")),
            None => labels.push_str(&format!("{v}\t-1\n")),
        }
    }
    write_file(&dir.join("labels.tsv"), &labels)?;
    if let Some(f) = &ds.real_features {
        write_tsv_matrix(&dir.join("features.tsv"), &f.values)?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// A TU collection with the optional per-node extras.
#[derive(Debug, Clone, PartialEq)]
pub struct TuDataset {
    pub name: String,
    pub collection: GraphCollection,
    /// Per graph, per local node.
    pub node_labels: Option<Vec<Vec<usize>>>,
    pub node_attributes: Option<Vec<DenseMatrix>>,
}

impl TuDataset {
    /// Node attributes if present, else one-hot node labels, else `None`.
    pub fn real_features(&self) -> Option<Vec<DenseMatrix>> {
        if let Some(a) = &self.node_attributes {
            return Some(a.clone());
        }
        let labels = self.node_labels.as_ref()?;
        let width = labels.iter().flatten().max().map_or(0, |m| m + 1);
        Some(
            labels
                .iter()
                .map(|ls| {
                    let mut m = DenseMatrix::zeros(ls.len(), width);
                    for (i, &l) in ls.iter().enumerate() {
                        m.set(i, l, 1.0);
                    }
                    m
                })
                .collect(),
        )
    }
}

fn tu_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

pub fn load_tudataset(dir: &Path, name: &str) -> Result<GraphCollection> {
    Ok(load_tudataset_full(dir, name)?.collection)
}

pub fn load_tudataset_full(dir: &Path, name: &str) -> Result<TuDataset> {
    let ind_path = tu_path(dir, name, "graph_indicator");
    let text = read_text(&ind_path)?;
    // global node -> (graph, local id)
    let mut owner: Vec<(usize, usize)> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for (line, row) in numbered_lines(&text) {
        let gid: usize = parse_field(&ind_path, line, row, "graph id")?;
        if gid == 0 {
            return Err(Error::parse(&ind_path, line, "graph ids are 1-indexed"));
        }
        let g = gid - 1;
        if g >= sizes.len() {
            sizes.resize(g + 1, 0);
        }
        owner.push((g, sizes[g]));
        sizes[g] += 1;
    }
    let num_graphs = sizes.len();

    let lab_path = tu_path(dir, name, "graph_labels");
    let text = read_text(&lab_path)?;
    let raw: Vec<i64> = numbered_lines(&text)
        .map(|(line, row)| parse_field(&lab_path, line, row, "graph label"))
        .collect::<Result<_>>()?;
    if raw.len() != num_graphs {
        return Err(Error::parse(
            &lab_path,
            raw.len(),
            format!("{} graph labels for {num_graphs} graphs", raw.len()),
        ));
    }
    let distinct: BTreeMap<i64, usize> = raw
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    let labels: Vec<usize> = raw.iter().map(|v| distinct[v]).collect();

    let a_path = tu_path(dir, name, "A");
    let text = read_text(&a_path)?;
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (line, row) in numbered_lines(&text) {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 2 {
            return Err(Error::parse(
                &a_path,
                line,
                format!("{} fields, expected 2", f.len()),
            ));
        }
        let u: usize = parse_field(&a_path, line, f[0], "node id")?;
        let v: usize = parse_field(&a_path, line, f[1], "node id")?;
        for id in [u, v] {
            if id == 0 || id > owner.len() {
                return Err(Error::parse(
                    &a_path,
                    line,
                    format!("node {id} is not listed in the graph indicator"),
                ));
            }
        }
        let (gu, lu) = owner[u - 1];
        let (gv, lv) = owner[v - 1];
        if gu != gv {
            return Err(Error::parse(
                &a_path,
                line,
                format!(
                    "edge ({u}, {v}) crosses graphs: node {u} is in graph {} and node {v} in graph {}",
                    gu + 1,
                    gv + 1
                ),
            ));
        }
        edges[gu].push((lu, lv));
    }
    let graphs = sizes
        .iter()
        .zip(&edges)
        .map(|(&n, e)| Graph::from_edge_list(n, e))
        .collect::<Result<Vec<_>>>()?;

    let nl_path = tu_path(dir, name, "node_labels");
    let node_labels = if nl_path.exists() {
        let text = read_text(&nl_path)?;
        let raw: Vec<i64> = numbered_lines(&text)
            .map(|(line, row)| {
                parse_field(
                    &nl_path,
                    line,
                    row.split(',').next().unwrap_or(""),
                    "node label",
                )
            })
            .collect::<Result<_>>()?;
        if raw.len() != owner.len() {
            return Err(Error::parse(
                &nl_path,
                raw.len(),
                format!("{} node labels for {} nodes", raw.len(), owner.len()),
            ));
        }
        let distinct: BTreeMap<i64, usize> = raw
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let mut per_graph: Vec<Vec<usize>> = sizes.iter().map(|&n| vec![0; n]).collect();
        for (i, v) in raw.iter().enumerate() {
            let (g, l) = owner[i];
            per_graph[g][l] = distinct[v];
        }
        Some(per_graph)
    } else {
        None
    };

    let at_path = tu_path(dir, name, "node_attributes");
    let node_attributes = if at_path.exists() {
        let text = read_text(&at_path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, row) in numbered_lines(&text) {
            let vals = row
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| {
                            Error::parse(&at_path, line, format!("not a finite number: {f:?}"))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            if rows.first().is_some_and(|r| r.len() != vals.len()) {
                return Err(Error::parse(&at_path, line, "inconsistent attribute count"));
            }
            rows.push(vals);
        }
        if rows.len() != owner.len() {
            return Err(Error::parse(
                &at_path,
                rows.len(),
                format!("{} attribute rows for {} nodes", rows.len(), owner.len()),
            ));
        }
        let width = rows.first().map_or(0, Vec::len);
        let mut per_graph: Vec<DenseMatrix> = sizes
            .iter()
            .map(|&n| DenseMatrix::zeros(n, width))
            .collect();
        for (i, r) in rows.iter().enumerate() {
            let (g, l) = owner[i];
            per_graph[g].row_mut(l).copy_from_slice(r);
        }
        Some(per_graph)
    } else {
        None
    };

    Ok(TuDataset {
        name: name.to_string(),
        collection: GraphCollection::new(graphs, labels)?,
        node_labels,
        node_attributes,
    })
}

/// Disjoint train/validation/test index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    fn sorted(mut train: Vec<usize>, mut val: Vec<usize>, mut test: Vec<usize>) -> Self {
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Self { train, val, test }
    }

    pub fn is_disjoint(&self) -> bool {
        let mut all: Vec<usize> = self
            .train
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .copied()
            .collect();
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        all.len() == total
    }
}

/// Takes about `frac` of every class (largest-remainder rounding of the
/// total), shuffling within each class first. Returns `(taken, rest)`.
fn stratified_take(by_class: &[Vec<usize>], frac: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let total: usize = by_class.iter().map(Vec::len).sum();
    let target = (frac * total as f64).round() as usize;
    let exact: Vec<f64> = by_class.iter().map(|c| frac * c.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..by_class.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut remaining = target.saturating_sub(quota.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            remaining -= 1;
        }
    }
    let mut taken = Vec::with_capacity(target);
    let mut rest = Vec::with_capacity(total - target);
    for (members, &q) in by_class.iter().zip(&quota) {
        let mut m = members.clone();
        m.sort_unstable();
        rng.shuffle(&mut m);
        taken.extend_from_slice(&m[..q]);
        rest.extend_from_slice(&m[q..]);
    }
    (taken, rest)
}

/// `per_class` training nodes from every class, `val_size` validation nodes
/// drawn from the remaining labeled nodes, and the rest as test.
pub fn split_per_class(
    labels: &NodeLabels,
    per_class: usize,
    val_size: usize,
    rng: &Rng,
) -> Result<SplitSpec> {
    let mut rng = rng.split("split_per_class");
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for (class, members) in labels.by_class().into_iter().enumerate() {
        if members.len() < per_class {
            return Err(Error::ClassTooSmall {
                class,
                available: members.len(),
                required: per_class,
            });
        }
        let mut m = members;
        rng.shuffle(&mut m);
        train.extend_from_slice(&m[..per_class]);
        rest.extend_from_slice(&m[per_class..]);
    }
    rest.sort_unstable();
    rng.shuffle(&mut rest);
    let cut = val_size.min(rest.len());
    let test = rest.split_off(cut);
    Ok(SplitSpec::sorted(train, rest, test))
}

/// Class-stratified `train_frac` of labeled nodes for training, the rest for
/// testing; validation is left empty (see [`carve_validation`]).
pub fn split_fraction(labels: &NodeLabels, train_frac: f64, rng: &Rng) -> Result<SplitSpec> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_frac} must lie strictly between 0 and 1"
        )));
    }
    let mut rng = rng.split("split_fraction");
    let (train, test) = stratified_take(&labels.by_class(), train_frac, &mut rng);
    Ok(SplitSpec::sorted(train, Vec::new(), test))
}

/// Moves a class-stratified `frac` of the training items into validation.
pub fn carve_validation(
    split: &SplitSpec,
    class_of: impl Fn(usize) -> usize,
    frac: f64,
    rng: &Rng,
) -> Result<SplitSpec> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {frac} must lie in [0, 1)"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = Vec::new();
    for &i in &split.train {
        let c = class_of(i);
        if c >= by_class.len() {
            by_class.resize(c + 1, Vec::new());
        }
        by_class[c].push(i);
    }
    let mut rng = rng.split("carve_validation");
    let (mut val, train) = stratified_take(&by_class, frac, &mut rng);
    val.extend_from_slice(&split.val);
    Ok(SplitSpec::sorted(train, val, split.test.clone()))
}

/// `k` folds; fold `i` tests on the `i`-th part and trains on the rest.
/// Each class is shuffled and dealt round-robin, continuing across classes,
/// so fold sizes differ by at most one and every fold is stratified.
pub fn stratified_kfold(graph_labels: &[usize], k: usize, rng: &Rng) -> Result<Vec<SplitSpec>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    let num_classes = graph_labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &c) in graph_labels.iter().enumerate() {
        by_class[c].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                available: members.len(),
                required: k,
            });
        }
    }
    let mut rng = rng.split("kfold");
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next = 0;
    for members in &mut by_class {
        rng.shuffle(members);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let train = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != f)
                .flat_map(|(_, items)| items.iter().copied())
                .collect();
            SplitSpec::sorted(train, Vec::new(), folds[f].clone())
        })
        .collect())
}
