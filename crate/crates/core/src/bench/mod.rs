//! Trials (features → training → evaluation over several seeds), grid
//! search, result tables and run manifests.

mod manifest;
mod reproduce;
mod table;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rayon::prelude::*;

pub use manifest::Manifest;
pub use reproduce::{reproduce, BenchTable, ReproduceOptions, Reproduction};
pub use table::{aggregate, emit_table, format_cell, ResultKey, ResultsTable, TableFormat};

use crate::datasets::{
    carve_validation, split_fraction, split_per_class, stratified_kfold, NodeDataset, SplitSpec,
    TuDataset,
};
use crate::deepwalk::WalkParams;
use crate::error::{Error, Result};
use crate::features::{
    build_collection_features, build_features, FeatureKind, FeatureSpec, NumericSettings,
};
use crate::gnn::{fit_graph, fit_node, ModelConfig, Readout, SageModel};
use crate::graph::NodeLabels;
use crate::numerics::{DenseMatrix, Rng};

/// Feature width used when none is given.
pub const DEFAULT_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum SplitConfig {
    /// Fixed number of training nodes per class plus a validation set.
    PerClass { per_class: usize, val_size: usize },
    /// Stratified training fraction; `val_frac` of the training part is held
    /// out for epoch selection.
    Fraction { train_frac: f64, val_frac: f64 },
    /// Stratified k-fold over graphs with an inner validation holdout.
    KFold { folds: usize, val_frac: f64 },
}

impl SplitConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SplitConfig::PerClass { .. } => "per-class",
            SplitConfig::Fraction { .. } => "fraction",
            SplitConfig::KFold { .. } => "kfold",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub dataset: String,
    pub feature: FeatureSpec,
    pub model: ModelConfig,
    pub split: SplitConfig,
    /// Seeds the data split; fixed across the runs of a trial.
    pub split_seed: u64,
    /// One run per seed; each seeds model initialization, sampling, dropout
    /// and seeded features.
    pub seeds: Vec<u64>,
    pub numerics: NumericSettings,
}

impl TrialConfig {
    pub fn node_defaults(dataset: &str, kind: FeatureKind) -> Self {
        Self {
            dataset: dataset.to_string(),
            feature: FeatureSpec::with_defaults(kind, DEFAULT_DIM),
            model: ModelConfig::node_defaults(),
            split: SplitConfig::PerClass {
                per_class: 20,
                val_size: 500,
            },
            split_seed: 0,
            seeds: (0..5).collect(),
            numerics: NumericSettings::default(),
        }
    }

    pub fn graph_defaults(dataset: &str, kind: FeatureKind) -> Self {
        Self {
            model: ModelConfig::graph_defaults(),
            split: SplitConfig::KFold {
                folds: 10,
                val_frac: 0.1,
            },
            seeds: (0..3).collect(),
            ..Self::node_defaults(dataset, kind)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "a trial needs at least one seed".into(),
            ));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(Error::InvalidArgument(format!(
                "seeds repeat: {:?}",
                self.seeds
            )));
        }
        self.model.validate()?;
        self.feature.validate()
    }

    /// Every setting as `key = value` pairs; [`TrialConfig::from_manifest`]
    /// reads them back.
    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.set("dataset", &self.dataset);
        m.set("kind", self.feature.kind());
        match &self.feature {
            FeatureSpec::Random { dim, .. }
            | FeatureSpec::Shared { dim }
            | FeatureSpec::Pagerank { dim } => m.set("dim", dim),
            FeatureSpec::Deepwalk { dim, walk, .. } => {
                m.set("dim", dim);
                m.set("walk-length", walk.walk_len);
                m.set("walks-per-node", walk.walks_per_node);
                m.set("window", walk.window);
                m.set("negatives", walk.negatives);
                m.set("walk-epochs", walk.epochs);
                m.set("walk-lr", format!("{:?}", walk.learning_rate));
            }
            FeatureSpec::Eigen { k } => m.set("k", k),
            FeatureSpec::Degree { cap } => m.set(
                "degree-cap",
                cap.map_or("none".to_string(), |c| c.to_string()),
            ),
            FeatureSpec::DegreePlus { bucket_base } => m.set("bucket-base", bucket_base),
            FeatureSpec::OneHot | FeatureSpec::Real => {}
        }
        let c = &self.model;
        m.set("aggr", c.aggregator);
        m.set("readout", c.readout);
        m.set("layers", c.num_layers);
        m.set("hidden", c.hidden_dim);
        m.set("lr", format!("{:?}", c.learning_rate));
        m.set("epochs", c.epochs);
        m.set("sample-size", c.sample_size);
        m.set("dropout", format!("{:?}", c.dropout));
        m.set("batch-size", c.batch_size);
        m.set("split", self.split.name());
        match &self.split {
            SplitConfig::PerClass {
                per_class,
                val_size,
            } => {
                m.set("per-class", per_class);
                m.set("val-size", val_size);
            }
            SplitConfig::Fraction {
                train_frac,
                val_frac,
            } => {
                m.set("train-frac", format!("{train_frac:?}"));
                m.set("val-frac", format!("{val_frac:?}"));
            }
            SplitConfig::KFold { folds, val_frac } => {
                m.set("folds", folds);
                m.set("val-frac", format!("{val_frac:?}"));
            }
        }
        m.set("seed", self.split_seed);
        m.set(
            "run-seeds",
            self.seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        let n = &self.numerics;
        m.set("eigen-tol", format!("{:?}", n.eigen.tol));
        m.set("eigen-max-iter", n.eigen.max_iter);
        m.set("pagerank-damping", format!("{:?}", n.pagerank.damping));
        m.set("pagerank-tol", format!("{:?}", n.pagerank.tol));
        m.set("pagerank-max-iter", n.pagerank.max_iter);
        m
    }

    /// Applies the keys present in `m` on top of `base`. `seeds = N` expands
    /// to `N` consecutive run seeds starting at `seed`; `run-seeds` lists them
    /// explicitly and wins.
    pub fn from_manifest(m: &Manifest, base: &TrialConfig) -> Result<Self> {
        let mut cfg = base.clone();
        if let Some(d) = m.get("dataset") {
            cfg.dataset = d.to_string();
        }

        let kind: FeatureKind = m.parsed("kind")?.unwrap_or(cfg.feature.kind());
        let dim: Option<usize> = m.parsed("dim")?;
        let k: Option<usize> = m.parsed("k")?;
        if kind != cfg.feature.kind() {
            cfg.feature =
                FeatureSpec::with_defaults(kind, cfg.feature.dim().unwrap_or(DEFAULT_DIM));
        }
        match &mut cfg.feature {
            FeatureSpec::Eigen { k: kk } => *kk = k.or(dim).unwrap_or(*kk),
            FeatureSpec::Random { dim: d, .. }
            | FeatureSpec::Shared { dim: d }
            | FeatureSpec::Pagerank { dim: d } => *d = dim.unwrap_or(*d),
            FeatureSpec::Deepwalk { dim: d, walk, .. } => {
                *d = dim.unwrap_or(*d);
                apply_walk(m, walk)?;
            }
            FeatureSpec::Degree { cap } => {
                if let Some(v) = m.get("degree-cap") {
                    *cap = match v {
                        "none" => None,
                        other => Some(other.parse().map_err(|_| {
                            Error::InvalidArgument(format!(
                                "degree-cap = {other}: expected a count or none"
                            ))
                        })?),
                    };
                }
            }
            FeatureSpec::DegreePlus { bucket_base } => {
                *bucket_base = m.parsed("bucket-base")?.unwrap_or(*bucket_base)
            }
            FeatureSpec::OneHot | FeatureSpec::Real => {}
        }

        let c = &mut cfg.model;
        c.aggregator = m.parsed("aggr")?.unwrap_or(c.aggregator);
        c.readout = m.parsed("readout")?.unwrap_or(c.readout);
        c.num_layers = m.parsed("layers")?.unwrap_or(c.num_layers);
        c.hidden_dim = m.parsed("hidden")?.unwrap_or(c.hidden_dim);
        c.learning_rate = m.parsed("lr")?.unwrap_or(c.learning_rate);
        c.epochs = m.parsed("epochs")?.unwrap_or(c.epochs);
        c.sample_size = m.parsed("sample-size")?.unwrap_or(c.sample_size);
        c.dropout = m.parsed("dropout")?.unwrap_or(c.dropout);
        c.batch_size = m.parsed("batch-size")?.unwrap_or(c.batch_size);

        let scheme = m.get("split").unwrap_or(cfg.split.name()).to_string();
        let val_frac_default = match cfg.split {
            SplitConfig::Fraction { val_frac, .. } | SplitConfig::KFold { val_frac, .. } => {
                val_frac
            }
            SplitConfig::PerClass { .. } => 0.1,
        };
        let val_frac = m.parsed("val-frac")?.unwrap_or(val_frac_default);
        cfg.split = match scheme.as_str() {
            "per-class" => {
                let (pc, vs) = match cfg.split {
                    SplitConfig::PerClass {
                        per_class,
                        val_size,
                    } => (per_class, val_size),
                    _ => (20, 500),
                };
                SplitConfig::PerClass {
                    per_class: m.parsed("per-class")?.unwrap_or(pc),
                    val_size: m.parsed("val-size")?.unwrap_or(vs),
                }
            }
            "fraction" => {
                let tf = match cfg.split {
                    SplitConfig::Fraction { train_frac, .. } => train_frac,
                    _ => 0.8,
                };
                SplitConfig::Fraction {
                    train_frac: m.parsed("train-frac")?.unwrap_or(tf),
                    val_frac,
                }
            }
            "kfold" => {
                let f = match cfg.split {
                    SplitConfig::KFold { folds, .. } => folds,
                    _ => 10,
                };
                SplitConfig::KFold {
                    folds: m.parsed("folds")?.unwrap_or(f),
                    val_frac,
                }
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown split {other:?} (per-class|fraction|kfold)"
                )))
            }
        };

        cfg.split_seed = m.parsed("seed")?.unwrap_or(cfg.split_seed);
        if let Some(list) = m.get("run-seeds") {
            cfg.seeds = list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim().parse().map_err(|_| {
                        Error::InvalidArgument(format!("run-seeds = {list}: bad seed {s:?}"))
                    })
                })
                .collect::<Result<_>>()?;
        } else if let Some(count) = m.parsed::<u64>("seeds")? {
            cfg.seeds = (cfg.split_seed..cfg.split_seed + count).collect();
        }

        let n = &mut cfg.numerics;
        n.eigen.tol = m.parsed("eigen-tol")?.unwrap_or(n.eigen.tol);
        n.eigen.max_iter = m.parsed("eigen-max-iter")?.unwrap_or(n.eigen.max_iter);
        n.pagerank.damping = m.parsed("pagerank-damping")?.unwrap_or(n.pagerank.damping);
        n.pagerank.tol = m.parsed("pagerank-tol")?.unwrap_or(n.pagerank.tol);
        n.pagerank.max_iter = m
            .parsed("pagerank-max-iter")?
            .unwrap_or(n.pagerank.max_iter);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Keys understood by [`TrialConfig::from_manifest`].
    pub const KEYS: &'static [&'static str] = &[
        "dataset",
        "kind",
        "dim",
        "k",
        "degree-cap",
        "bucket-base",
        "walk-length",
        "walks-per-node",
        "window",
        "negatives",
        "walk-epochs",
        "walk-lr",
        "aggr",
        "readout",
        "layers",
        "hidden",
        "lr",
        "epochs",
        "sample-size",
        "dropout",
        "batch-size",
        "split",
        "per-class",
        "val-size",
        "train-frac",
        "val-frac",
        "folds",
        "seed",
        "seeds",
        "run-seeds",
        "eigen-tol",
        "eigen-max-iter",
        "pagerank-damping",
        "pagerank-tol",
        "pagerank-max-iter",
    ];
}

fn apply_walk(m: &Manifest, w: &mut WalkParams) -> Result<()> {
    w.walk_len = m.parsed("walk-length")?.unwrap_or(w.walk_len);
    w.walks_per_node = m.parsed("walks-per-node")?.unwrap_or(w.walks_per_node);
    w.window = m.parsed("window")?.unwrap_or(w.window);
    w.negatives = m.parsed("negatives")?.unwrap_or(w.negatives);
    w.epochs = m.parsed("walk-epochs")?.unwrap_or(w.epochs);
    w.learning_rate = m.parsed("walk-lr")?.unwrap_or(w.learning_rate);
    Ok(())
}

/// Outcome of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    /// Percent.
    pub test_acc: f64,
    /// Percent.
    pub val_acc: f64,
    pub best_epoch: usize,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Test accuracy of every run, in percent, in run order.
    pub accuracies: Vec<f64>,
    pub val_accuracies: Vec<f64>,
    pub best_epochs: Vec<usize>,
    pub diverged_runs: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub wall_time: Duration,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    // `sum / n` of equal values can round away from the value itself
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl TrialResult {
    pub fn from_runs(runs: &[RunOutcome], wall_time: Duration) -> Self {
        let accuracies: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
        let (mean, std) = mean_std(&accuracies);
        Self {
            val_accuracies: runs.iter().map(|r| r.val_acc).collect(),
            best_epochs: runs.iter().map(|r| r.best_epoch).collect(),
            diverged_runs: runs.iter().filter(|r| r.diverged).count(),
            accuracies,
            mean,
            std,
            wall_time,
        }
    }

    pub fn mean_val(&self) -> f64 {
        mean_std(&self.val_accuracies).0
    }

    /// `mean±std` with one decimal.
    pub fn cell(&self) -> String {
        format_cell(self.mean, self.std)
    }
}

/// Memoizes features that do not depend on the run seed, so grid points and
/// runs sharing a recipe build it once.
#[derive(Debug, Default)]
pub struct FeatureCache {
    node: Mutex<HashMap<String, Arc<DenseMatrix>>>,
    graph: Mutex<HashMap<String, Arc<Vec<DenseMatrix>>>>,
}

impl FeatureCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn node_features(
        &self,
        ds: &NodeDataset,
        spec: &FeatureSpec,
        numerics: &NumericSettings,
    ) -> Result<Arc<DenseMatrix>> {
        let key = format!("{}|{spec:?}|{numerics:?}", ds.name);
        let cacheable = !spec.kind().is_seeded();
        if cacheable {
            if let Some(hit) = self.node.lock().expect("cache lock").get(&key) {
                return Ok(hit.clone());
            }
        }
        let x = Arc::new(match spec {
            FeatureSpec::Real => ds
                .real_features
                .as_ref()
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("dataset {} has no real features", ds.name))
                })?
                .values
                .clone(),
            other => build_features(&ds.graph, other, numerics)?.values,
        });
        if cacheable {
            self.node.lock().expect("cache lock").insert(key, x.clone());
        }
        Ok(x)
    }

    fn graph_features(
        &self,
        ds: &TuDataset,
        spec: &FeatureSpec,
        numerics: &NumericSettings,
    ) -> Result<Arc<Vec<DenseMatrix>>> {
        let key = format!("{}|{spec:?}|{numerics:?}", ds.name);
        let cacheable = !spec.kind().is_seeded();
        if cacheable {
            if let Some(hit) = self.graph.lock().expect("cache lock").get(&key) {
                return Ok(hit.clone());
            }
        }
        let xs = Arc::new(match spec {
            FeatureSpec::Real => ds.real_features().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "dataset {} has no node labels or attributes",
                    ds.name
                ))
            })?,
            other => build_collection_features(&ds.collection, other, numerics)?
                .into_iter()
                .map(|f| f.values)
                .collect(),
        });
        if cacheable {
            self.graph
                .lock()
                .expect("cache lock")
                .insert(key, xs.clone());
        }
        Ok(xs)
    }
}

/// Train/validation/test split for a node trial.
pub fn node_split(cfg: &TrialConfig, labels: &NodeLabels) -> Result<SplitSpec> {
    let rng = Rng::new(cfg.split_seed);
    match cfg.split {
        SplitConfig::PerClass {
            per_class,
            val_size,
        } => split_per_class(labels, per_class, val_size, &rng),
        SplitConfig::Fraction {
            train_frac,
            val_frac,
        } => {
            let s = split_fraction(labels, train_frac, &rng)?;
            if val_frac > 0.0 {
                carve_validation(
                    &s,
                    |v| labels.get(v).expect("split holds labeled nodes"),
                    val_frac,
                    &rng,
                )
            } else {
                Ok(s)
            }
        }
        SplitConfig::KFold { .. } => Err(Error::InvalidArgument(
            "k-fold splits apply to graph collections".into(),
        )),
    }
}

/// Outer folds with their inner validation holdouts.
pub fn graph_folds(cfg: &TrialConfig, labels: &[usize]) -> Result<Vec<SplitSpec>> {
    let SplitConfig::KFold { folds, val_frac } = cfg.split else {
        return Err(Error::InvalidArgument(
            "graph trials need a k-fold split".into(),
        ));
    };
    let rng = Rng::new(cfg.split_seed);
    stratified_kfold(labels, folds, &rng)?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if val_frac > 0.0 {
                carve_validation(
                    f,
                    |g| labels[g],
                    val_frac,
                    &rng.split_index("fold", i as u64),
                )
            } else {
                Ok(f.clone())
            }
        })
        .collect()
}

pub fn run_node_trial(cfg: &TrialConfig, ds: &NodeDataset) -> Result<TrialResult> {
    run_node_trial_cached(cfg, ds, &FeatureCache::new())
}

pub fn run_node_trial_cached(
    cfg: &TrialConfig,
    ds: &NodeDataset,
    cache: &FeatureCache,
) -> Result<TrialResult> {
    let start = Instant::now();
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let split = node_split(cfg, &ds.labels).map_err(|e| e.in_stage("split"))?;
    let mut model_cfg = cfg.model.clone();
    model_cfg.readout = Readout::None;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let spec = cfg.feature.reseeded(seed);
            let x = cache
                .node_features(ds, &spec, &cfg.numerics)
                .map_err(|e| e.in_stage(format!("features ({})", spec.kind())))?;
            let root = Rng::new(seed);
            let mut model = SageModel::new(
                x.cols(),
                ds.labels.num_classes(),
                model_cfg.clone(),
                &mut root.split("model"),
            )
            .map_err(|e| e.in_stage("model"))?;
            let out = fit_node(
                &mut model,
                &ds.graph,
                &x,
                &ds.labels,
                &split.train,
                &split.val,
                &split.test,
                &mut root.split("train"),
            )
            .map_err(|e| e.in_stage("train"))?;
            Ok(RunOutcome {
                test_acc: 100.0 * out.test_acc,
                val_acc: 100.0 * out.best_val_acc,
                best_epoch: out.best_epoch,
                diverged: out.diverged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialResult::from_runs(&runs, start.elapsed()))
}

/// Every `(seed, fold)` pair is one run; results are listed seed-major.
pub fn run_graph_trial(cfg: &TrialConfig, ds: &TuDataset) -> Result<TrialResult> {
    run_graph_trial_cached(cfg, ds, &FeatureCache::new())
}

pub fn run_graph_trial_cached(
    cfg: &TrialConfig,
    ds: &TuDataset,
    cache: &FeatureCache,
) -> Result<TrialResult> {
    let start = Instant::now();
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    if cfg.model.readout == Readout::None {
        return Err(
            Error::InvalidArgument("graph trials need a mean or sum readout".into())
                .in_stage("config"),
        );
    }
    let coll = &ds.collection;
    let folds = graph_folds(cfg, coll.labels()).map_err(|e| e.in_stage("split"))?;
    let jobs: Vec<(u64, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| (0..folds.len()).map(move |f| (s, f)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(seed, f)| {
            let spec = cfg.feature.reseeded(seed);
            let xs = cache
                .graph_features(ds, &spec, &cfg.numerics)
                .map_err(|e| e.in_stage(format!("features ({})", spec.kind())))?;
            let root = Rng::new(seed).split_index("fold", f as u64);
            let mut model = SageModel::new(
                xs[0].cols(),
                coll.num_classes(),
                cfg.model.clone(),
                &mut root.split("model"),
            )
            .map_err(|e| e.in_stage("model"))?;
            let split = &folds[f];
            let out = fit_graph(
                &mut model,
                coll.graphs(),
                &xs,
                coll.labels(),
                &split.train,
                &split.val,
                &split.test,
                &mut root.split("train"),
            )
            .map_err(|e| e.in_stage(format!("train (fold {f})")))?;
            Ok(RunOutcome {
                test_acc: 100.0 * out.test_acc,
                val_acc: 100.0 * out.best_val_acc,
                best_epoch: out.best_epoch,
                diverged: out.diverged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialResult::from_runs(&runs, start.elapsed()))
}

/// Axes of an exhaustive search, expanded in the declared order
/// (learning rate outermost, depth innermost).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    /// Widths for `random`, `deepwalk`, `shared` and `pagerank`.
    pub dims: Vec<usize>,
    /// Widths for `eigen`.
    pub eigen_ks: Vec<usize>,
    pub depths: Vec<usize>,
}

impl GridSpec {
    /// The single point `base` already describes.
    pub fn single(base: &TrialConfig) -> Self {
        let dim = base.feature.dim().unwrap_or(DEFAULT_DIM);
        Self {
            learning_rates: vec![base.model.learning_rate],
            epochs: vec![base.model.epochs],
            sample_sizes: vec![base.model.sample_size],
            dims: vec![dim],
            eigen_ks: vec![dim],
            depths: vec![base.model.num_layers],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("learning_rates", self.learning_rates.is_empty()),
            ("epochs", self.epochs.is_empty()),
            ("sample_sizes", self.sample_sizes.is_empty()),
            ("dims", self.dims.is_empty()),
            ("eigen_ks", self.eigen_ks.is_empty()),
            ("depths", self.depths.is_empty()),
        ];
        match empty.iter().find(|(_, e)| *e) {
            Some((axis, _)) => Err(Error::InvalidArgument(format!("grid axis {axis} is empty"))),
            None => Ok(()),
        }
    }

    /// Distinct configurations in axis order. Axes that do not apply to the
    /// base feature kind collapse.
    pub fn points(&self, base: &TrialConfig) -> Vec<TrialConfig> {
        let mut out: Vec<TrialConfig> = Vec::new();
        for &lr in &self.learning_rates {
            for &epochs in &self.epochs {
                for &s in &self.sample_sizes {
                    for &dim in &self.dims {
                        for &k in &self.eigen_ks {
                            for &depth in &self.depths {
                                let mut c = base.clone();
                                c.model.learning_rate = lr;
                                c.model.epochs = epochs;
                                c.model.sample_size = s;
                                c.model.num_layers = depth;
                                c.feature = match c.feature {
                                    FeatureSpec::Eigen { .. } => c.feature.with_dim(k),
                                    ref other => other.with_dim(dim),
                                };
                                if !out.contains(&c) {
                                    out.push(c);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub config: TrialConfig,
    /// Mean validation accuracy in percent; `-inf` for diverged points.
    pub score: f64,
    pub result: TrialResult,
}

impl GridPoint {
    pub fn diverged(&self) -> bool {
        self.result.diverged_runs > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub points: Vec<GridPoint>,
    pub best: usize,
}

impl GridOutcome {
    pub fn best_point(&self) -> &GridPoint {
        &self.points[self.best]
    }

    pub fn best_score(&self) -> f64 {
        self.best_point().score
    }
}

/// Evaluates every grid point and picks the highest mean validation
/// accuracy; the earliest point wins ties. A point with any diverged run
/// scores `-inf`, so it is chosen only if every point diverged.
pub fn grid_search<F>(grid: &GridSpec, base: &TrialConfig, evaluate: F) -> Result<GridOutcome>
where
    F: Fn(&TrialConfig) -> Result<TrialResult> + Sync,
{
    grid.validate()?;
    let configs = grid.points(base);
    let points = configs
        .into_par_iter()
        .map(|config| {
            let result = evaluate(&config)?;
            let score = if result.diverged_runs > 0 {
                f64::NEG_INFINITY
            } else {
                result.mean_val()
            };
            Ok(GridPoint {
                config,
                score,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.score > points[best].score {
            best = i;
        }
    }
    Ok(GridOutcome { points, best })
}
