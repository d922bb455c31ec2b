//! One-call regeneration of the three benchmark tables from a data root.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::datasets::{load_node_dataset, load_tudataset_full};
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::gnn::{Aggregator, Readout};

use super::{
    aggregate, grid_search, run_graph_trial_cached, run_node_trial_cached, FeatureCache, GridSpec,
    Manifest, ResultKey, ResultsTable, SplitConfig, TrialConfig, TrialResult, DEFAULT_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchTable {
    /// Citation networks, node classification with per-class splits.
    Table1,
    /// Air-traffic networks, node classification with 80% training nodes.
    Table2,
    /// TU graph classification with 10-fold cross-validation.
    Table3,
}

impl FromStr for BenchTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(BenchTable::Table1),
            "table2" => Ok(BenchTable::Table2),
            "table3" => Ok(BenchTable::Table3),
            _ => Err(Error::InvalidArgument(format!(
                "unknown table {s:?} (table1|table2|table3)"
            ))),
        }
    }
}

impl fmt::Display for BenchTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchTable::Table1 => "table1",
            BenchTable::Table2 => "table2",
            BenchTable::Table3 => "table3",
        })
    }
}

impl BenchTable {
    /// Directory names under the data root.
    pub fn datasets(self) -> &'static [&'static str] {
        match self {
            BenchTable::Table1 => &["cora", "citeseer", "pubmed"],
            BenchTable::Table2 => &["brazil-air", "europe-air", "usa-air"],
            BenchTable::Table3 => &["MUTAG", "PROTEINS", "IMDB-BINARY", "IMDB-MULTI"],
        }
    }

    pub fn features(self) -> Vec<FeatureKind> {
        FeatureKind::ALL
            .into_iter()
            .filter(|k| self == BenchTable::Table1 || *k != FeatureKind::Real)
            .collect()
    }

    pub fn is_graph_task(self) -> bool {
        self == BenchTable::Table3
    }

    pub fn default_grid(self) -> GridSpec {
        match self {
            BenchTable::Table1 | BenchTable::Table2 => GridSpec {
                learning_rates: vec![0.01, 0.005],
                epochs: vec![if self == BenchTable::Table1 { 200 } else { 300 }],
                sample_sizes: vec![0, 10],
                dims: vec![DEFAULT_DIM],
                eigen_ks: vec![DEFAULT_DIM],
                depths: vec![2],
            },
            BenchTable::Table3 => GridSpec {
                learning_rates: vec![0.01, 0.001],
                epochs: vec![100],
                sample_sizes: vec![0],
                dims: vec![100, 200, 300, 400, 500],
                eigen_ks: vec![100, 200, 300, 400, 500],
                depths: vec![3],
            },
        }
    }

    /// Trial template for one cell before grid search.
    pub fn base_config(
        self,
        dataset: &str,
        kind: FeatureKind,
        aggregator: Aggregator,
        opts: &ReproduceOptions,
    ) -> TrialConfig {
        let mut cfg = if self.is_graph_task() {
            TrialConfig::graph_defaults(dataset, kind)
        } else {
            TrialConfig::node_defaults(dataset, kind)
        };
        cfg.model.aggregator = aggregator;
        if self.is_graph_task() {
            cfg.model.readout = match aggregator {
                Aggregator::Mean => Readout::Mean,
                Aggregator::Sum => Readout::Sum,
            };
            cfg.split = SplitConfig::KFold {
                folds: opts.folds,
                val_frac: 0.1,
            };
        } else if self == BenchTable::Table2 {
            cfg.split = SplitConfig::Fraction {
                train_frac: 0.8,
                val_frac: 0.1,
            };
        }
        let runs = opts
            .seeds
            .unwrap_or(if self.is_graph_task() { 3 } else { 5 });
        cfg.split_seed = opts.seed;
        cfg.seeds = (opts.seed..opts.seed + runs as u64).collect();
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    pub data_root: PathBuf,
    pub seed: u64,
    /// Runs per cell; 5 for node tables and 3 for the graph table if unset.
    pub seeds: Option<usize>,
    pub folds: usize,
    /// Search grid; the table's default if unset.
    pub grid: Option<GridSpec>,
    /// Restrict to these datasets.
    pub datasets: Option<Vec<String>>,
    /// Restrict to these feature kinds.
    pub features: Option<Vec<FeatureKind>>,
    pub aggregators: Vec<Aggregator>,
}

impl ReproduceOptions {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        Self {
            data_root: data_root.into(),
            seed: 0,
            seeds: None,
            folds: 10,
            grid: None,
            datasets: None,
            features: None,
            aggregators: vec![Aggregator::Mean, Aggregator::Sum],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reproduction {
    pub table: ResultsTable,
    /// Effective settings plus the configuration chosen for every cell.
    pub manifest: Manifest,
    pub selected: Vec<(ResultKey, TrialConfig)>,
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f64(items: &[f64]) -> String {
    items
        .iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn reproduce(table: BenchTable, opts: &ReproduceOptions) -> Result<Reproduction> {
    let grid = opts.grid.clone().unwrap_or_else(|| table.default_grid());
    grid.validate()?;
    let datasets: Vec<String> = match &opts.datasets {
        Some(d) => d.clone(),
        None => table.datasets().iter().map(|s| s.to_string()).collect(),
    };
    let features = opts.features.clone().unwrap_or_else(|| table.features());

    let mut manifest = Manifest::new();
    manifest.set("table", table);
    manifest.set("data-root", opts.data_root.display());
    manifest.set("datasets", join(&datasets));
    manifest.set("kinds", join(&features));
    manifest.set("aggrs", join(&opts.aggregators));
    manifest.set("seed", opts.seed);
    if let Some(s) = opts.seeds {
        manifest.set("seeds", s);
    }
    if table.is_graph_task() {
        manifest.set("folds", opts.folds);
    }
    manifest.set("lr", join_f64(&grid.learning_rates));
    manifest.set("epochs", join(&grid.epochs));
    manifest.set("sample-size", join(&grid.sample_sizes));
    manifest.set("dim", join(&grid.dims));
    manifest.set("k", join(&grid.eigen_ks));
    manifest.set("layers", join(&grid.depths));

    let mut results: Vec<(ResultKey, TrialResult)> = Vec::new();
    let mut selected = Vec::new();
    for name in &datasets {
        let dir = opts.data_root.join(name);
        let cells: Vec<(Aggregator, FeatureKind)> = opts
            .aggregators
            .iter()
            .flat_map(|&a| features.iter().map(move |&f| (a, f)))
            .collect();
        let cache = FeatureCache::new();
        let outcomes = if table.is_graph_task() {
            let ds =
                load_tudataset_full(&dir, name).map_err(|e| e.in_stage(format!("load {name}")))?;
            let cells: Vec<_> = cells
                .into_iter()
                .filter(|&(_, f)| f != FeatureKind::Real || ds.real_features().is_some())
                .collect();
            cells
                .par_iter()
                .map(|&(a, f)| {
                    let base = table.base_config(name, f, a, opts);
                    let out =
                        grid_search(&grid, &base, |c| run_graph_trial_cached(c, &ds, &cache))?;
                    Ok(((a, f), out))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            let ds = load_node_dataset(&dir).map_err(|e| e.in_stage(format!("load {name}")))?;
            let cells: Vec<_> = cells
                .into_iter()
                .filter(|&(_, f)| f != FeatureKind::Real || ds.real_features.is_some())
                .collect();
            cells
                .par_iter()
                .map(|&(a, f)| {
                    let base = table.base_config(name, f, a, opts);
                    let out = grid_search(&grid, &base, |c| run_node_trial_cached(c, &ds, &cache))?;
                    Ok(((a, f), out))
                })
                .collect::<Result<Vec<_>>>()?
        };
        for ((aggregator, feature), out) in outcomes {
            let key = ResultKey {
                aggregator,
                feature,
                dataset: name.clone(),
            };
            let best = out.best_point();
            let c = &best.config;
            let mut choice = format!(
                "lr={:?} epochs={} sample-size={} layers={}",
                c.model.learning_rate, c.model.epochs, c.model.sample_size, c.model.num_layers
            );
            if let Some(d) = c.feature.dim() {
                choice.push_str(&format!(" dim={d}"));
            }
            manifest.set(&format!("selected.{name}.{aggregator}.{feature}"), choice);
            selected.push((key.clone(), best.config.clone()));
            results.push((key, best.result.clone()));
        }
    }
    Ok(Reproduction {
        table: aggregate(results)?,
        manifest,
        selected,
    })
}
