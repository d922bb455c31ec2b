//! Command-line front end.
//!
//! Every subcommand accepts `--config FILE` with `key = value` lines using
//! the long flag names; flags given on the command line win. Runs that take
//! `--out` also write `manifest.txt`, which can be fed back through
//! `--config` to repeat the run.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    aggregate, emit_table, grid_search, reproduce, run_graph_trial, run_node_trial, BenchTable,
    GridSpec, Manifest, ReproduceOptions, ResultKey, TableFormat, TrialConfig, TrialResult,
};
use crate::datasets::{load_node_dataset, load_tudataset_full, NodeDataset, TuDataset};
use crate::error::Error;
use crate::features::{build_features, write_tsv_matrix, FeatureKind};
use crate::gnn::Aggregator;

/// Environment variable consulted when `--data-root` is absent.
pub const DATA_ROOT_ENV: &str = "NODEFEAT_DATA_ROOT";

#[derive(Debug, Parser)]
#[command(
    name = "nodefeat",
    version,
    about = "Artificial node features and GraphSAGE benchmarks"
)]
struct Cli {
    /// `key = value` settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print size and degree statistics of a dataset directory.
    Inspect {
        #[arg(long)]
        dataset: PathBuf,
        /// TU dataset name; detected from `*_A.txt` if omitted.
        #[arg(long)]
        name: Option<String>,
    },
    /// Build one feature matrix and write it as TSV.
    Features(TrialArgs),
    /// Node classification trial over several seeds.
    TrainNode(TrialArgs),
    /// Graph classification trial with k-fold cross-validation.
    TrainGraph(TrialArgs),
    /// Exhaustive search; list-valued flags (`--lr 0.01,0.005`) span the grid.
    Grid(GridArgs),
    /// Regenerate one of the benchmark tables.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args, Default)]
struct TrialArgs {
    /// Dataset directory (or a name under --data-root).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_root: Option<String>,
    /// TU dataset name (graph tasks).
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long, value_parser = ["mean", "sum"])]
    aggr: Option<String>,
    #[arg(long, value_parser = ["mean", "sum"])]
    readout: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    bucket_base: Option<String>,
    #[arg(long)]
    degree_cap: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Number of runs, seeded `seed, seed+1, ...`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    sample_size: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    dropout: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long, value_parser = ["per-class", "fraction", "kfold"])]
    split: Option<String>,
    #[arg(long)]
    per_class: Option<String>,
    #[arg(long)]
    val_size: Option<String>,
    #[arg(long)]
    train_frac: Option<String>,
    #[arg(long)]
    val_frac: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "markdown"])]
    format: Option<String>,
}

macro_rules! collect_flags {
    ($src:expr, $m:ident, $($field:ident => $key:literal),* $(,)?) => {
        $(if let Some(v) = &$src.$field { $m.set($key, v); })*
    };
}

impl TrialArgs {
    fn flags(&self) -> Manifest {
        let mut m = Manifest::new();
        collect_flags!(self, m,
            dataset => "dataset", data_root => "data-root", name => "name", kind => "kind",
            aggr => "aggr", readout => "readout", dim => "dim", k => "k",
            bucket_base => "bucket-base", degree_cap => "degree-cap", seed => "seed",
            seeds => "seeds", lr => "lr", epochs => "epochs", sample_size => "sample-size",
            folds => "folds", layers => "layers", hidden => "hidden", dropout => "dropout",
            batch_size => "batch-size", split => "split", per_class => "per-class",
            val_size => "val-size", train_frac => "train-frac", val_frac => "val-frac",
            format => "format",
        );
        m
    }
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    trial: TrialArgs,
    #[arg(long, value_parser = ["node", "graph"])]
    task: Option<String>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(value_parser = ["table1", "table2", "table3"])]
    table: Option<String>,
    #[arg(long)]
    data_root: Option<String>,
    /// Comma-separated subset of the table's datasets.
    #[arg(long)]
    datasets: Option<String>,
    /// Comma-separated subset of feature kinds.
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long)]
    aggrs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    sample_size: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "markdown"])]
    format: Option<String>,
}

impl ReproduceArgs {
    fn flags(&self) -> Manifest {
        let mut m = Manifest::new();
        collect_flags!(self, m,
            table => "table", data_root => "data-root", datasets => "datasets", kinds => "kinds",
            aggrs => "aggrs", seed => "seed", seeds => "seeds", folds => "folds", lr => "lr",
            epochs => "epochs", sample_size => "sample-size", dim => "dim", k => "k",
            layers => "layers", format => "format",
        );
        m
    }
}

/// Keys a settings file may carry besides the trial keys.
const CLI_KEYS: &[&str] = &[
    "command",
    "data-root",
    "name",
    "format",
    "task",
    "table",
    "datasets",
    "kinds",
    "aggrs",
];

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Failure::Usage(m),
            other => Failure::Runtime(other),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 1 on runtime failure, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(p) => Manifest::read(p).map_err(|e| usage(e.to_string()))?,
        None => Manifest::new(),
    };
    let settings = |flags: Manifest| -> std::result::Result<Manifest, Failure> {
        let mut s = file.clone();
        s.merge(&flags);
        for key in s.keys() {
            let known = TrialConfig::KEYS.contains(&key)
                || CLI_KEYS.contains(&key)
                || key.starts_with("selected.");
            if !known {
                return Err(usage(format!("unknown setting {key:?}")));
            }
        }
        Ok(s)
    };
    match &cli.command {
        Command::Inspect { dataset, name } => inspect(dataset, name.as_deref()),
        Command::Features(a) => features(&settings(a.flags())?, a.out.as_deref()),
        Command::TrainNode(a) => train(&settings(a.flags())?, false, a.out.as_deref()),
        Command::TrainGraph(a) => train(&settings(a.flags())?, true, a.out.as_deref()),
        Command::Grid(g) => {
            let mut flags = g.trial.flags();
            if let Some(t) = &g.task {
                flags.set("task", t);
            }
            grid(&settings(flags)?, g.trial.out.as_deref())
        }
        Command::Reproduce(r) => reproduce_cmd(&settings(r.flags())?, r.out.as_deref()),
    }
}

fn data_root(s: &Manifest) -> PathBuf {
    s.get("data-root")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn dataset_dir(s: &Manifest) -> std::result::Result<PathBuf, Failure> {
    let d = s.get("dataset").ok_or_else(|| usage("missing --dataset"))?;
    let direct = PathBuf::from(d);
    let path = if direct.is_dir() || s.get("data-root").is_none() {
        direct
    } else {
        data_root(s).join(d)
    };
    if !path.is_dir() {
        return Err(usage(format!(
            "dataset directory {} not found",
            path.display()
        )));
    }
    Ok(path)
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// Name prefix of a `NAME_A.txt` file in `dir`, if any.
fn detect_tu_name(dir: &Path) -> Option<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()
                .and_then(|f| f.strip_suffix("_A.txt"))
                .map(str::to_string)
        })
        .collect();
    names.sort();
    names.into_iter().next()
}

fn load_tu(s: &Manifest, dir: &Path) -> std::result::Result<TuDataset, Failure> {
    let name = match s.get("name") {
        Some(n) => n.to_string(),
        None => detect_tu_name(dir).unwrap_or_else(|| dir_name(dir)),
    };
    load_tudataset_full(dir, &name).map_err(|e| Failure::Runtime(e.in_stage("load")))
}

fn load_node(dir: &Path) -> std::result::Result<NodeDataset, Failure> {
    load_node_dataset(dir).map_err(|e| Failure::Runtime(e.in_stage("load")))
}

fn inspect(dir: &Path, name: Option<&str>) -> Outcome {
    if !dir.is_dir() {
        return Err(usage(format!(
            "dataset directory {} not found",
            dir.display()
        )));
    }
    let tu_name = name.map(str::to_string).or_else(|| detect_tu_name(dir));
    let mut m = Manifest::new();
    if let Some(name) = tu_name {
        let ds =
            load_tudataset_full(dir, &name).map_err(|e| Failure::Runtime(e.in_stage("load")))?;
        let c = &ds.collection;
        let nodes: usize = c.graphs().iter().map(|g| g.num_nodes()).sum();
        let edges: usize = c.graphs().iter().map(|g| g.num_edges()).sum();
        m.set("format", "tu");
        m.set("name", &name);
        m.set("graphs", c.len());
        m.set("classes", c.num_classes());
        m.set(
            "mean-nodes",
            format!("{:.2}", nodes as f64 / c.len().max(1) as f64),
        );
        m.set(
            "mean-edges",
            format!("{:.2}", edges as f64 / c.len().max(1) as f64),
        );
        m.set("max-nodes", c.global_max_nodes());
        m.set("max-degree", c.global_max_degree());
        m.set("node-labels", ds.node_labels.is_some());
        m.set(
            "node-attributes",
            ds.node_attributes
                .as_ref()
                .map_or(0, |a| a.first().map_or(0, |x| x.cols())),
        );
    } else {
        let ds = load_node(dir)?;
        let g = &ds.graph;
        let labeled = ds.labels.as_slice().iter().filter(|l| l.is_some()).count();
        let comps = g.components();
        let num_comps = comps.iter().max().map_or(0, |m| m + 1);
        m.set("format", "node");
        m.set("name", &ds.name);
        m.set("nodes", g.num_nodes());
        m.set("edges", g.num_edges());
        m.set("classes", ds.labels.num_classes());
        m.set("labeled", labeled);
        m.set("max-degree", g.max_degree());
        m.set(
            "mean-degree",
            format!(
                "{:.2}",
                2.0 * g.num_edges() as f64 / g.num_nodes().max(1) as f64
            ),
        );
        m.set(
            "isolated",
            (0..g.num_nodes()).filter(|&v| g.deg(v) == 0).count(),
        );
        m.set("components", num_comps);
        m.set(
            "real-features",
            ds.real_features.as_ref().map_or(0, |f| f.dim()),
        );
    }
    print!("{}", m.render());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| {
        Failure::Runtime(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| {
        Failure::Runtime(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn features(s: &Manifest, out: Option<&Path>) -> Outcome {
    let out = out.ok_or_else(|| usage("features needs --out FILE"))?;
    let dir = dataset_dir(s)?;
    if s.get("kind").is_none() {
        return Err(usage("features needs --kind"));
    }
    let cfg = TrialConfig::from_manifest(s, &TrialConfig::node_defaults("", FeatureKind::Shared))?;
    let ds = load_node(&dir)?;
    let spec = cfg.feature.reseeded(cfg.split_seed);
    let values = match cfg.feature.kind() {
        FeatureKind::Real => ds
            .real_features
            .as_ref()
            .ok_or_else(|| usage(format!("{} has no features.tsv", dir.display())))?
            .values
            .clone(),
        _ => {
            build_features(&ds.graph, &spec, &cfg.numerics)
                .map_err(|e| Failure::Runtime(e.in_stage("features")))?
                .values
        }
    };
    write_tsv_matrix(out, &values).map_err(Failure::Runtime)?;
    let mut manifest = Manifest::new();
    manifest.set("command", "features");
    manifest.merge(&cfg.to_manifest());
    let mut manifest_path = out.as_os_str().to_owned();
    manifest_path.push(".manifest.txt");
    manifest
        .write(Path::new(&manifest_path))
        .map_err(Failure::Runtime)
}

fn format_of(s: &Manifest) -> std::result::Result<TableFormat, Failure> {
    Ok(s.parsed::<TableFormat>("format")?
        .unwrap_or(TableFormat::Markdown))
}

fn key_for(cfg: &TrialConfig, dir: &Path) -> ResultKey {
    ResultKey {
        aggregator: cfg.model.aggregator,
        feature: cfg.feature.kind(),
        dataset: dir_name(dir),
    }
}

fn runs_tsv(r: &TrialResult) -> String {
    let mut out = String::from("run\ttest_acc\tval_acc\tbest_epoch\n");
    for i in 0..r.accuracies.len() {
        out.push_str(&format!(
            "{i}\t{:.4}\t{:.4}\t{}\n",
            r.accuracies[i], r.val_accuracies[i], r.best_epochs[i]
        ));
    }
    out
}

fn table_file(format: TableFormat) -> &'static str {
    match format {
        TableFormat::Csv => "results.csv",
        TableFormat::Markdown => "results.md",
    }
}

fn trial_base(graph: bool) -> TrialConfig {
    if graph {
        TrialConfig::graph_defaults("", FeatureKind::Degree)
    } else {
        TrialConfig::node_defaults("", FeatureKind::Degree)
    }
}

fn run_trial(
    cfg: &TrialConfig,
    graph: bool,
    dir: &Path,
    s: &Manifest,
) -> std::result::Result<TrialResult, Failure> {
    if graph {
        let ds = load_tu(s, dir)?;
        run_graph_trial(cfg, &ds).map_err(Failure::Runtime)
    } else {
        let ds = load_node(dir)?;
        run_node_trial(cfg, &ds).map_err(Failure::Runtime)
    }
}

fn train(s: &Manifest, graph: bool, out: Option<&Path>) -> Outcome {
    let dir = dataset_dir(s)?;
    let mut cfg = TrialConfig::from_manifest(s, &trial_base(graph))?;
    cfg.dataset = s.get("dataset").unwrap_or_default().to_string();
    let format = format_of(s)?;
    let result = run_trial(&cfg, graph, &dir, s)?;
    let table = aggregate(vec![(key_for(&cfg, &dir), result.clone())]).map_err(Failure::Runtime)?;
    let text = emit_table(&table, format);
    print!("{text}");
    if let Some(out) = out {
        create_dir(out)?;
        write_text(&out.join(table_file(format)), &text)?;
        write_text(&out.join("runs.tsv"), &runs_tsv(&result))?;
        let mut m = Manifest::new();
        m.set("command", if graph { "train-graph" } else { "train-node" });
        for key in ["data-root", "name", "format"] {
            if let Some(v) = s.get(key) {
                m.set(key, v);
            }
        }
        m.set("format", format);
        m.merge(&cfg.to_manifest());
        m.write(&out.join("manifest.txt"))
            .map_err(Failure::Runtime)?;
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(
    s: &Manifest,
    key: &str,
) -> std::result::Result<Option<Vec<T>>, Failure>
where
    T::Err: std::fmt::Display,
{
    let Some(v) = s.get(key) else { return Ok(None) };
    v.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|e| usage(format!("{key} = {v}: {e}")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Some)
}

/// Grid axes given as lists in `s`, on top of `base`.
fn grid_axes(s: &Manifest, base: GridSpec) -> std::result::Result<GridSpec, Failure> {
    Ok(GridSpec {
        learning_rates: parse_list(s, "lr")?.unwrap_or(base.learning_rates),
        epochs: parse_list(s, "epochs")?.unwrap_or(base.epochs),
        sample_sizes: parse_list(s, "sample-size")?.unwrap_or(base.sample_sizes),
        dims: parse_list(s, "dim")?.unwrap_or(base.dims),
        eigen_ks: parse_list(s, "k")?.unwrap_or(base.eigen_ks),
        depths: parse_list(s, "layers")?.unwrap_or(base.depths),
    })
}

fn grid(s: &Manifest, out: Option<&Path>) -> Outcome {
    let graph = s.get("task") == Some("graph");
    let dir = dataset_dir(s)?;
    // Scalar view of the settings: the first value of every list axis.
    let mut scalar = s.clone();
    for key in ["lr", "epochs", "sample-size", "dim", "k", "layers"] {
        if let Some(v) = s.get(key) {
            let first = v.split(',').next().unwrap_or("").trim().to_string();
            scalar.set(key, first);
        }
    }
    let mut base = TrialConfig::from_manifest(&scalar, &trial_base(graph))?;
    base.dataset = s.get("dataset").unwrap_or_default().to_string();
    let spec = grid_axes(s, GridSpec::single(&base))?;
    let format = format_of(s)?;
    let outcome = if graph {
        let ds = load_tu(s, &dir)?;
        grid_search(&spec, &base, |c| run_graph_trial(c, &ds))
    } else {
        let ds = load_node(&dir)?;
        grid_search(&spec, &base, |c| run_node_trial(c, &ds))
    }
    .map_err(Failure::Runtime)?;

    let mut points = String::from("lr\tepochs\tsample_size\twidth\tlayers\tval_score\ttest\n");
    for p in &outcome.points {
        let c = &p.config;
        points.push_str(&format!(
            "{:?}\t{}\t{}\t{}\t{}\t{:.4}\t{}\n",
            c.model.learning_rate,
            c.model.epochs,
            c.model.sample_size,
            c.feature.dim().map_or("-".to_string(), |d| d.to_string()),
            c.model.num_layers,
            p.score,
            p.result.cell()
        ));
    }
    let best = outcome.best_point();
    let table = aggregate(vec![(key_for(&best.config, &dir), best.result.clone())])
        .map_err(Failure::Runtime)?;
    let text = emit_table(&table, format);
    print!("{text}");
    if let Some(out) = out {
        create_dir(out)?;
        write_text(&out.join(table_file(format)), &text)?;
        write_text(&out.join("grid.tsv"), &points)?;
        let mut m = Manifest::new();
        m.set("command", "grid");
        m.set("task", if graph { "graph" } else { "node" });
        m.merge(&base.to_manifest());
        for key in [
            "data-root",
            "name",
            "lr",
            "epochs",
            "sample-size",
            "dim",
            "k",
            "layers",
        ] {
            if let Some(v) = s.get(key) {
                m.set(key, v);
            }
        }
        m.set("format", format);
        m.write(&out.join("manifest.txt"))
            .map_err(Failure::Runtime)?;
    }
    Ok(())
}

fn reproduce_cmd(s: &Manifest, out: Option<&Path>) -> Outcome {
    let table: BenchTable = s
        .parsed("table")?
        .ok_or_else(|| usage("reproduce needs a table (table1|table2|table3)"))?;
    let root = data_root(s);
    if !root.is_dir() {
        return Err(usage(format!("data root {} not found", root.display())));
    }
    let mut opts = ReproduceOptions::new(root);
    opts.seed = s.parsed("seed")?.unwrap_or(0);
    opts.seeds = s.parsed("seeds")?;
    opts.folds = s.parsed("folds")?.unwrap_or(10);
    opts.datasets = parse_list(s, "datasets")?;
    opts.features = parse_list::<FeatureKind>(s, "kinds")?;
    if let Some(a) = parse_list::<Aggregator>(s, "aggrs")? {
        opts.aggregators = a;
    }
    opts.grid = Some(grid_axes(s, table.default_grid())?);
    let format = format_of(s)?;
    let rep = reproduce(table, &opts).map_err(Failure::Runtime)?;
    let text = emit_table(&rep.table, format);
    print!("{text}");
    if let Some(out) = out {
        create_dir(out)?;
        let ext = match format {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "md",
        };
        write_text(&out.join(format!("{table}.{ext}")), &text)?;
        let mut m = Manifest::new();
        m.set("command", "reproduce");
        m.merge(&rep.manifest);
        m.set("format", format);
        m.write(&out.join("manifest.txt"))
            .map_err(Failure::Runtime)?;
    }
    Ok(())
}
