//! Experiment orchestration: configuration files, the five commands of the
//! command-line front end, benchmarks and report emission.
//!
//! Each `cmd_*` function does the work of one subcommand and returns a short
//! human-readable summary; printing and exit codes are left to the binary.

mod benchmark;
mod config;
mod report;
pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use benchmark::{
    grid_points, poison_seed, run_benchmark, BenchData, BenchmarkReport, Cell, CellMetrics,
    ReportRow, SummaryRow, Variant, SWEEP_POINT,
};
pub use config::{CaseSelect, DataConfig, LambdaSelect, NoiseConfig, RegConfig, RunConfig};
pub use report::{
    fmt_stat, render_markdown, write_all, write_report_csv, REPORT_HEADER, SUMMARY_HEADER,
};

use crate::attention_analysis::{mean_rogue_mass, write_attention_csv};
use crate::error::{Error, Result};
use crate::gat_model::{
    load_checkpoint, model_forward, save_checkpoint, train, GatConfig, TrainInputs, TrainSummary,
};
use crate::graph_store::{
    build_csr, load_cache, load_planetoid, make_split, save_cache, CsrAdjacency, Dataset, Split,
};
use crate::perturbation::{
    inject_rogue_nodes, load_poisoned, save_poisoned, NoiseSpec, PoisonedGraph,
};
use crate::rng::rng_from;

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Loads the configured dataset: the binary cache when `data.cache` is set,
/// otherwise the `.content`/`.cites` pair.
pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, CsrAdjacency)> {
    let d = &cfg.data;
    if let Some(cache) = &d.cache {
        require(cache)?;
        return load_cache(cache);
    }
    match (&d.content, &d.cites) {
        (Some(content), Some(cites)) => {
            require(content)?;
            require(cites)?;
            let ds = load_planetoid(content, cites)?.dataset;
            let adj = build_csr(&ds.edges, ds.n_nodes)?;
            Ok((ds, adj))
        }
        _ => Err(Error::Config(
            "no dataset: set data.cache, or data.content and data.cites".into(),
        )),
    }
}

pub fn load_split(cfg: &RunConfig, ds: &Dataset) -> Result<Split> {
    make_split(ds, &cfg.data.split, cfg.data.split_seed)
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// One-line description of a dataset, e.g. `3 nodes, 2 feats, 2 classes, 1 edge`.
pub fn describe(ds: &Dataset, adj: &CsrAdjacency) -> String {
    format!(
        "{}, {}, {}, {}",
        plural(ds.n_nodes, "node"),
        plural(ds.n_features, "feat"),
        if ds.n_classes == 1 {
            "1 class".to_string()
        } else {
            format!("{} classes", ds.n_classes)
        },
        plural(adj.n_undirected_edges(), "edge"),
    )
}

/// Parses a Planetoid pair and writes the binary cache.
pub fn cmd_prepare(content: &Path, cites: &Path, out: &Path) -> Result<String> {
    let load = load_planetoid(content, cites)?;
    let ds = load.dataset;
    let adj = build_csr(&ds.edges, ds.n_nodes)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_cache(out, &ds, &adj)?;
    let mut msg = describe(&ds, &adj);
    if load.skipped_cites > 0 {
        msg.push_str(&format!(
            " ({} citation(s) to unknown ids skipped)",
            load.skipped_cites
        ));
    }
    Ok(msg)
}

/// The configured single attack (`noise.n_rogue`, `noise.edges_per_rogue`)
/// on the loaded dataset, with the seed-index-0 poison seed.
pub fn configured_attack(
    cfg: &RunConfig,
    ds: &Dataset,
    adj: &CsrAdjacency,
) -> Result<PoisonedGraph> {
    let n = &cfg.noise;
    let spec = NoiseSpec {
        feature_model: n.feature_model,
        seed: poison_seed(cfg.base_seed, 0, n.n_rogue, n.edges_per_rogue),
        ..NoiseSpec::new(n.n_rogue, n.edges_per_rogue)
    };
    inject_rogue_nodes(ds, adj, &spec)
}

#[derive(Serialize)]
struct TrainRecord<'a> {
    model: &'a GatConfig,
    n_rogue: usize,
    edges_per_rogue: usize,
    graph_checksum: String,
    split: &'a Split,
    result: TrainSummary,
}

/// Trains one model on the configured (possibly poisoned) graph and writes
/// `report.json` and `model.ckpt` into `out`.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<String> {
    let (ds, adj) = load_data(cfg)?;
    let split = load_split(cfg, &ds)?;
    let graph = configured_attack(cfg, &ds, &adj)?;
    let model = cfg.gat(cfg.reg.lambda, cfg.seed(0));
    let inputs = TrainInputs {
        features: &graph.features,
        labels: &graph.labels,
        n_classes: ds.n_classes,
        adj: &graph.adj,
        split: &split,
    };
    let report = train(&inputs, &model)?;
    create_dir(out)?;
    let record = TrainRecord {
        model: &model,
        n_rogue: cfg.noise.n_rogue,
        edges_per_rogue: cfg.noise.edges_per_rogue,
        graph_checksum: graph.checksum(),
        split: &split,
        result: report.summary(),
    };
    let json = serde_json::to_string_pretty(&record).map_err(|e| Error::Invalid(e.to_string()))?;
    let path = out.join("report.json");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    save_checkpoint(&out.join("model.ckpt"), &model, &report.final_params)?;
    Ok(format!(
        "test_acc {:.4}, val_acc {:.4}, best epoch {} of {}",
        report.test_acc, report.val_acc, report.best_epoch, report.epochs_run
    ))
}

/// Writes the configured poisoned graph to `out/poisoned.bin` and returns its
/// checksum.
pub fn cmd_attack(cfg: &RunConfig, out: &Path) -> Result<String> {
    let (ds, adj) = load_data(cfg)?;
    let graph = configured_attack(cfg, &ds, &adj)?;
    create_dir(out)?;
    save_poisoned(&out.join("poisoned.bin"), &graph)?;
    Ok(graph.checksum())
}

/// Reads either a poisoned-graph file or a dataset cache.
pub fn load_graph(path: &Path) -> Result<PoisonedGraph> {
    match load_poisoned(path) {
        Ok(g) => Ok(g),
        Err(Error::Format { .. }) => {
            let (ds, adj) = load_cache(path)?;
            PoisonedGraph::clean(&ds, &adj)
        }
        Err(e) => Err(e),
    }
}

/// Summary of a [`cmd_analyze`] run.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzeSummary {
    pub csv: PathBuf,
    pub rows: usize,
    pub mean_rogue_mass: f64,
}

/// Runs a checkpoint in eval mode on a graph and writes `out/attention.csv`.
pub fn cmd_analyze(checkpoint: &Path, graph: &Path, out: &Path) -> Result<AnalyzeSummary> {
    let (model, params) = load_checkpoint(checkpoint)?;
    let g = load_graph(graph)?;
    params.check_input(g.features.cols())?;
    if g.n_classes() > params.n_classes() {
        return Err(Error::Shape(format!(
            "graph has {} classes, checkpoint predicts {}",
            g.n_classes(),
            params.n_classes()
        )));
    }
    let (_, attn) = model_forward(
        &g.features,
        &g.adj,
        &params,
        &model,
        false,
        &mut rng_from(0),
    )?;
    create_dir(out)?;
    let csv = out.join("attention.csv");
    let rows = write_attention_csv(&csv, &attn, &g.adj, &g.rogue_ids)?;
    Ok(AnalyzeSummary {
        csv,
        rows,
        mean_rogue_mass: mean_rogue_mass(&attn, &g.adj, &g.rogue_ids)?,
    })
}

/// Runs the benchmark on a pool of `jobs` worker threads and writes every
/// report file into `out`.
pub fn cmd_benchmark(cfg: &RunConfig, jobs: usize, out: &Path) -> Result<BenchmarkReport> {
    let (ds, adj) = load_data(cfg)?;
    let split = load_split(cfg, &ds)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let data = BenchData {
        dataset: &ds,
        adj: &adj,
        split: &split,
    };
    let report = pool.install(|| run_benchmark(cfg, &data))?;
    write_all(out, &report, cfg.n_seeds)?;
    Ok(report)
}
