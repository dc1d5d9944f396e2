//! Attack-grid benchmark: baseline and regularized GAT trained on identical
//! poisoned graphs across seeds.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{LambdaSelect, RunConfig};
use super::stats::{mean, std_dev};
use crate::attention_analysis::{mean_norm_entropy, mean_rogue_mass};
use crate::error::{Error, Result};
use crate::gat_model::{train, TrainInputs};
use crate::graph_store::{CsrAdjacency, Dataset, Split};
use crate::perturbation::{inject_rogue_nodes, NoiseSpec};
use crate::rng::{derive_seed, stream};
use crate::robust_reg::{lambda_sweep_with, RegKind, SweepResult};

/// Grid point shared by both attack cases; the λ sweep runs here.
pub const SWEEP_POINT: (usize, usize) = (50, 500);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Baseline,
    Robust,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Robust => "robust",
        }
    }
}

/// Outcome of one trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMetrics {
    pub test_acc: f64,
    pub val_acc: f64,
    pub mean_norm_entropy: f64,
    /// Zero when the graph has no rogue nodes.
    pub mean_rogue_mass: f64,
    pub best_epoch: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub checksum: String,
    pub outcome: std::result::Result<CellMetrics, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    /// Grid case name, or `control` for the unpoisoned point.
    pub case: String,
    pub n_rogue: usize,
    pub edges_per_rogue: usize,
    pub variant: Variant,
    /// Training seed.
    pub seed: u64,
    pub checksum: String,
    pub metrics: Option<CellMetrics>,
    pub error: Option<String>,
}

/// Mean and sample standard deviation over the successful seeds of one
/// (case, grid point, variant).
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub case: String,
    pub n_rogue: usize,
    pub edges_per_rogue: usize,
    pub variant: Variant,
    pub n_ok: usize,
    pub n_failed: usize,
    pub test_acc_mean: f64,
    pub test_acc_std: f64,
    pub entropy_mean: f64,
    pub rogue_mass_mean: f64,
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub kind: RegKind,
    pub lambda_star: f64,
    /// Present when λ was chosen by sweep.
    pub sweep: Option<SweepResult>,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
}

impl BenchmarkReport {
    pub fn summary_for(
        &self,
        case: &str,
        n_rogue: usize,
        edges: usize,
        v: Variant,
    ) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| {
            s.case == case && s.n_rogue == n_rogue && s.edges_per_rogue == edges && s.variant == v
        })
    }

    /// Rows of one (case, point, variant) in seed order.
    pub fn rows_for(
        &self,
        case: &str,
        n_rogue: usize,
        edges: usize,
        v: Variant,
    ) -> Vec<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| {
                r.case == case
                    && r.n_rogue == n_rogue
                    && r.edges_per_rogue == edges
                    && r.variant == v
            })
            .collect()
    }
}

/// Graph, labels and split shared by every cell.
pub struct BenchData<'a> {
    pub dataset: &'a Dataset,
    pub adj: &'a CsrAdjacency,
    pub split: &'a Split,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct CellKey {
    n_rogue: usize,
    edges: usize,
    seed_idx: usize,
    lambda_bits: u64,
}

impl CellKey {
    fn new(n_rogue: usize, edges: usize, seed_idx: usize, lambda: f64) -> Self {
        // -0.0 and 0.0 must share a cell
        let lambda = if lambda == 0.0 { 0.0 } else { lambda };
        Self {
            n_rogue,
            edges,
            seed_idx,
            lambda_bits: lambda.to_bits(),
        }
    }

    fn lambda(self) -> f64 {
        f64::from_bits(self.lambda_bits)
    }
}

/// Poison seed of a grid point for one seed index. It does not depend on
/// the variant, so baseline and robust models see the same graph.
pub fn poison_seed(base_seed: u64, seed_idx: usize, n_rogue: usize, edges: usize) -> u64 {
    derive_seed(
        base_seed,
        &[
            stream::POISON,
            seed_idx as u64,
            n_rogue as u64,
            edges as u64,
        ],
    )
}

fn run_cell(cfg: &RunConfig, data: &BenchData, key: CellKey) -> Cell {
    let spec = NoiseSpec {
        feature_model: cfg.noise.feature_model,
        seed: poison_seed(cfg.base_seed, key.seed_idx, key.n_rogue, key.edges),
        ..NoiseSpec::new(key.n_rogue, key.edges)
    };
    let graph = match inject_rogue_nodes(data.dataset, data.adj, &spec) {
        Ok(g) => g,
        Err(e) => {
            return Cell {
                checksum: String::new(),
                outcome: Err(e.to_string()),
            }
        }
    };
    let checksum = graph.checksum();
    let start = Instant::now();
    let outcome = (|| -> Result<CellMetrics> {
        let inputs = TrainInputs {
            features: &graph.features,
            labels: &graph.labels,
            n_classes: data.dataset.n_classes,
            adj: &graph.adj,
            split: data.split,
        };
        let r = train(&inputs, &cfg.gat(key.lambda(), cfg.seed(key.seed_idx)))?;
        let entropy = mean_norm_entropy(&r.final_attention, &graph.adj, graph.n_clean)?;
        let mass = mean_rogue_mass(&r.final_attention, &graph.adj, &graph.rogue_ids)?;
        Ok(CellMetrics {
            test_acc: r.test_acc,
            val_acc: r.val_acc,
            mean_norm_entropy: entropy,
            mean_rogue_mass: mass,
            best_epoch: r.best_epoch,
            wall_time_s: if cfg.record_wall_time {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })
    })();
    Cell {
        checksum,
        outcome: outcome.map_err(|e| e.to_string()),
    }
}

/// Trains every missing cell, in parallel on the current rayon pool.
fn fill(
    cfg: &RunConfig,
    data: &BenchData,
    cache: &mut BTreeMap<CellKey, Cell>,
    keys: Vec<CellKey>,
) {
    let mut todo: Vec<CellKey> = keys
        .into_iter()
        .filter(|k| !cache.contains_key(k))
        .collect();
    todo.sort();
    todo.dedup();
    let done: Vec<(CellKey, Cell)> = todo
        .into_par_iter()
        .map(|k| (k, run_cell(cfg, data, k)))
        .collect();
    cache.extend(done);
}

/// Grid points of a benchmark in report order, with their case names.
pub fn grid_points(cfg: &RunConfig) -> Result<Vec<(String, usize, usize)>> {
    let table = cfg.table()?;
    let mut points = Vec::new();
    if cfg.noise.control {
        points.push(("control".to_string(), 0, 0));
    }
    for case in cfg.noise.case.cases() {
        for s in crate::perturbation::noise_grid(case, table) {
            points.push((case.name().to_string(), s.n_rogue, s.edges_per_rogue));
        }
    }
    Ok(points)
}

/// Runs the whole benchmark. Cells are memoized on (grid point, seed, λ), so
/// the point shared by both cases and the λ = 0 sweep entry are trained once.
pub fn run_benchmark(cfg: &RunConfig, data: &BenchData) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let n = data.adj.n();
    let max_edges = grid_points(cfg)?.iter().map(|p| p.2).max().unwrap_or(0);
    if max_edges > n {
        return Err(Error::Invalid(format!(
            "grid needs {max_edges} edges per rogue node, graph has {n} nodes"
        )));
    }
    let mut cache = BTreeMap::new();
    let (sweep_n, sweep_e) = SWEEP_POINT;

    let (lambda_star, sweep) = match cfg.reg.select {
        _ if cfg.reg.kind == RegKind::None => (0.0, None),
        LambdaSelect::Fixed => (cfg.reg.lambda, None),
        LambdaSelect::Sweep => {
            let keys = cfg
                .reg
                .lambdas
                .iter()
                .flat_map(|&l| (0..cfg.n_seeds).map(move |s| CellKey::new(sweep_n, sweep_e, s, l)))
                .collect();
            fill(cfg, data, &mut cache, keys);
            let seeds: Vec<u64> = (0..cfg.n_seeds as u64).collect();
            let res = lambda_sweep_with(cfg.reg.kind, &cfg.reg.lambdas, &seeds, |l, s| {
                let cell = &cache[&CellKey::new(sweep_n, sweep_e, s as usize, l)];
                match &cell.outcome {
                    Ok(m) => Ok((m.val_acc, m.mean_norm_entropy)),
                    Err(e) => Err(Error::Invalid(format!("sweep cell λ={l} seed {s}: {e}"))),
                }
            })?;
            (res.best_lambda, Some(res))
        }
    };

    let points = grid_points(cfg)?;
    let lam = |v: Variant| match v {
        Variant::Baseline => 0.0,
        Variant::Robust => lambda_star,
    };
    let variants = [Variant::Baseline, Variant::Robust];
    let keys = points
        .iter()
        .flat_map(|(_, nr, e)| {
            variants
                .iter()
                .flat_map(move |&v| (0..cfg.n_seeds).map(move |s| CellKey::new(*nr, *e, s, lam(v))))
        })
        .collect();
    fill(cfg, data, &mut cache, keys);

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (case, nr, e) in &points {
        for &v in &variants {
            let mut ok = Vec::new();
            for s in 0..cfg.n_seeds {
                let cell = &cache[&CellKey::new(*nr, *e, s, lam(v))];
                let (metrics, error) = match &cell.outcome {
                    Ok(m) => (Some(m.clone()), None),
                    Err(err) => (None, Some(err.clone())),
                };
                if let Some(m) = &metrics {
                    ok.push(m.clone());
                }
                rows.push(ReportRow {
                    case: case.clone(),
                    n_rogue: *nr,
                    edges_per_rogue: *e,
                    variant: v,
                    seed: cfg.seed(s),
                    checksum: cell.checksum.clone(),
                    metrics,
                    error,
                });
            }
            summary.push(summarize(case, *nr, *e, v, &ok, cfg.n_seeds));
        }
    }
    Ok(BenchmarkReport {
        kind: cfg.reg.kind,
        lambda_star,
        sweep,
        rows,
        summary,
    })
}

fn summarize(
    case: &str,
    nr: usize,
    e: usize,
    v: Variant,
    ok: &[CellMetrics],
    n_seeds: usize,
) -> SummaryRow {
    let acc: Vec<f64> = ok.iter().map(|m| m.test_acc).collect();
    let ent: Vec<f64> = ok.iter().map(|m| m.mean_norm_entropy).collect();
    let mass: Vec<f64> = ok.iter().map(|m| m.mean_rogue_mass).collect();
    SummaryRow {
        case: case.to_string(),
        n_rogue: nr,
        edges_per_rogue: e,
        variant: v,
        n_ok: ok.len(),
        n_failed: n_seeds - ok.len(),
        test_acc_mean: mean(&acc),
        test_acc_std: std_dev(&acc),
        entropy_mean: mean(&ent),
        rogue_mass_mean: mean(&mass),
    }
}
