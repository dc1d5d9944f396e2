//! Rogue-node injection.
//!
//! Rogue nodes are appended after the clean nodes, each wired to a set of
//! distinct clean targets chosen uniformly at random. Their features come
//! from a distribution unlike the clean bag-of-words rows. The clean
//! subgraph is left untouched.

use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binio::{BinReader, BinWriter};
use crate::error::{Error, Result};
use crate::graph_store::{
    build_csr, read_csr, read_matrix, row_normalize, write_csr, write_matrix, CsrAdjacency,
    Dataset, GRAPH_MAGIC, GRAPH_VERSION, KIND_POISONED,
};
use crate::ndcompute::Matrix;
use crate::rng::{derive_seed, rng_from, stream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureModel {
    /// Every feature on with probability 1/2.
    #[default]
    DenseBernoulliHalf,
    /// Every feature on with the clean graph's mean density.
    DatasetDensityBernoulli,
    /// A random clean row with its feature positions shuffled.
    FeatureShuffle,
}

impl FeatureModel {
    pub fn name(self) -> &'static str {
        match self {
            FeatureModel::DenseBernoulliHalf => "dense_bernoulli_half",
            FeatureModel::DatasetDensityBernoulli => "dataset_density_bernoulli",
            FeatureModel::FeatureShuffle => "feature_shuffle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            FeatureModel::DenseBernoulliHalf,
            FeatureModel::DatasetDensityBernoulli,
            FeatureModel::FeatureShuffle,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown feature model {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub n_rogue: usize,
    pub edges_per_rogue: usize,
    pub feature_model: FeatureModel,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(n_rogue: usize, edges_per_rogue: usize) -> Self {
        Self {
            n_rogue,
            edges_per_rogue,
            feature_model: FeatureModel::default(),
            seed: 0,
        }
    }
}

/// A clean graph with rogue nodes appended. Nodes `0..n_clean` are the
/// original ones, in their original order; `labels` covers exactly them.
#[derive(Clone, Debug, PartialEq)]
pub struct PoisonedGraph {
    pub adj: CsrAdjacency,
    /// Row-normalized features of all nodes.
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub rogue_ids: Vec<usize>,
    pub n_clean: usize,
}

impl PoisonedGraph {
    /// The clean graph with no rogue nodes.
    pub fn clean(ds: &Dataset, adj: &CsrAdjacency) -> Result<Self> {
        inject_rogue_nodes(ds, adj, &NoiseSpec::new(0, 0))
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.n()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    /// SHA-256 over the adjacency, the exact feature bits, labels and rogue
    /// ids, as lowercase hex.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |xs: &[usize]| {
            h.update((xs.len() as u64).to_le_bytes());
            for &x in xs {
                h.update((x as u64).to_le_bytes());
            }
        };
        put(&[self.n_clean, self.adj.n()]);
        put(self.adj.row_ptr());
        put(self.adj.col_idx());
        put(&self.labels);
        put(&self.rogue_ids);
        put(&[self.features.rows(), self.features.cols()]);
        for x in self.features.data() {
            h.update(x.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn rogue_row(rng: &mut impl Rng, model: FeatureModel, clean: &Matrix, density: f64) -> Vec<f64> {
    let d = clean.cols();
    match model {
        FeatureModel::DenseBernoulliHalf => (0..d).map(|_| f64::from(rng.gen_bool(0.5))).collect(),
        FeatureModel::DatasetDensityBernoulli => {
            (0..d).map(|_| f64::from(rng.gen_bool(density))).collect()
        }
        FeatureModel::FeatureShuffle => {
            let mut row = clean.row(rng.gen_range(0..clean.rows())).to_vec();
            row.shuffle(rng);
            row
        }
    }
}

/// Appends `spec.n_rogue` rogue nodes to the clean graph.
///
/// Random draws come from a stream derived from `spec.seed`: first every
/// rogue node's targets, then every rogue node's features. Rogue feature
/// rows are drawn on the raw binary scale and then the whole matrix is
/// row-normalized.
pub fn inject_rogue_nodes(
    ds: &Dataset,
    adj: &CsrAdjacency,
    spec: &NoiseSpec,
) -> Result<PoisonedGraph> {
    let n = ds.n_nodes;
    if adj.n() != n {
        return Err(Error::Shape(format!(
            "adjacency has {} nodes, dataset {n}",
            adj.n()
        )));
    }
    if spec.n_rogue > 0 && spec.edges_per_rogue > n {
        return Err(Error::Invalid(format!(
            "{} edges per rogue node but only {n} clean nodes",
            spec.edges_per_rogue
        )));
    }
    let mut rng = rng_from(derive_seed(spec.seed, &[stream::POISON]));
    let mut edges = adj.edge_list();
    edges.reserve(spec.n_rogue * spec.edges_per_rogue);
    for r in 0..spec.n_rogue {
        let mut targets = sample(&mut rng, n, spec.edges_per_rogue).into_vec();
        targets.sort_unstable();
        edges.extend(targets.into_iter().map(|t| (t, n + r)));
    }
    let density = ds.feature_density();
    let mut raw = ds.features.data().to_vec();
    raw.reserve(spec.n_rogue * ds.n_features);
    for _ in 0..spec.n_rogue {
        raw.extend(rogue_row(
            &mut rng,
            spec.feature_model,
            &ds.features,
            density,
        ));
    }
    let total = n + spec.n_rogue;
    let raw = Matrix::from_vec(total, ds.n_features, raw)?;
    Ok(PoisonedGraph {
        adj: if spec.n_rogue == 0 {
            adj.clone()
        } else {
            build_csr(&edges, total)?
        },
        features: row_normalize(&raw),
        labels: ds.labels.clone(),
        rogue_ids: (n..total).collect(),
        n_clean: n,
    })
}

/// Which axis of the attack grid varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridCase {
    /// 500 edges per rogue node, varying the number of rogue nodes.
    EdgesFixed500,
    /// 50 rogue nodes, varying the edges per rogue node.
    NodesFixed50,
}

impl GridCase {
    pub fn name(self) -> &'static str {
        match self {
            GridCase::EdgesFixed500 => "edges_fixed_500",
            GridCase::NodesFixed50 => "nodes_fixed_50",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "edges_fixed_500" => Ok(GridCase::EdgesFixed500),
            "nodes_fixed_50" => Ok(GridCase::NodesFixed50),
            _ => Err(Error::Config(format!(
                "unknown grid case {s:?} (expected edges_fixed_500 or nodes_fixed_50)"
            ))),
        }
    }
}

/// Grid family. The first matches the larger citation benchmark's tables,
/// the second the sparser one's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridTable {
    Table1,
    Table2,
}

impl GridTable {
    pub fn name(self) -> &'static str {
        match self {
            GridTable::Table1 => "table1",
            GridTable::Table2 => "table2",
        }
    }

    /// Accepts `table1`/`table2` and the dataset tags `cora`/`citeseer`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "table1" | "cora" => Ok(GridTable::Table1),
            "table2" | "citeseer" => Ok(GridTable::Table2),
            _ => Err(Error::Config(format!("unknown grid table {s:?}"))),
        }
    }
}

/// The attack grid in table order, with default feature model and seed 0.
pub fn noise_grid(case: GridCase, table: GridTable) -> Vec<NoiseSpec> {
    let axis: &[usize] = match (case, table) {
        (GridCase::EdgesFixed500, GridTable::Table1) => &[50, 60, 70, 75, 80, 85, 90, 95, 100],
        (GridCase::EdgesFixed500, GridTable::Table2) => &[40, 50, 60, 70, 80, 90, 100],
        (GridCase::NodesFixed50, GridTable::Table1) => &[50, 100, 150, 200, 250, 300, 500],
        (GridCase::NodesFixed50, GridTable::Table2) => &[50, 100, 200, 300, 400, 500],
    };
    axis.iter()
        .map(|&x| match case {
            GridCase::EdgesFixed500 => NoiseSpec::new(x, 500),
            GridCase::NodesFixed50 => NoiseSpec::new(50, x),
        })
        .collect()
}

/// Writes a poisoned graph in the graph-cache container. After the shared
/// feature and CSR sections come the clean labels and a footer of
/// `n_clean` and the rogue ids.
pub fn save_poisoned(path: &Path, g: &PoisonedGraph) -> Result<()> {
    let mut w = BinWriter::create(path, GRAPH_MAGIC, GRAPH_VERSION)?;
    w.u8(KIND_POISONED)?;
    write_matrix(&mut w, &g.features)?;
    write_csr(&mut w, &g.adj)?;
    w.usizes(&g.labels)?;
    w.usize(g.n_clean)?;
    w.usizes(&g.rogue_ids)?;
    w.finish()
}

pub fn load_poisoned(path: &Path) -> Result<PoisonedGraph> {
    let mut r = BinReader::open(path, GRAPH_MAGIC, GRAPH_VERSION)?;
    let kind = r.u8()?;
    if kind != KIND_POISONED {
        return Err(r.bad(format!("kind {kind} is not a poisoned graph")));
    }
    let features = read_matrix(&mut r)?;
    let adj = read_csr(&mut r)?;
    let labels = r.usizes()?;
    let n_clean = r.usize()?;
    let rogue_ids = r.usizes()?;
    if features.rows() != adj.n()
        || labels.len() != n_clean
        || n_clean > adj.n()
        || rogue_ids != (n_clean..adj.n()).collect::<Vec<_>>()
    {
        return Err(r.bad("inconsistent poisoned graph sections"));
    }
    r.expect_eof()?;
    Ok(PoisonedGraph {
        adj,
        features,
        labels,
        rogue_ids,
        n_clean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::synthetic::two_cluster_fixture;

    fn fixture() -> (Dataset, CsrAdjacency) {
        let ds = two_cluster_fixture(1).dataset;
        let adj = build_csr(&ds.edges, ds.n_nodes).unwrap();
        (ds, adj)
    }

    #[test]
    fn zero_rogues_leave_graph_alone() {
        let (ds, adj) = fixture();
        let g = inject_rogue_nodes(&ds, &adj, &NoiseSpec::new(0, 500)).unwrap();
        assert_eq!(g.adj, adj);
        assert_eq!(g.features, row_normalize(&ds.features));
        assert!(g.rogue_ids.is_empty());
        assert_eq!(g.n_clean, 20);
    }

    #[test]
    fn structure_and_degree_accounting() {
        let (ds, adj) = fixture();
        let spec = NoiseSpec {
            n_rogue: 5,
            edges_per_rogue: 7,
            feature_model: FeatureModel::DenseBernoulliHalf,
            seed: 9,
        };
        let g = inject_rogue_nodes(&ds, &adj, &spec).unwrap();
        assert_eq!(g.n_nodes(), 25);
        assert_eq!(g.rogue_ids, (20..25).collect::<Vec<_>>());
        assert_eq!(g.adj.n_undirected_edges(), adj.n_undirected_edges() + 35);
        for &r in &g.rogue_ids {
            assert_eq!(g.adj.degree(r), 8);
            assert!(g.adj.neighbors(r).iter().all(|&j| j < 20 || j == r));
        }
        assert_eq!(g.adj.induced_prefix(20), adj);
        assert_eq!(g.features.rows(), 25);
        for i in 0..20 {
            assert_eq!(g.features.row(i), row_normalize(&ds.features).row(i));
        }
        assert_eq!(g, inject_rogue_nodes(&ds, &adj, &spec).unwrap());
        assert_eq!(
            g.checksum(),
            inject_rogue_nodes(&ds, &adj, &spec).unwrap().checksum()
        );
        let other = NoiseSpec { seed: 10, ..spec };
        assert_ne!(
            g.checksum(),
            inject_rogue_nodes(&ds, &adj, &other).unwrap().checksum()
        );
    }

    #[test]
    fn too_many_edges_is_an_error() {
        let (ds, adj) = fixture();
        assert!(inject_rogue_nodes(&ds, &adj, &NoiseSpec::new(1, 21)).is_err());
        assert!(inject_rogue_nodes(&ds, &adj, &NoiseSpec::new(1, 20)).is_ok());
    }

    #[test]
    fn feature_models() {
        let (ds, adj) = fixture();
        for model in [
            FeatureModel::DenseBernoulliHalf,
            FeatureModel::DatasetDensityBernoulli,
            FeatureModel::FeatureShuffle,
        ] {
            assert_eq!(FeatureModel::parse(model.name()).unwrap(), model);
            let spec = NoiseSpec {
                n_rogue: 40,
                edges_per_rogue: 3,
                feature_model: model,
                seed: 2,
            };
            let g = inject_rogue_nodes(&ds, &adj, &spec).unwrap();
            for &r in &g.rogue_ids {
                let s: f64 = g.features.row(r).iter().sum();
                assert!(s == 0.0 || (s - 1.0).abs() < 1e-12);
            }
            if model == FeatureModel::FeatureShuffle {
                // shuffled rows keep a clean row's word count (5 here)
                for &r in &g.rogue_ids {
                    let nnz = g.features.row(r).iter().filter(|&&x| x > 0.0).count();
                    assert_eq!(nnz, 5);
                }
            }
        }
    }

    #[test]
    fn grids_follow_the_tables() {
        let g = noise_grid(GridCase::EdgesFixed500, GridTable::Table1);
        assert_eq!(g.len(), 9);
        assert_eq!((g[0].n_rogue, g[0].edges_per_rogue), (50, 500));
        let g2 = noise_grid(GridCase::NodesFixed50, GridTable::Table1);
        assert_eq!(g2.len(), 7);
        assert_eq!((g2[6].n_rogue, g2[6].edges_per_rogue), (50, 500));
        assert!(g.contains(&g2[6]));
        let t2: Vec<_> = noise_grid(GridCase::EdgesFixed500, GridTable::Table2)
            .iter()
            .map(|s| s.n_rogue)
            .collect();
        assert_eq!(t2, [40, 50, 60, 70, 80, 90, 100]);
        let t2: Vec<_> = noise_grid(GridCase::NodesFixed50, GridTable::Table2)
            .iter()
            .map(|s| s.edges_per_rogue)
            .collect();
        assert_eq!(t2, [50, 100, 200, 300, 400, 500]);
    }

    #[test]
    fn file_round_trip() {
        let (ds, adj) = fixture();
        let g = inject_rogue_nodes(&ds, &adj, &NoiseSpec::new(3, 4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.bin");
        save_poisoned(&p, &g).unwrap();
        assert_eq!(load_poisoned(&p).unwrap(), g);
        assert!(crate::graph_store::load_cache(&p).is_err());
    }
}
