//! Binary graph cache: a parsed [`Dataset`] together with its CSR adjacency.
//!
//! ```text
//! magic "GATGRAPH" | u32 version | u8 kind (0 = dataset, 1 = poisoned graph)
//! features: u64 rows, u64 cols, f64[] data
//! csr: u64 n, u64[] row_ptr, u64[] col_idx
//! kind 0: u64 n_classes, u64[] labels, label names, node ids, u64[] edges
//! ```
//!
//! All integers and floats are little-endian. The poisoned-graph layout
//! shares the header and the feature/CSR sections and is written by
//! [`crate::perturbation`].

use std::path::Path;

use super::{CsrAdjacency, Dataset};
use crate::binio::{BinReader, BinWriter};
use crate::error::Result;
use crate::ndcompute::Matrix;

pub const GRAPH_MAGIC: &[u8; 8] = b"GATGRAPH";
pub const GRAPH_VERSION: u32 = 1;
pub(crate) const KIND_DATASET: u8 = 0;
pub(crate) const KIND_POISONED: u8 = 1;

pub(crate) fn write_matrix(w: &mut BinWriter, m: &Matrix) -> Result<()> {
    w.usize(m.rows())?;
    w.usize(m.cols())?;
    w.f64s(m.data())
}

pub(crate) fn read_matrix(r: &mut BinReader) -> Result<Matrix> {
    let rows = r.usize()?;
    let cols = r.usize()?;
    let data = r.f64s()?;
    Matrix::from_vec(rows, cols, data).map_err(|e| r.bad(e.to_string()))
}

pub(crate) fn write_csr(w: &mut BinWriter, adj: &CsrAdjacency) -> Result<()> {
    w.usize(adj.n())?;
    w.usizes(adj.row_ptr())?;
    w.usizes(adj.col_idx())
}

pub(crate) fn read_csr(r: &mut BinReader) -> Result<CsrAdjacency> {
    let n = r.usize()?;
    let row_ptr = r.usizes()?;
    let col_idx = r.usizes()?;
    CsrAdjacency::from_parts(n, row_ptr, col_idx).map_err(|e| r.bad(e.to_string()))
}

fn write_strs(w: &mut BinWriter, v: &[String]) -> Result<()> {
    w.usize(v.len())?;
    v.iter().try_for_each(|s| w.str(s))
}

fn read_strs(r: &mut BinReader) -> Result<Vec<String>> {
    let n = r.usize()?;
    (0..n).map(|_| r.str()).collect()
}

pub fn save_cache(path: &Path, ds: &Dataset, adj: &CsrAdjacency) -> Result<()> {
    let mut w = BinWriter::create(path, GRAPH_MAGIC, GRAPH_VERSION)?;
    w.u8(KIND_DATASET)?;
    write_matrix(&mut w, &ds.features)?;
    write_csr(&mut w, adj)?;
    w.usize(ds.n_classes)?;
    w.usizes(&ds.labels)?;
    write_strs(&mut w, &ds.label_names)?;
    write_strs(&mut w, &ds.node_ids)?;
    let flat: Vec<usize> = ds.edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    w.usizes(&flat)?;
    w.finish()
}

pub fn load_cache(path: &Path) -> Result<(Dataset, CsrAdjacency)> {
    let mut r = BinReader::open(path, GRAPH_MAGIC, GRAPH_VERSION)?;
    let kind = r.u8()?;
    if kind != KIND_DATASET {
        return Err(r.bad(format!("kind {kind} is not a dataset cache")));
    }
    let features = read_matrix(&mut r)?;
    let adj = read_csr(&mut r)?;
    let n_classes = r.usize()?;
    let labels = r.usizes()?;
    let label_names = read_strs(&mut r)?;
    let node_ids = read_strs(&mut r)?;
    let flat = r.usizes()?;
    if flat.len() % 2 != 0 {
        return Err(r.bad("odd edge array"));
    }
    let edges = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let ds = Dataset {
        n_nodes: features.rows(),
        n_features: features.cols(),
        n_classes,
        features,
        labels,
        label_names,
        node_ids,
        edges,
    };
    ds.validate().map_err(|e| r.bad(e.to_string()))?;
    if adj.n() != ds.n_nodes {
        return Err(r.bad("adjacency size differs from node count"));
    }
    r.expect_eof()?;
    Ok((ds, adj))
}
