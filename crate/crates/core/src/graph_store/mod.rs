//! Citation-graph ingestion, CSR neighbourhoods and transductive splits.

mod cache;
mod csr;
mod dataset;
mod split;
pub mod synthetic;

pub use cache::{load_cache, save_cache, GRAPH_MAGIC, GRAPH_VERSION};
pub(crate) use cache::{read_csr, read_matrix, write_csr, write_matrix, KIND_POISONED};
pub use csr::{build_csr, CsrAdjacency};
pub use dataset::{load_planetoid, row_normalize, write_planetoid, Dataset, PlanetoidLoad};
pub use split::{make_split, Split, SplitSpec};
