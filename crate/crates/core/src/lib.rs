//! Graph attention network training engine with a rogue-node poisoning
//! harness and attention-level regularizers.
//!
//! The crate is organised bottom-up:
//!
//! - [`ndcompute`]: dense kernels, the CSR-masked softmax and its backward
//!   pass, cross-entropy, and a finite-difference gradient checker.
//! - [`graph_store`]: Planetoid ingestion, CSR adjacency, splits and the
//!   binary graph cache.
//! - [`gat_model`]: the two-layer multi-head GAT with a hand-derived reverse
//!   pass, Adam, dropout and early stopping.
//! - [`perturbation`]: rogue-node injection and the attack grids.
//! - [`attention_analysis`]: entropy and rogue-mass diagnostics.
//! - [`robust_reg`]: attention regularizers and the λ sweep.
//! - [`runner`]: configuration files, benchmarks and report emission.

pub mod attention_analysis;
pub mod error;
pub mod gat_model;
pub mod graph_store;
pub mod ndcompute;
pub mod perturbation;
pub mod rng;
pub mod robust_reg;
pub mod runner;

mod binio;

pub use error::{Error, Result};
