//! Two-layer multi-head GAT for transductive node classification.
//!
//! Layer 1 runs `heads_l1` heads of width `hidden_dim`, concatenated and
//! passed through ELU; layer 2 runs `heads_l2` heads of width `n_classes`,
//! averaged into linear logits. Per head,
//!
//! ```text
//! z     = H·W
//! e_ij  = LeakyReLU(a_src·z_i + a_dst·z_j)      for j ∈ neigh(i)
//! α_i·  = softmax over neigh(i) of e_i·
//! out_i = Σ_j α_ij z_j
//! ```
//!
//! Gradients are derived by hand for this fixed graph; see [`model_backward`].

mod adam;
mod backward;
mod checkpoint;
mod config;
mod forward;
mod params;
mod train;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use backward::model_backward;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::GatConfig;
pub use forward::{
    layer_forward, model_forward, model_forward_cached, AttentionMap, ForwardState, ModelInput,
};
pub use params::{init_params, GatParams, HeadParams, LayerParams};
pub use train::{accuracy, evaluate, objective, train, TrainInputs, TrainReport, TrainSummary};
