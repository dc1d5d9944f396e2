use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robust_reg::RegSpec;

/// Architecture and training hyperparameters. Defaults are the usual
/// transductive GAT recipe (8×8 hidden heads, one output head, dropout 0.6,
/// Adam at 5e-3 with 5e-4 L2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatConfig {
    pub hidden_dim: usize,
    pub heads_l1: usize,
    pub heads_l2: usize,
    pub dropout_p: f64,
    pub attn_dropout_p: f64,
    pub leaky_slope: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub regularizer: RegSpec,
}

impl Default for GatConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 8,
            heads_l1: 8,
            heads_l2: 1,
            dropout_p: 0.6,
            attn_dropout_p: 0.6,
            leaky_slope: 0.2,
            lr: 0.005,
            weight_decay: 5e-4,
            max_epochs: 1000,
            patience: 100,
            seed: 0,
            regularizer: RegSpec::none(),
        }
    }
}

impl GatConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("model config: {m}")));
        if self.hidden_dim == 0 || self.heads_l1 == 0 || self.heads_l2 == 0 {
            return bad("hidden_dim and head counts must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_p) || !(0.0..1.0).contains(&self.attn_dropout_p) {
            return bad("dropout probabilities must lie in [0, 1)");
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad("leaky_slope must lie in (0, 1)");
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("lr must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        self.regularizer.validate()
    }

    pub fn lambda(&self) -> f64 {
        self.regularizer.lambda
    }
}
