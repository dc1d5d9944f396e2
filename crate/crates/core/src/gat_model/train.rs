use serde::{Deserialize, Serialize};

use super::{
    adam_step, init_params, model_backward, model_forward_cached, AdamConfig, AdamState,
    AttentionMap, GatConfig, GatParams, ModelInput,
};
use crate::error::{Error, Result};
use crate::graph_store::{CsrAdjacency, Split};
use crate::ndcompute::{softmax_xent, Matrix};
use crate::rng::{derive_seed, rng_from, stream};
use crate::robust_reg::{reg_grad_scores, reg_value};

/// Everything a training run reads. `features` are the model inputs (already
/// row-normalised); `labels` cover nodes `0..labels.len()`, and any further
/// rows of `features` are unlabeled (e.g. injected rogue nodes).
#[derive(Clone, Copy, Debug)]
pub struct TrainInputs<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub n_classes: usize,
    pub adj: &'a CsrAdjacency,
    pub split: &'a Split,
}

impl TrainInputs<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.adj.n();
        if self.features.rows() != n {
            return Err(Error::Shape(format!(
                "{} feature rows for a {n}-node graph",
                self.features.rows()
            )));
        }
        if self.labels.len() > n {
            return Err(Error::Shape("more labels than nodes".into()));
        }
        if self.labels.iter().any(|&l| l >= self.n_classes) {
            return Err(Error::Shape("label outside n_classes".into()));
        }
        let s = self.split;
        for set in [&s.train_idx, &s.val_idx, &s.test_idx] {
            if set.iter().any(|&i| i >= self.labels.len()) {
                return Err(Error::Shape("split references an unlabeled node".into()));
            }
        }
        if s.train_idx.is_empty() || s.val_idx.is_empty() {
            return Err(Error::Invalid(
                "train and validation sets must be nonempty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Epoch whose parameters were kept; 0 means the initial parameters.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub train_loss_curve: Vec<f64>,
    pub val_loss_curve: Vec<f64>,
    pub val_acc_curve: Vec<f64>,
    /// Validation accuracy of the kept parameters.
    pub val_acc: f64,
    pub test_acc: f64,
    pub final_params: GatParams,
    /// Eval-mode attention of the kept parameters.
    pub final_attention: AttentionMap,
}

/// The serialisable part of a [`TrainReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_acc: f64,
    pub test_acc: f64,
    pub train_loss_curve: Vec<f64>,
    pub val_loss_curve: Vec<f64>,
    pub val_acc_curve: Vec<f64>,
}

impl TrainReport {
    pub fn summary(&self) -> TrainSummary {
        TrainSummary {
            best_epoch: self.best_epoch,
            epochs_run: self.epochs_run,
            val_acc: self.val_acc,
            test_acc: self.test_acc,
            train_loss_curve: self.train_loss_curve.clone(),
            val_loss_curve: self.val_loss_curve.clone(),
            val_acc_curve: self.val_acc_curve.clone(),
        }
    }
}

/// Fraction of `idx` whose arg-max logit equals the label. Ties go to the
/// lowest class index.
pub fn accuracy(logits: &Matrix, labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::Invalid("accuracy over an empty index set".into()));
    }
    let mut correct = 0usize;
    for &i in idx {
        let row = logits.row(i);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

fn eval_forward(
    input: &ModelInput,
    adj: &CsrAdjacency,
    params: &GatParams,
    cfg: &GatConfig,
) -> Result<(Matrix, AttentionMap)> {
    let mut unused = rng_from(0);
    let (logits, attn, _) = model_forward_cached(input, adj, params, cfg, false, &mut unused)?;
    Ok((logits, attn))
}

/// Eval-mode accuracy over `idx`.
pub fn evaluate(
    params: &GatParams,
    cfg: &GatConfig,
    features: &Matrix,
    labels: &[usize],
    adj: &CsrAdjacency,
    idx: &[usize],
) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::Invalid("evaluate over an empty index set".into()));
    }
    let (logits, _) = eval_forward(&ModelInput::new(features), adj, params, cfg)?;
    accuracy(&logits, labels, idx)
}

/// Eval-mode `softmax_xent(mask) + λ·R(α)`, without weight decay. This is the
/// function whose gradient [`model_backward`] returns when dropout is off.
pub fn objective(
    input: &ModelInput,
    adj: &CsrAdjacency,
    labels: &[usize],
    mask: &[usize],
    params: &GatParams,
    cfg: &GatConfig,
) -> Result<f64> {
    let (logits, attn) = eval_forward(input, adj, params, cfg)?;
    let (loss, _) = softmax_xent(&logits, labels, mask)?;
    let spec = &cfg.regularizer;
    let reg = if spec.is_active() {
        spec.lambda * reg_value(&attn, adj, spec)?
    } else {
        0.0
    };
    Ok(loss + reg)
}

/// Full-batch training with Adam and early stopping on validation loss.
///
/// Minimises `xent(train) + λ·R(α) + weight_decay·‖θ‖²/2`, where `R` sees the
/// pre-dropout attention. Training stops once validation loss has not
/// improved for `patience` consecutive epochs, and the best parameters are
/// restored before test accuracy is measured.
pub fn train(inputs: &TrainInputs, cfg: &GatConfig) -> Result<TrainReport> {
    cfg.validate()?;
    inputs.validate()?;
    let adj = inputs.adj;
    let split = inputs.split;
    let labels = inputs.labels;
    let input = ModelInput::new(inputs.features);
    let mut params = init_params(cfg, input.dim(), inputs.n_classes, cfg.seed);
    let mut rng = rng_from(derive_seed(cfg.seed, &[stream::DROPOUT]));
    let mut adam = AdamState::new(&params);
    let adam_cfg = AdamConfig::new(cfg.lr, cfg.weight_decay);
    let spec = &cfg.regularizer;

    let (logits, _) = eval_forward(&input, adj, &params, cfg)?;
    let (mut best_loss, _) = softmax_xent(&logits, labels, &split.val_idx)?;
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut wait = 0;

    let mut train_loss_curve = Vec::new();
    let mut val_loss_curve = Vec::new();
    let mut val_acc_curve = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let (logits, attn, state) =
            model_forward_cached(&input, adj, &params, cfg, true, &mut rng)?;
        let (loss, grad_logits) = softmax_xent(&logits, labels, &split.train_idx)?;
        let (reg, reg_grad) = if spec.is_active() {
            let mut g = reg_grad_scores(&attn, adj, spec)?;
            for hs in &mut g.layers {
                for e in hs.iter_mut() {
                    e.iter_mut().for_each(|v| *v *= spec.lambda);
                }
            }
            (spec.lambda * reg_value(&attn, adj, spec)?, Some(g))
        } else {
            (0.0, None)
        };
        let total = loss + reg + 0.5 * cfg.weight_decay * params.sq_norm();
        if !total.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let grads = model_backward(&state, &params, adj, &grad_logits, reg_grad.as_ref(), cfg)?;
        adam_step(&mut params, &grads, &mut adam, &adam_cfg);

        let (logits, _) = eval_forward(&input, adj, &params, cfg)?;
        let (val_loss, _) = softmax_xent(&logits, labels, &split.val_idx)?;
        if !val_loss.is_finite() || !params.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        train_loss_curve.push(total);
        val_loss_curve.push(val_loss);
        val_acc_curve.push(accuracy(&logits, labels, &split.val_idx)?);

        if val_loss < best_loss {
            best_loss = val_loss;
            best_params.clone_from(&params);
            best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.patience {
                break;
            }
        }
    }

    let (logits, final_attention) = eval_forward(&input, adj, &best_params, cfg)?;
    let test_acc = if split.test_idx.is_empty() {
        0.0
    } else {
        accuracy(&logits, labels, &split.test_idx)?
    };
    Ok(TrainReport {
        best_epoch,
        epochs_run: train_loss_curve.len(),
        val_acc: accuracy(&logits, labels, &split.val_idx)?,
        test_acc,
        train_loss_curve,
        val_loss_curve,
        val_acc_curve,
        final_params: best_params,
        final_attention,
    })
}
