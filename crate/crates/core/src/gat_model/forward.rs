use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use super::{GatConfig, GatParams, LayerParams};
use crate::error::{Error, Result};
use crate::graph_store::CsrAdjacency;
use crate::ndcompute::{dot, elu, leaky_relu, masked_softmax, EdgeVector, Matrix, SparseRows};

/// Node features prepared for the first layer.
#[derive(Clone, Debug)]
pub struct ModelInput {
    features: SparseRows,
}

impl ModelInput {
    pub fn new(features: &Matrix) -> Self {
        Self {
            features: SparseRows::from_dense(features),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Per-layer, per-head attention coefficients (or any per-edge quantity with
/// that layout), aligned with the adjacency the model ran on.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMap {
    pub layers: Vec<Vec<EdgeVector>>,
}

impl AttentionMap {
    pub fn zeros_like(&self) -> AttentionMap {
        AttentionMap {
            layers: self
                .layers
                .iter()
                .map(|hs| hs.iter().map(|h| EdgeVector::zeros(h.n_edges())).collect())
                .collect(),
        }
    }

    /// `(layer, head, values)` with 0-based indices.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &EdgeVector)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, hs)| hs.iter().enumerate().map(move |(k, h)| (l, k, h)))
    }

    pub fn n_maps(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

pub(crate) enum LayerInput {
    Sparse(SparseRows),
    Dense(Matrix),
}

impl LayerInput {
    fn rows(&self) -> usize {
        match self {
            LayerInput::Sparse(s) => s.rows(),
            LayerInput::Dense(d) => d.rows(),
        }
    }

    fn cols(&self) -> usize {
        match self {
            LayerInput::Sparse(s) => s.cols(),
            LayerInput::Dense(d) => d.cols(),
        }
    }

    fn matmul(&self, w: &Matrix) -> Result<Matrix> {
        match self {
            LayerInput::Sparse(s) => s.matmul(w),
            LayerInput::Dense(d) => d.matmul(w),
        }
    }

    pub(crate) fn t_matmul(&self, g: &Matrix) -> Result<Matrix> {
        match self {
            LayerInput::Sparse(s) => s.t_matmul(g),
            LayerInput::Dense(d) => d.t_matmul(g),
        }
    }
}

pub(crate) struct HeadCache {
    pub z: Matrix,
    /// Post-LeakyReLU scores. Their sign equals the sign of the raw scores,
    /// which is all the LeakyReLU derivative needs.
    pub scores: EdgeVector,
    pub alpha: EdgeVector,
    /// Attention-dropout scale per edge (0 or 1/(1−p)) and the coefficients
    /// actually used for aggregation, `alpha · mask`.
    pub dropped: Option<(Vec<f64>, Vec<f64>)>,
}

impl HeadCache {
    pub fn alpha_used(&self) -> &[f64] {
        match &self.dropped {
            Some((_, used)) => used,
            None => &self.alpha,
        }
    }

    pub fn mask(&self) -> Option<&[f64]> {
        self.dropped.as_ref().map(|(m, _)| &m[..])
    }
}

pub(crate) struct LayerCache {
    pub input: LayerInput,
    pub heads: Vec<HeadCache>,
    pub concat: bool,
    pub output: Matrix,
}

/// Intermediate values recorded by [`model_forward_cached`] and consumed by
/// [`model_backward`](super::model_backward).
#[derive(Default)]
pub struct ForwardState {
    pub(crate) layers: Vec<LayerCache>,
    /// Dropout scale applied to the hidden representation before layer 2.
    pub(crate) hidden_mask: Option<Vec<f64>>,
}

/// Inverted-dropout scales: each entry is dropped when a uniform 32-bit draw
/// falls below `p·2³²`.
fn dropout_mask(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    let cut = (p * 4_294_967_296.0) as u64;
    (0..n)
        .map(|_| {
            if u64::from(rng.next_u32()) < cut {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

fn run_layer(
    input: LayerInput,
    adj: &CsrAdjacency,
    layer: &LayerParams,
    concat: bool,
    slope: f64,
    attn_p: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<LayerCache> {
    let n = adj.n();
    if input.rows() != n {
        return Err(Error::Shape(format!(
            "layer input has {} rows for a {n}-node graph",
            input.rows()
        )));
    }
    if input.cols() != layer.in_dim() {
        return Err(Error::Shape(format!(
            "layer input has {} columns, weights expect {}",
            input.cols(),
            layer.in_dim()
        )));
    }
    let k = layer.heads.len();
    let d = layer.out_dim();
    let zcat = input.matmul(&layer.stacked_w())?;
    let mut out = Matrix::zeros(n, if concat { k * d } else { d });
    let mut heads = Vec::with_capacity(k);
    let cols = adj.col_idx();
    let width = out.cols();
    for (h, hp) in layer.heads.iter().enumerate() {
        let z = zcat.col_block(h * d, d);
        let zd = z.data();
        let s_src: Vec<f64> = zd.chunks_exact(d).map(|zi| dot(zi, &hp.a_src)).collect();
        let s_dst: Vec<f64> = zd.chunks_exact(d).map(|zi| dot(zi, &hp.a_dst)).collect();
        let mut scores = vec![0.0; adj.n_edges()];
        for i in 0..n {
            let r = adj.row_range(i);
            let si = s_src[i];
            for (o, &j) in scores[r.clone()].iter_mut().zip(&cols[r]) {
                *o = leaky_relu(&(si + s_dst[j]), slope);
            }
        }
        let scores = EdgeVector::new(scores);
        let alpha = masked_softmax(&scores, adj)?;
        let dropped = match rng.as_deref_mut() {
            Some(r) if attn_p > 0.0 => {
                let mask = dropout_mask(r, adj.n_edges(), attn_p);
                let used = alpha.iter().zip(&mask).map(|(a, m)| a * m).collect();
                Some((mask, used))
            }
            _ => None,
        };
        let cache = HeadCache {
            z,
            scores,
            alpha,
            dropped,
        };
        let scale = if concat { 1.0 } else { 1.0 / k as f64 };
        let off = if concat { h * d } else { 0 };
        let used = cache.alpha_used();
        let zd = cache.z.data();
        let od = out.data_mut();
        for i in 0..n {
            let r = adj.row_range(i);
            let o = &mut od[i * width + off..i * width + off + d];
            for (&j, &a) in cols[r.clone()].iter().zip(&used[r]) {
                if a == 0.0 {
                    continue;
                }
                let a = scale * a;
                for (o, &v) in o.iter_mut().zip(&zd[j * d..j * d + d]) {
                    *o += a * v;
                }
            }
        }
        heads.push(cache);
    }
    let output = if concat { elu(&out) } else { out };
    Ok(LayerCache {
        input,
        heads,
        concat,
        output,
    })
}

/// One GAT layer without dropout. Heads are concatenated and passed through
/// ELU when `concat`, otherwise averaged with no activation.
pub fn layer_forward(
    h: &Matrix,
    adj: &CsrAdjacency,
    layer: &LayerParams,
    concat: bool,
    slope: f64,
) -> Result<(Matrix, Vec<EdgeVector>)> {
    let cache = run_layer(
        LayerInput::Dense(h.clone()),
        adj,
        layer,
        concat,
        slope,
        0.0,
        None,
    )?;
    let alphas = cache.heads.into_iter().map(|hc| hc.alpha).collect();
    Ok((cache.output, alphas))
}

/// Full forward pass recording everything the backward pass needs.
///
/// In train mode dropout hits the input features, the hidden representation
/// and the attention coefficients; surviving attention weights are scaled by
/// `1/(1−p)` and rows are not renormalised. The returned [`AttentionMap`]
/// always holds the pre-dropout coefficients.
pub fn model_forward_cached(
    input: &ModelInput,
    adj: &CsrAdjacency,
    params: &GatParams,
    cfg: &GatConfig,
    train_mode: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Matrix, AttentionMap, ForwardState)> {
    if params.layers.len() != 2 {
        return Err(Error::Shape(format!(
            "expected 2 layers, got {}",
            params.layers.len()
        )));
    }
    let x = if train_mode && cfg.dropout_p > 0.0 {
        let mask = dropout_mask(rng, input.features.nnz(), cfg.dropout_p);
        let vals = input
            .features
            .values()
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        input.features.with_values(vals)
    } else {
        input.features.clone()
    };
    let train_rng = if train_mode { Some(&mut *rng) } else { None };
    let l1 = run_layer(
        LayerInput::Sparse(x),
        adj,
        &params.layers[0],
        true,
        cfg.leaky_slope,
        cfg.attn_dropout_p,
        train_rng,
    )?;

    let (h1, hidden_mask) = if train_mode && cfg.dropout_p > 0.0 {
        let mask = dropout_mask(rng, l1.output.data().len(), cfg.dropout_p);
        let mut h = l1.output.clone();
        for (v, m) in h.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        (h, Some(mask))
    } else {
        (l1.output.clone(), None)
    };
    let train_rng = if train_mode { Some(&mut *rng) } else { None };
    let l2 = run_layer(
        LayerInput::Dense(h1),
        adj,
        &params.layers[1],
        false,
        cfg.leaky_slope,
        cfg.attn_dropout_p,
        train_rng,
    )?;
    let logits = l2.output.clone();
    let attn = AttentionMap {
        layers: [&l1, &l2]
            .iter()
            .map(|l| l.heads.iter().map(|h| h.alpha.clone()).collect())
            .collect(),
    };
    Ok((
        logits,
        attn,
        ForwardState {
            layers: vec![l1, l2],
            hidden_mask,
        },
    ))
}

/// Logits and attention for a dense feature matrix.
pub fn model_forward(
    x: &Matrix,
    adj: &CsrAdjacency,
    params: &GatParams,
    cfg: &GatConfig,
    train_mode: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Matrix, AttentionMap)> {
    let (logits, attn, _) =
        model_forward_cached(&ModelInput::new(x), adj, params, cfg, train_mode, rng)?;
    Ok((logits, attn))
}
