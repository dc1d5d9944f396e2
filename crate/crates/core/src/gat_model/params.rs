use rand::Rng;

use super::GatConfig;
use crate::ndcompute::Matrix;
use crate::rng::{derive_seed, rng_from, stream};

/// One attention head: `W` is `in_dim × out_dim`; `a = [a_src ‖ a_dst]` is
/// stored split so scores cost `O(|E|)` after the per-node projections.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub w: Matrix,
    pub a_src: Vec<f64>,
    pub a_dst: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub heads: Vec<HeadParams>,
}

impl LayerParams {
    pub fn in_dim(&self) -> usize {
        self.heads[0].w.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.heads[0].w.cols()
    }

    /// All head weights side by side: `in_dim × (heads·out_dim)`.
    pub(crate) fn stacked_w(&self) -> Matrix {
        let ws: Vec<&Matrix> = self.heads.iter().map(|h| &h.w).collect();
        Matrix::hstack(&ws).expect("heads share in_dim")
    }
}

/// Full model state. `layers[0]` is the hidden layer, `layers[1]` the output
/// layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GatParams {
    pub layers: Vec<LayerParams>,
}

impl GatParams {
    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> GatParams {
        let mut z = self.clone();
        for s in z.slices_mut() {
            s.fill(0.0);
        }
        z
    }

    /// Every parameter block in a fixed order: per layer, per head, `W`
    /// (row-major), `a_src`, `a_dst`.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            for h in &l.heads {
                out.push(h.w.data());
                out.push(&h.a_src[..]);
                out.push(&h.a_dst[..]);
            }
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            for h in &mut l.heads {
                out.push(h.w.data_mut());
                out.push(&mut h.a_src[..]);
                out.push(&mut h.a_dst[..]);
            }
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    /// Overwrites every parameter from `flat` (same order as [`flatten`]).
    ///
    /// [`flatten`]: GatParams::flatten
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut at = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[at..at + s.len()]);
            at += s.len();
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
    }
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..=limit)).collect()
}

fn init_layer(rng: &mut impl Rng, heads: usize, in_dim: usize, out_dim: usize) -> LayerParams {
    LayerParams {
        heads: (0..heads)
            .map(|_| HeadParams {
                w: Matrix::from_vec(
                    in_dim,
                    out_dim,
                    glorot(rng, in_dim, out_dim, in_dim * out_dim),
                )
                .unwrap(),
                a_src: glorot(rng, 2 * out_dim, 1, out_dim),
                a_dst: glorot(rng, 2 * out_dim, 1, out_dim),
            })
            .collect(),
    }
}

/// Glorot-uniform initialisation. The attention vector `a` is treated as a
/// `2·out_dim × 1` matrix for its fan computation.
pub fn init_params(cfg: &GatConfig, in_dim: usize, n_classes: usize, seed: u64) -> GatParams {
    let mut rng = rng_from(derive_seed(seed, &[stream::INIT]));
    let l1 = init_layer(&mut rng, cfg.heads_l1, in_dim, cfg.hidden_dim);
    let l2 = init_layer(
        &mut rng,
        cfg.heads_l2,
        cfg.heads_l1 * cfg.hidden_dim,
        n_classes,
    );
    GatParams {
        layers: vec![l1, l2],
    }
}
