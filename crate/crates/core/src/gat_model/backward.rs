use super::forward::{ForwardState, LayerCache};
use super::{AttentionMap, GatConfig, GatParams, HeadParams, LayerParams};
use crate::error::{Error, Result};
use crate::graph_store::CsrAdjacency;
use crate::ndcompute::{
    dot, elu_grad_from_output, leaky_relu_grad, masked_softmax_backward, EdgeVector, Matrix,
};

/// Reverse pass for one layer. `d_out` is the gradient with respect to the
/// layer's output (after ELU for the concatenating layer). `score_grad`, when
/// present, is added to the gradient with respect to the post-LeakyReLU
/// scores of each head.
fn layer_backward(
    cache: &LayerCache,
    layer: &LayerParams,
    adj: &CsrAdjacency,
    d_out: &Matrix,
    score_grad: Option<&[EdgeVector]>,
    slope: f64,
    need_input_grad: bool,
) -> Result<(LayerParams, Option<Matrix>)> {
    let n = adj.n();
    let k = layer.heads.len();
    let d = layer.out_dim();
    let cols = adj.col_idx();

    let d_pre = if cache.concat {
        let mut g = d_out.clone();
        for (g, &y) in g.data_mut().iter_mut().zip(cache.output.data()) {
            *g *= elu_grad_from_output(y);
        }
        g
    } else {
        d_out.map(|v| v / k as f64)
    };

    let mut dz_cat = Matrix::zeros(n, k * d);
    let mut grads = Vec::with_capacity(k);
    for (h, (hc, hp)) in cache.heads.iter().zip(&layer.heads).enumerate() {
        let off = if cache.concat { h * d } else { 0 };
        let d_head = |i: usize| &d_pre.row(i)[off..off + d];

        // out_i = Σ_j α̃_ij z_j
        let mut dz = Matrix::zeros(n, d);
        let mut d_alpha = vec![0.0; adj.n_edges()];
        let used = hc.alpha_used();
        let zd = hc.z.data();
        let dzd = dz.data_mut();
        for i in 0..n {
            let g = d_head(i);
            let r = adj.row_range(i);
            for ((da, &j), &a) in d_alpha[r.clone()]
                .iter_mut()
                .zip(&cols[r.clone()])
                .zip(&used[r])
            {
                *da = dot(g, &zd[j * d..j * d + d]);
                if a != 0.0 {
                    for (o, &v) in dzd[j * d..j * d + d].iter_mut().zip(g) {
                        *o += a * v;
                    }
                }
            }
        }
        if let Some(m) = hc.mask() {
            for (da, &m) in d_alpha.iter_mut().zip(m) {
                *da *= m;
            }
        }

        let mut d_scores = masked_softmax_backward(&hc.alpha, &EdgeVector::new(d_alpha), adj)?;
        if let Some(rg) = score_grad {
            for (s, r) in d_scores.iter_mut().zip(rg[h].iter()) {
                *s += r;
            }
        }

        // e_ij = LeakyReLU(s_src_i + s_dst_j)
        let mut ds_src = vec![0.0; n];
        let mut ds_dst = vec![0.0; n];
        for (i, src) in ds_src.iter_mut().enumerate() {
            let r = adj.row_range(i);
            for ((&g, &e), &j) in d_scores[r.clone()]
                .iter()
                .zip(&hc.scores[r.clone()])
                .zip(&cols[r])
            {
                let g = g * leaky_relu_grad(e, slope);
                *src += g;
                ds_dst[j] += g;
            }
        }
        let mut da_src = vec![0.0; d];
        let mut da_dst = vec![0.0; d];
        for (i, (zi, dzi)) in zd.chunks_exact(d).zip(dzd.chunks_exact_mut(d)).enumerate() {
            let (gs, gd) = (ds_src[i], ds_dst[i]);
            for c in 0..d {
                da_src[c] += gs * zi[c];
                da_dst[c] += gd * zi[c];
                dzi[c] += gs * hp.a_src[c] + gd * hp.a_dst[c];
            }
        }
        dz_cat.set_col_block(h * d, &dz);
        grads.push((da_src, da_dst));
    }

    let dw_cat = cache.input.t_matmul(&dz_cat)?;
    let heads = grads
        .into_iter()
        .enumerate()
        .map(|(h, (a_src, a_dst))| HeadParams {
            w: dw_cat.col_block(h * d, d),
            a_src,
            a_dst,
        })
        .collect();
    let d_input = if need_input_grad {
        Some(dz_cat.matmul_t(&layer.stacked_w())?)
    } else {
        None
    };
    Ok((LayerParams { heads }, d_input))
}

/// Gradients of `loss + λ·R` with respect to every parameter, given
/// `∂loss/∂logits` and, optionally, `λ·∂R/∂e` per layer and head (the
/// regulariser's gradient with respect to pre-softmax scores, as produced by
/// [`reg_grad_scores`](crate::robust_reg::reg_grad_scores) and scaled).
///
/// Weight decay is not included; [`adam_step`](super::adam_step) adds it.
pub fn model_backward(
    state: &ForwardState,
    params: &GatParams,
    adj: &CsrAdjacency,
    grad_logits: &Matrix,
    reg_score_grad: Option<&AttentionMap>,
    cfg: &GatConfig,
) -> Result<GatParams> {
    if state.layers.len() != 2 || params.layers.len() != 2 {
        return Err(Error::Invalid(
            "model_backward needs the cache of a two-layer forward pass".into(),
        ));
    }
    let out_shape = state.layers[1].output.shape();
    if grad_logits.shape() != out_shape {
        return Err(Error::Shape(format!(
            "grad_logits {:?} vs logits {:?}",
            grad_logits.shape(),
            out_shape
        )));
    }
    if let Some(rg) = reg_score_grad {
        let ok =
            rg.layers.len() == 2
                && rg.layers.iter().zip(&params.layers).all(|(g, p)| {
                    g.len() == p.heads.len() && g.iter().all(|e| e.is_aligned_with(adj))
                });
        if !ok {
            return Err(Error::Shape("regulariser gradient layout".into()));
        }
    }
    let rg = |l: usize| reg_score_grad.map(|r| &r.layers[l][..]);

    let (g2, d_h1_dropped) = layer_backward(
        &state.layers[1],
        &params.layers[1],
        adj,
        grad_logits,
        rg(1),
        cfg.leaky_slope,
        true,
    )?;
    let mut d_h1 = d_h1_dropped.expect("requested");
    if let Some(mask) = &state.hidden_mask {
        for (g, m) in d_h1.data_mut().iter_mut().zip(mask) {
            *g *= m;
        }
    }
    let (g1, _) = layer_backward(
        &state.layers[0],
        &params.layers[0],
        adj,
        &d_h1,
        rg(0),
        cfg.leaky_slope,
        false,
    )?;
    Ok(GatParams {
        layers: vec![g1, g2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gat_model::{init_params, model_forward_cached, ModelInput};
    use crate::graph_store::build_csr;
    use crate::ndcompute::{finite_diff_check, softmax_xent};
    use crate::rng::rng_from;
    use crate::robust_reg::{reg_grad_scores, reg_value, RegKind, RegSpec};
    use rand::Rng;

    struct Problem {
        x: ModelInput,
        adj: CsrAdjacency,
        labels: Vec<usize>,
        mask: Vec<usize>,
        cfg: GatConfig,
        params: GatParams,
    }

    fn problem(seed: u64, reg: RegSpec) -> Problem {
        let mut rng = rng_from(seed);
        let n = 8;
        let edges: Vec<_> = (0..12)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();
        let adj = build_csr(&edges, n).unwrap();
        let x =
            Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let cfg = GatConfig {
            hidden_dim: 3,
            heads_l1: 2,
            heads_l2: 2,
            dropout_p: 0.0,
            attn_dropout_p: 0.0,
            regularizer: reg,
            ..GatConfig::default()
        };
        let mut params = init_params(&cfg, 3, 2, seed);
        // larger attention vectors so the softmax is far from uniform
        for l in &mut params.layers {
            for h in &mut l.heads {
                for v in h.a_src.iter_mut().chain(h.a_dst.iter_mut()) {
                    *v *= 3.0;
                }
            }
        }
        Problem {
            x: ModelInput::new(&x),
            adj,
            labels: (0..n).map(|_| rng.gen_range(0..2)).collect(),
            mask: vec![0, 2, 3, 5, 6],
            cfg,
            params,
        }
    }

    fn objective(p: &Problem, params: &GatParams, train: bool, seed: u64) -> f64 {
        let mut rng = rng_from(seed);
        let (logits, attn, _) =
            model_forward_cached(&p.x, &p.adj, params, &p.cfg, train, &mut rng).unwrap();
        let (loss, _) = softmax_xent(&logits, &p.labels, &p.mask).unwrap();
        let spec = &p.cfg.regularizer;
        loss + spec.lambda * reg_value(&attn, &p.adj, spec).unwrap()
    }

    fn analytic(p: &Problem, train: bool, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        let (logits, attn, state) =
            model_forward_cached(&p.x, &p.adj, &p.params, &p.cfg, train, &mut rng).unwrap();
        let (_, g) = softmax_xent(&logits, &p.labels, &p.mask).unwrap();
        let spec = &p.cfg.regularizer;
        let rg = if spec.is_active() {
            let mut r = reg_grad_scores(&attn, &p.adj, spec).unwrap();
            for hs in &mut r.layers {
                for e in hs.iter_mut() {
                    for v in e.iter_mut() {
                        *v *= spec.lambda;
                    }
                }
            }
            Some(r)
        } else {
            None
        };
        model_backward(&state, &p.params, &p.adj, &g, rg.as_ref(), &p.cfg)
            .unwrap()
            .flatten()
    }

    fn check(p: &Problem, train: bool) -> f64 {
        let theta = p.params.flatten();
        let a = analytic(p, train, 17);
        let mut probe = p.params.clone();
        finite_diff_check(
            |t| {
                probe.assign_flat(t);
                objective(p, &probe, train, 17)
            },
            &theta,
            &a,
            1e-6,
        )
        .unwrap()
    }

    #[test]
    fn plain_loss_gradient() {
        for seed in 0..3 {
            let err = check(&problem(seed, RegSpec::none()), false);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn regularised_gradients() {
        for kind in [RegKind::EntropyMin, RegKind::SelfAnchor] {
            let spec = RegSpec::new(kind, 0.5, vec![1, 2]);
            let err = check(&problem(4, spec), false);
            assert!(err < 1e-4, "{kind:?}: {err}");
        }
    }

    #[test]
    fn gradient_with_fixed_dropout_masks() {
        let mut p = problem(6, RegSpec::new(RegKind::EntropyMin, 0.5, vec![1]));
        p.cfg.dropout_p = 0.3;
        p.cfg.attn_dropout_p = 0.3;
        let err = check(&p, true);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn zero_upstream_gradient_gives_zero() {
        let p = problem(1, RegSpec::none());
        let mut rng = rng_from(0);
        let (logits, _, state) =
            model_forward_cached(&p.x, &p.adj, &p.params, &p.cfg, false, &mut rng).unwrap();
        let g = model_backward(
            &state,
            &p.params,
            &p.adj,
            &Matrix::zeros(logits.rows(), 2),
            None,
            &p.cfg,
        )
        .unwrap();
        assert_eq!(g.sq_norm(), 0.0);
    }

    #[test]
    fn missing_cache_is_an_error() {
        let p = problem(1, RegSpec::none());
        let r = model_backward(
            &ForwardState::default(),
            &p.params,
            &p.adj,
            &Matrix::zeros(8, 2),
            None,
            &p.cfg,
        );
        assert!(matches!(r, Err(Error::Invalid(_))));
    }
}
