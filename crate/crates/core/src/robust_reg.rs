//! Attention-level regularizers and λ selection.
//!
//! A regularizer `R(α)` is a function of the eval-mode attention of the
//! selected layers. It is averaged over every (layer, head, node) triple it
//! touches, so its scale does not depend on graph size or head count. Its
//! gradient with respect to the pre-softmax scores flows through
//! [`masked_softmax_backward`] and is added to the score gradient inside
//! [`model_backward`](crate::gat_model::model_backward).
//!
//! - `EntropyMin`: `R = mean_i H(α_i·)`, pushing each row towards a peak.
//! - `SelfAnchor`: `R = mean_i (1 − α_ii)²`, pulling mass onto the self-loop.

use serde::{Deserialize, Serialize};

use crate::attention_analysis::mean_norm_entropy;
use crate::error::{Error, Result};
use crate::gat_model::{train, AttentionMap, GatConfig, TrainInputs};
use crate::graph_store::CsrAdjacency;
use crate::ndcompute::{masked_softmax_backward, EdgeVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    None,
    EntropyMin,
    SelfAnchor,
}

impl RegKind {
    pub fn name(self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::EntropyMin => "entropy_min",
            RegKind::SelfAnchor => "self_anchor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RegKind::None),
            "entropy_min" => Ok(RegKind::EntropyMin),
            "self_anchor" => Ok(RegKind::SelfAnchor),
            _ => Err(Error::Config(format!(
                "unknown regularizer {s:?} (expected none, entropy_min or self_anchor)"
            ))),
        }
    }
}

/// Which penalty, how strongly, and on which layers (1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegSpec {
    pub kind: RegKind,
    pub lambda: f64,
    pub apply_layers: Vec<usize>,
}

impl Default for RegSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl RegSpec {
    pub fn new(kind: RegKind, lambda: f64, apply_layers: Vec<usize>) -> Self {
        Self {
            kind,
            lambda,
            apply_layers,
        }
    }

    pub fn none() -> Self {
        Self::new(RegKind::None, 0.0, Vec::new())
    }

    /// Whether the penalty changes training at all. A zero weight switches
    /// every regularizer off, whatever its kind.
    pub fn is_active(&self) -> bool {
        self.kind != RegKind::None && self.lambda > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Invalid(format!(
                "regularizer weight must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if self.kind == RegKind::None {
            if self.lambda != 0.0 {
                return Err(Error::Invalid(
                    "regularizer kind none requires lambda = 0".into(),
                ));
            }
            return Ok(());
        }
        if self.apply_layers.is_empty() {
            return Err(Error::Invalid(
                "regularizer needs at least one layer".into(),
            ));
        }
        if let Some(l) = self.apply_layers.iter().find(|&&l| l != 1 && l != 2) {
            return Err(Error::Invalid(format!(
                "regularizer layer {l} is not 1 or 2"
            )));
        }
        Ok(())
    }

    fn applies(&self, layer0: usize) -> bool {
        self.apply_layers.contains(&(layer0 + 1))
    }
}

/// `(layer, head)` maps the spec touches, with the averaging denominator.
fn selected<'a>(
    attn: &'a AttentionMap,
    adj: &CsrAdjacency,
    spec: &RegSpec,
) -> Result<(Vec<(usize, usize, &'a EdgeVector)>, f64)> {
    spec.validate()?;
    if let Some(&l) = spec.apply_layers.iter().find(|&&l| l > attn.layers.len()) {
        return Err(Error::Shape(format!(
            "regularizer layer {l} but the attention map has {} layers",
            attn.layers.len()
        )));
    }
    let maps: Vec<_> = attn.iter().filter(|&(l, _, _)| spec.applies(l)).collect();
    for (l, k, a) in &maps {
        a.check_aligned(adj, &format!("attention layer {} head {k}", l + 1))?;
    }
    let count = (maps.len() * adj.n()) as f64;
    Ok((maps, count))
}

fn plogp(a: f64) -> f64 {
    if a > 0.0 {
        a * a.ln()
    } else {
        0.0
    }
}

/// The penalty `R(α)`, without the λ factor. Zero for `RegKind::None`.
pub fn reg_value(attn: &AttentionMap, adj: &CsrAdjacency, spec: &RegSpec) -> Result<f64> {
    if spec.kind == RegKind::None {
        return Ok(0.0);
    }
    let (maps, count) = selected(attn, adj, spec)?;
    let mut total = 0.0;
    for (_, _, a) in maps {
        for i in 0..adj.n() {
            total += match spec.kind {
                RegKind::EntropyMin => -a[adj.row_range(i)].iter().map(|&x| plogp(x)).sum::<f64>(),
                RegKind::SelfAnchor => (1.0 - a[adj.self_loop_index(i)]).powi(2),
                RegKind::None => unreachable!(),
            };
        }
    }
    Ok(total / count)
}

/// Gradient of [`reg_value`] with respect to the pre-softmax scores of every
/// layer and head (zeros where the spec does not apply), without the λ
/// factor.
pub fn reg_grad_scores(
    attn: &AttentionMap,
    adj: &CsrAdjacency,
    spec: &RegSpec,
) -> Result<AttentionMap> {
    let mut out = attn.zeros_like();
    if spec.kind == RegKind::None {
        return Ok(out);
    }
    let (maps, count) = selected(attn, adj, spec)?;
    for (l, k, a) in maps {
        let mut g = vec![0.0; a.n_edges()];
        match spec.kind {
            RegKind::EntropyMin => {
                for (g, &x) in g.iter_mut().zip(a.iter()) {
                    // a zero coefficient contributes nothing after the softmax
                    // Jacobian multiplies by it, so its log is never needed
                    if x > 0.0 {
                        *g = -(x.ln() + 1.0) / count;
                    }
                }
            }
            RegKind::SelfAnchor => {
                for i in 0..adj.n() {
                    let s = adj.self_loop_index(i);
                    g[s] = -2.0 * (1.0 - a[s]) / count;
                }
            }
            RegKind::None => unreachable!(),
        }
        out.layers[l][k] = masked_softmax_backward(a, &EdgeVector::new(g), adj)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mean_val_acc: f64,
    /// Mean normalized attention entropy over clean nodes.
    pub mean_entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: RegKind,
    pub rows: Vec<SweepRow>,
    /// The λ with the highest mean validation accuracy; ties go to the
    /// earliest entry of the candidate list.
    pub best_lambda: f64,
}

/// Evaluates every λ over every seed with `run(lambda, seed) -> (val_acc,
/// mean_entropy)` and picks the best by mean validation accuracy.
pub fn lambda_sweep_with<F>(
    kind: RegKind,
    lambdas: &[f64],
    seeds: &[u64],
    mut run: F,
) -> Result<SweepResult>
where
    F: FnMut(f64, u64) -> Result<(f64, f64)>,
{
    if lambdas.is_empty() || seeds.is_empty() {
        return Err(Error::Invalid(
            "lambda sweep needs lambdas and seeds".into(),
        ));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (mut acc, mut ent) = (0.0, 0.0);
        for &seed in seeds {
            let (a, e) = run(lambda, seed)?;
            acc += a;
            ent += e;
        }
        let n = seeds.len() as f64;
        rows.push(SweepRow {
            lambda,
            mean_val_acc: acc / n,
            mean_entropy: ent / n,
        });
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mean_val_acc > rows[best].mean_val_acc {
            best = i;
        }
    }
    Ok(SweepResult {
        kind,
        best_lambda: rows[best].lambda,
        rows,
    })
}

/// [`lambda_sweep_with`] over full training runs. Each run uses `base` with
/// its seed and regularizer replaced; λ = 0 runs with no regularizer.
pub fn lambda_sweep(
    inputs: &TrainInputs,
    base: &GatConfig,
    kind: RegKind,
    apply_layers: &[usize],
    lambdas: &[f64],
    seeds: &[u64],
) -> Result<SweepResult> {
    lambda_sweep_with(kind, lambdas, seeds, |lambda, seed| {
        let regularizer = if lambda == 0.0 {
            RegSpec::none()
        } else {
            RegSpec::new(kind, lambda, apply_layers.to_vec())
        };
        let cfg = GatConfig {
            seed,
            regularizer,
            ..base.clone()
        };
        let report = train(inputs, &cfg)?;
        let ent = mean_norm_entropy(&report.final_attention, inputs.adj, inputs.labels.len())?;
        Ok((report.val_acc, ent))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::build_csr;
    use crate::ndcompute::{finite_diff_check, masked_softmax};
    use crate::rng::rng_from;
    use rand::Rng;

    fn single(adj: &CsrAdjacency, alpha: Vec<f64>) -> AttentionMap {
        assert_eq!(alpha.len(), adj.n_edges());
        AttentionMap {
            layers: vec![vec![EdgeVector::new(alpha)]],
        }
    }

    fn spec(kind: RegKind) -> RegSpec {
        RegSpec::new(kind, 1.0, vec![1])
    }

    #[test]
    fn validation_rules() {
        assert!(RegSpec::none().validate().is_ok());
        assert!(RegSpec::new(RegKind::None, 0.5, vec![]).validate().is_err());
        assert!(RegSpec::new(RegKind::EntropyMin, 0.5, vec![])
            .validate()
            .is_err());
        assert!(RegSpec::new(RegKind::EntropyMin, -1.0, vec![1])
            .validate()
            .is_err());
        assert!(RegSpec::new(RegKind::EntropyMin, 0.5, vec![3])
            .validate()
            .is_err());
        assert!(RegSpec::new(RegKind::SelfAnchor, 0.0, vec![2])
            .validate()
            .is_ok());
        assert!(!RegSpec::new(RegKind::SelfAnchor, 0.0, vec![2]).is_active());
        assert!(RegSpec::new(RegKind::SelfAnchor, 0.1, vec![2]).is_active());
        for k in [RegKind::None, RegKind::EntropyMin, RegKind::SelfAnchor] {
            assert_eq!(RegKind::parse(k.name()).unwrap(), k);
        }
        assert!(RegKind::parse("entropy").is_err());
    }

    #[test]
    fn self_peaked_attention_zeroes_both_penalties() {
        let adj = build_csr(&[(0, 1), (1, 2)], 3).unwrap();
        let alpha: Vec<f64> = adj
            .edge_rows()
            .iter()
            .zip(adj.col_idx())
            .map(|(&i, &j)| if i == j { 1.0 } else { 0.0 })
            .collect();
        let a = single(&adj, alpha);
        assert_eq!(
            reg_value(&a, &adj, &spec(RegKind::EntropyMin)).unwrap(),
            0.0
        );
        assert_eq!(
            reg_value(&a, &adj, &spec(RegKind::SelfAnchor)).unwrap(),
            0.0
        );
    }

    #[test]
    fn uniform_attention_on_degree_four() {
        // K4 with self-loops: every row has four entries
        let edges: Vec<_> = (0..4)
            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
            .collect();
        let adj = build_csr(&edges, 4).unwrap();
        let a = single(&adj, vec![0.25; 16]);
        let r = reg_value(&a, &adj, &spec(RegKind::EntropyMin)).unwrap();
        assert!((r - 4f64.ln()).abs() < 1e-12);
        let g = reg_grad_scores(&a, &adj, &spec(RegKind::EntropyMin)).unwrap();
        assert!(g.layers[0][0].iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn three_node_entropy_value() {
        // node 0: [0,2], node 1: [1], node 2: [0,2]
        let adj = build_csr(&[(0, 2)], 3).unwrap();
        let a = single(&adj, vec![0.5, 0.5, 1.0, 0.25, 0.75]);
        let r = reg_value(&a, &adj, &spec(RegKind::EntropyMin)).unwrap();
        let want = (2f64.ln() + 0.0 + (0.25 * 4f64.ln() + 0.75 * (4.0f64 / 3.0).ln())) / 3.0;
        assert!((r - want).abs() < 1e-12);
        let sa = reg_value(&a, &adj, &spec(RegKind::SelfAnchor)).unwrap();
        assert!((sa - (0.25 + 0.0 + 0.0625) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_rows_have_no_gradient() {
        let adj = build_csr(&[], 4).unwrap();
        let a = single(&adj, vec![1.0; 4]);
        for kind in [RegKind::EntropyMin, RegKind::SelfAnchor] {
            let g = reg_grad_scores(&a, &adj, &spec(kind)).unwrap();
            assert!(g.layers[0][0].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn score_gradient_matches_finite_differences() {
        let mut rng = rng_from(17);
        let mut edges = Vec::new();
        for i in 0..6 {
            for j in i + 1..6 {
                if rng.gen::<f64>() < 0.5 {
                    edges.push((i, j));
                }
            }
        }
        let adj = build_csr(&edges, 6).unwrap();
        let scores: Vec<f64> = (0..adj.n_edges())
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        // two layers, two heads each; only layer 2 is regularised in one case
        for (kind, layers) in [
            (RegKind::EntropyMin, vec![1, 2]),
            (RegKind::SelfAnchor, vec![1, 2]),
            (RegKind::EntropyMin, vec![2]),
        ] {
            let s = RegSpec::new(kind, 0.5, layers);
            let n_e = adj.n_edges();
            let build = |flat: &[f64]| AttentionMap {
                layers: (0..2)
                    .map(|l| {
                        (0..2)
                            .map(|k| {
                                let off = (l * 2 + k) * n_e;
                                let sc = EdgeVector::new(flat[off..off + n_e].to_vec());
                                masked_softmax(&sc, &adj).unwrap()
                            })
                            .collect()
                    })
                    .collect(),
            };
            let theta: Vec<f64> = (0..4)
                .flat_map(|h| scores.iter().map(move |x| x + 0.3 * h as f64 * x.sin()))
                .collect();
            let g = reg_grad_scores(&build(&theta), &adj, &s).unwrap();
            let analytic: Vec<f64> = g.iter().flat_map(|(_, _, e)| e.to_vec()).collect();
            let err = finite_diff_check(
                |t| reg_value(&build(t), &adj, &s).unwrap(),
                &theta,
                &analytic,
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-5, "{kind:?}: {err}");
        }
    }

    #[test]
    fn sweep_picks_first_best_and_averages() {
        let r = lambda_sweep_with(RegKind::EntropyMin, &[0.0, 0.1, 0.5], &[1, 2], |l, s| {
            let acc = if l == 0.0 { 0.5 } else { 0.7 };
            Ok((acc + s as f64 * 0.01, l))
        })
        .unwrap();
        assert_eq!(r.best_lambda, 0.1);
        assert!((r.rows[0].mean_val_acc - 0.515).abs() < 1e-12);
        assert_eq!(r.rows[2].mean_entropy, 0.5);
        assert!(lambda_sweep_with(RegKind::EntropyMin, &[], &[1], |_, _| Ok((0.0, 0.0))).is_err());
    }
}
