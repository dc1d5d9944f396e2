use super::matrix::{EdgeVector, Matrix};
use crate::error::{Error, Result};
use crate::graph_store::CsrAdjacency;

/// `exp(x)` for `x ≤ 0`, written without branches so that the softmax loop
/// vectorises. Arguments below −708 are clamped, which only matters for
/// results under 1e-307. Accurate to a few ulp.
#[inline]
pub(crate) fn exp_nonpos(x: f64) -> f64 {
    const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5·2^52
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-01;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    let x = x.clamp(-708.0, 0.0);
    let t = x * std::f64::consts::LOG2_E + SHIFTER;
    let n = t - SHIFTER;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    // Taylor series of e^r on |r| ≤ ln2/2; the degree-13 truncation error is
    // below 1e-17 relative
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let k = t.to_bits().wrapping_sub(SHIFTER.to_bits()) as i64;
    p * f64::from_bits(((k + 1023) as u64) << 52)
}

/// Row-wise softmax of per-edge scores restricted to each CSR row.
///
/// Each row is shifted by its maximum before exponentiation. Rows are never
/// empty (every node carries a self-loop), so every output row sums to one.
pub fn masked_softmax(scores: &EdgeVector, adj: &CsrAdjacency) -> Result<EdgeVector> {
    scores.check_aligned(adj, "masked_softmax")?;
    let mut out = vec![0.0; scores.n_edges()];
    for i in 0..adj.n() {
        let r = adj.row_range(i);
        let s = &scores[r.clone()];
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let o = &mut out[r];
        for (o, &v) in o.iter_mut().zip(s) {
            *o = exp_nonpos(v - m);
        }
        let z: f64 = o.iter().sum();
        let inv = 1.0 / z;
        for o in o.iter_mut() {
            *o *= inv;
        }
    }
    Ok(EdgeVector::new(out))
}

/// Vector-Jacobian product of [`masked_softmax`]: per row,
/// `g_j = α_j (ḡ_j − Σ_k α_k ḡ_k)`.
pub fn masked_softmax_backward(
    alpha: &EdgeVector,
    grad_alpha: &EdgeVector,
    adj: &CsrAdjacency,
) -> Result<EdgeVector> {
    alpha.check_aligned(adj, "masked_softmax_backward alpha")?;
    grad_alpha.check_aligned(adj, "masked_softmax_backward grad")?;
    let mut out = vec![0.0; alpha.n_edges()];
    for i in 0..adj.n() {
        let r = adj.row_range(i);
        let a = &alpha[r.clone()];
        let g = &grad_alpha[r.clone()];
        let inner: f64 = a.iter().zip(g).map(|(a, g)| a * g).sum();
        for ((o, &a), &g) in out[r].iter_mut().zip(a).zip(g) {
            *o = a * (g - inner);
        }
    }
    Ok(EdgeVector::new(out))
}

/// Mean cross-entropy of `softmax(logits_i)` against `labels[i]` over the
/// rows in `mask`, with its gradient. Unmasked rows get zero gradient.
pub fn softmax_xent(logits: &Matrix, labels: &[usize], mask: &[usize]) -> Result<(f64, Matrix)> {
    if mask.is_empty() {
        return Err(Error::Invalid("softmax_xent with an empty mask".into()));
    }
    let c = logits.cols();
    let mut grad = Matrix::zeros(logits.rows(), c);
    let scale = 1.0 / mask.len() as f64;
    let mut loss = 0.0;
    for &i in mask {
        if i >= logits.rows() || i >= labels.len() {
            return Err(Error::Shape(format!(
                "mask index {i} outside {} logits rows / {} labels",
                logits.rows(),
                labels.len()
            )));
        }
        let y = labels[i];
        if y >= c {
            return Err(Error::Shape(format!("label {y} with {c} classes")));
        }
        let row = logits.row(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|&v| (v - m).exp()).sum();
        let log_z = z.ln();
        loss -= row[y] - m - log_z;
        let g = grad.row_mut(i);
        for (g, &v) in g.iter_mut().zip(row) {
            *g = (v - m - log_z).exp() * scale;
        }
        g[y] -= scale;
    }
    Ok((loss * scale, grad))
}
