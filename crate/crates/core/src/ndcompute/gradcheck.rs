use crate::error::{Error, Result};

/// Compares `analytic_grad` against central differences of `f` at `theta`.
///
/// Returns the largest entrywise relative error
/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn finite_diff_check<F>(mut f: F, theta: &[f64], analytic_grad: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    if theta.len() != analytic_grad.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradient entries",
            theta.len(),
            analytic_grad.len()
        )));
    }
    let mut probe = theta.to_vec();
    let mut worst = 0.0f64;
    for k in 0..theta.len() {
        probe[k] = theta[k] + eps;
        let up = f(&probe);
        probe[k] = theta[k] - eps;
        let down = f(&probe);
        probe[k] = theta[k];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(k));
        }
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic_grad[k];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
