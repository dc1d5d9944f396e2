use super::matrix::{EdgeVector, Matrix};

/// Containers that support an elementwise map preserving shape.
pub trait ElementMap {
    fn map_elements(&self, f: impl Fn(f64) -> f64) -> Self;
}

impl ElementMap for Matrix {
    fn map_elements(&self, f: impl Fn(f64) -> f64) -> Self {
        self.map(f)
    }
}

impl ElementMap for EdgeVector {
    fn map_elements(&self, f: impl Fn(f64) -> f64) -> Self {
        EdgeVector::new(self.iter().map(|&x| f(x)).collect())
    }
}

impl ElementMap for f64 {
    fn map_elements(&self, f: impl Fn(f64) -> f64) -> Self {
        f(*self)
    }
}

#[inline]
fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// `x` for `x ≥ 0`, `slope·x` otherwise.
pub fn leaky_relu<T: ElementMap>(x: &T, slope: f64) -> T {
    debug_assert!(slope > 0.0 && slope < 1.0);
    x.map_elements(|v| leaky(v, slope))
}

/// Derivative of LeakyReLU at the pre-activation `x`. The kink takes the
/// right-hand slope.
#[inline]
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

/// `x` for `x ≥ 0`, `exp(x) − 1` otherwise.
pub fn elu<T: ElementMap>(x: &T) -> T {
    x.map_elements(|v| if v >= 0.0 { v } else { v.exp_m1() })
}

/// ELU derivative expressed through its output `y`: `1` on the linear branch,
/// `y + 1 = exp(x)` on the exponential one.
#[inline]
pub fn elu_grad_from_output(y: f64) -> f64 {
    if y >= 0.0 {
        1.0
    } else {
        y + 1.0
    }
}
