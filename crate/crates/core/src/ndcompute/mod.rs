//! Numeric substrate for the fixed GAT computation graph.
//!
//! Everything is 64-bit. Per-row reductions are sequential so results are
//! bitwise reproducible on a given build.

mod gradcheck;
mod kernels;
mod matrix;
mod softmax;
mod sparse;

pub use gradcheck::finite_diff_check;
pub use kernels::{elu, elu_grad_from_output, leaky_relu, leaky_relu_grad, ElementMap};
pub(crate) use matrix::dot;
pub use matrix::{EdgeVector, Matrix};
pub use softmax::{masked_softmax, masked_softmax_backward, softmax_xent};
pub use sparse::SparseRows;
