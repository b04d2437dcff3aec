//! Reverse-mode differentiation over dense real and complex tensors.
//!
//! Only the operations the acquisition/reconstruction pipeline needs are
//! provided. Complex leaves get their gradient as `dL/dRe + i dL/dIm`.

pub mod gradcheck;
mod graph;
mod ops;
mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use ops::normal_cdf;
pub use tensor::{Data, Dtype, Tensor};
