//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! The operator set covers what the training code needs: matmul, stride-1
//! conv2d, 2x2 maxpool, bias add, tanh/relu, flatten, softmax cross-entropy,
//! elementwise add/mul, sum/scale, and a custom-gradient hook through which
//! external subgraphs (quantum circuits) supply their own forward values and
//! vector-Jacobian products. Everything is sequential with fixed iteration
//! order, so results are bitwise reproducible.

mod adam;
mod finitediff;
mod graph;
pub mod ops;
mod tensor;

pub use adam::AdamState;
pub use finitediff::finite_diff_gradient;
pub use graph::{CustomOp, Forward, Gradients, Graph, NodeId};
pub use ops::Padding;
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch (node {node:?}): {detail}")]
    ShapeMismatch {
        node: Option<usize>,
        detail: String,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("expected a scalar, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },

    #[error("backward called with a forward pass from a different graph")]
    NotEvaluated,

    #[error("unknown or unbound input '{name}'")]
    UnknownInput { name: String },

    #[error("label {value} at batch index {index} is not an integer in [0, {classes})")]
    InvalidLabel {
        index: usize,
        value: f64,
        classes: usize,
    },

    #[error("custom operator '{name}' failed: {detail}")]
    CustomOpFailed { name: String, detail: String },
}
