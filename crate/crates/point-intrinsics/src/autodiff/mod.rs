//! Reverse-mode automatic differentiation on a per-pass tape.
//!
//! The engine is deliberately small: dense row-major tensors, a handful of
//! ops (enough to express per-point MLP subnets and their losses), and a
//! Wengert tape replayed in reverse for gradients. Training runs in `f32`;
//! gradient checks instantiate the same code in `f64`.
//!
//! A tape and its variables belong to one forward/backward pass on one
//! thread. Distinct samples can be processed on distinct tapes concurrently.

mod adam;
mod scalar;
mod tape;
mod tensor;


pub use adam::{AdamConfig, AdamState};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("non-finite values produced by `{op}`")]
    NonFinite { op: &'static str },
    #[error("optimizer error: {0}")]
    Optimizer(String),
}

pub type Result<T> = std::result::Result<T, AutodiffError>;
