//! Differentiable tensors: a reverse-mode tape, an adaptive optimizer and a
//! finite-difference gradient verifier.

pub mod gradcheck;
pub mod kernels;
pub mod optim;
pub mod param;
pub mod real;
pub mod tape;
pub mod tensor;

pub use gradcheck::{finite_diff_check, relative_error, GradCheckConfig, GradCheckReport};
pub use optim::{Adam, AdamConfig};
pub use param::{ParamSet, Parameter};
pub use real::{DType, Real};
pub use tape::{GradFilter, Gradients, NamedGrads, Tape, Var, IGNORE_INDEX};
pub use tensor::Tensor;

/// Layer-norm epsilon used throughout the model.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[cfg(test)]
mod tests;
