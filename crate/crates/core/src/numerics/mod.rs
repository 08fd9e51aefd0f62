//! Dense tensors, reverse-mode gradients, Adam and entropy utilities.

mod adam;
mod entropy;
pub mod gradcheck;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState, WeightDecayMode};
pub use entropy::{clamped_ln, mean_binary_entropy, shannon_entropy, LOG_EPS};
pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{log_sum_exp, sigmoid, softmax, softmax_in_place, GradTape, Gradients, Var};
pub use tensor::Tensor2;
