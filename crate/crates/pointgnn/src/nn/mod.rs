//! Minimal dense neural-network engine in f64: linear layers with rectifier
//! activations, max aggregation over variable-size groups, exact manual
//! backpropagation, a finite-difference gradient checker and a binary
//! checkpoint container.

mod aggregate;
mod checkpoint;
mod gradcheck;
mod mlp;
mod tensor;

pub use aggregate::{max_aggregate, max_aggregate_backward, GroupIndex};
pub use checkpoint::{load_checkpoint, save_checkpoint, TensorEntry};
pub use gradcheck::grad_check;
pub use mlp::{DenseLayer, MlpCache, MlpParams};
pub use tensor::Tensor2;
