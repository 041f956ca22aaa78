//! Dense linear algebra, activations, the parameter registry, Adam, the
//! checkpoint format and the finite-difference oracle.

pub mod activations;
pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod matrix;
pub mod params;
pub mod rng;

/// Scalar type for parameters and activations. 64-bit unless the `f32`
/// feature is enabled; gradient checks need 64-bit.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

pub use activations::{sigmoid, sigmoid_matrix, softmax, softmax_backward, softmax_in_place, tanh_matrix, EmptyInput};
pub use adam::{adam_step, AdamConfig, AdamState, NonFiniteGradient};
pub use checkpoint::{load_into, read_tensors, write_checkpoint, CheckpointError};
pub use gradcheck::{compare_gradients, finite_diff_grad, GradCheckReport};
pub use matrix::{axpy, dot, matmul, Matrix, ShapeError};
pub use params::{Grads, Init, ModelParams, ParamId, Parameter, Values};
