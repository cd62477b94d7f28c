//! Reference implementations of the benchmarked atomic operations.
//!
//! These kernels are the benchmark subjects for the timing harness and the
//! ground truth the FLOP analytics are checked against. They are pure:
//! identical inputs produce bit-identical outputs.

mod conv;
mod dense;
mod optim;
mod pool;
mod tensor;
mod types;

pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvParams};
pub use dense::{dense_backward, dense_forward, DenseGrads, DenseParams};
pub use optim::{
    optimizer_step, OptimizerState, ADAM_BETA1, ADAM_BETA2, EPSILON, MOMENTUM_MU,
};
pub use pool::maxpool_forward;
pub use tensor::{Matrix, Scalar, Tensor4};
pub use types::{ActivationKind, OptimizerKind};
