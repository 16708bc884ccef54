//! Dense two-dimensional tensors with hand-written reverse-mode gradients for
//! the handful of primitives the model uses.

mod gradcheck;
mod ops;
mod tensor;

pub use gradcheck::{gradcheck, GradcheckReport, DEFAULT_EPS};
pub use ops::{
    dropout, dropout_backward, leaky_relu, leaky_relu_backward, linear, linear_backward, matmul,
    matmul_backward, matmul_with, sigmoid, sigmoid_backward, sparse_dense_matmul,
    sparse_dense_matmul_backward, sparse_dense_matmul_with, DropoutMask, SIGMOID_CLAMP,
};
pub use tensor::{Param, Scalar, Tensor2};
