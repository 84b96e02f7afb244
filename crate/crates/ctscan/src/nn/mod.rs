//! Minimal dense/convolutional kernels with exact analytic gradients,
//! plus the Adam optimizer. No autodiff graph: every layer exposes a
//! forward and a matching hand-written backward.

mod adam;
mod layers;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use layers::{
    conv2d, conv2d_backward, dense, dense_backward, group_norm, group_norm_backward, leaky_relu,
    leaky_relu_backward, max_pool2, max_pool2_backward, softmax, GroupNormCache, PoolCache,
    GN_EPS, LEAKY_SLOPE,
};
pub use tensor::Tensor;
