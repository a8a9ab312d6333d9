//! Differentiable numeric kernels with hand-written backward passes.

pub mod attention;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod matrix;
pub mod params;
pub mod pool;

pub use attention::{patch_attention, patch_attention_backward, AttentionCache, AttentionGrads, AttentionParams};
pub use conv::{sparse_neighborhood_conv, sparse_neighborhood_conv_backward, NeighborhoodIndex};
pub use dense::{gelu, gelu_backward, layer_norm, layer_norm_backward, linear, linear_backward, softmax, softmax_backward};
pub use gradcheck::{grad_check, run_kernel_suite, GradCheckReport};
pub use loss::cross_entropy;
pub use matrix::FeatureMatrix;
pub use params::{Param, ParamId, ParamKind, ParamStore};
pub use pool::{gather_expand, gather_expand_backward, scatter_max_pool, scatter_max_pool_backward, PoolOutput};
