//! Dense NCHW `f64` tensors, the forward kernels a SINet-style network needs,
//! and a tape for reverse-mode gradients over them.

pub mod conv;
pub mod error;
pub mod norm;
pub mod ops;
mod resize;
pub mod tape;
pub mod tensor;

pub use conv::ConvSpec;
pub use error::{Result, TensorError};
pub use norm::{BatchStats, BN_EPS, BN_MOMENTUM};
pub use tape::{Backward, Gradients, Tape, Var};
pub use tensor::{Shape, Tensor};
