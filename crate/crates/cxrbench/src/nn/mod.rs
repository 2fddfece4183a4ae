//! Minimal dense neural-network building blocks.
//!
//! Just enough machinery to train the built-in convolutional backbone on a
//! CPU: an HWC tensor, conv / dense / pooling / dropout layers with explicit
//! backward passes, and an Adam optimizer that applies per-group learning
//! rates. f64 throughout so weight snapshots restore bit-exactly.

mod adam;
mod layers;
mod tensor;

pub use adam::{Adam, ParamGroup, ParamSlot};
pub use layers::{
    dropout_mask, gap_backward, gap_forward, relu_backward, relu_forward, Conv2d, Dense,
};
pub use tensor::Tensor3;
