//! A small reverse-mode network engine: conv, fully-connected, ReLU, max-pool
//! and flatten layers over `f64`, softmax cross-entropy, SGD and checkpoints.
//!
//! Networks process one sample at a time; mini-batches are formed by the
//! callers, which reduce per-sample gradients in sample order.

pub mod checkpoint;
mod gemm;
pub mod gradcheck;
mod layers;
mod loss;
mod network;
mod params;
mod sgd;
mod tensor;

pub use layers::{reference, ConvGeom, Layer, LayerSpec, PoolGeom};
pub use loss::{softmax, softmax_cross_entropy};
pub use network::{Backward, Network, Tape};
pub use params::{Block, BlockRole, Gradients, NetParams, ParamLayout};
pub use sgd::{sgd_step, Sgd, SgdConfig};
pub use tensor::Tensor;
