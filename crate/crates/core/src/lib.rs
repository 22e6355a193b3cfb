//! Classification-driven dynamic image enhancement.
//!
//! Classical edge-aware filters produce target luminance images, a small
//! filter-generating network learns one enhancement kernel per input image
//! jointly with a classifier, and several enhancement streams are fused with
//! weights derived from their reconstruction errors.

pub mod error;
pub mod autonet;
pub mod classify;
pub mod dataio;
pub mod dynenh;
pub mod enhance;
pub mod imgcore;
pub mod pipeline;

pub use error::{Error, Result};
