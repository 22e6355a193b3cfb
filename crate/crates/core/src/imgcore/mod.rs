//! Planes, color conversion and the spatial filtering primitives every other
//! module builds on.

mod color;
mod filter;
pub mod io;
mod plane;

pub use color::{luminance, rgb_to_ycbcr, ycbcr_to_rgb, ycbcr_to_rgb_unclamped, ImageRgb, YCbCr};
pub use filter::{box_filter, convolve2d, gaussian_blur, gaussian_taps, mse, psnr};
pub use plane::Plane;
