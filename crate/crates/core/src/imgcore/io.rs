//! 8-bit PNG/PPM image files and the `P-PLANE` binary plane format.
//!
//! `P-PLANE` files start with the ASCII line `P-PLANE <h> <w>\n`, followed by
//! `h * w` little-endian `f64` samples in row-major order.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{GrayImage, RgbImage};

use super::{ImageRgb, Plane};
use crate::error::{Error, Result};

const PLANE_MAGIC: &str = "P-PLANE";

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn read_image(path: &Path) -> Result<ImageRgb> {
    let img = image::open(path)
        .map_err(|source| Error::Image { path: path.to_path_buf(), source })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut chans = [Vec::with_capacity(w * h), Vec::with_capacity(w * h), Vec::with_capacity(w * h)];
    for px in img.pixels() {
        for (c, chan) in chans.iter_mut().enumerate() {
            chan.push(px[c] as f64 / 255.0);
        }
    }
    let [r, g, b] = chans;
    ImageRgb::new(Plane::new(h, w, r)?, Plane::new(h, w, g)?, Plane::new(h, w, b)?)
}

/// Format follows the extension (`.png`, `.ppm`).
pub fn write_image(path: &Path, img: &ImageRgb) -> Result<()> {
    let (h, w) = img.dims();
    let mut out = RgbImage::new(w as u32, h as u32);
    for r in 0..h {
        for c in 0..w {
            let px = [0, 1, 2].map(|k| to_u8(img.channel(k).get(r, c)));
            out.put_pixel(c as u32, r as u32, image::Rgb(px));
        }
    }
    out.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

pub fn write_gray(path: &Path, p: &Plane) -> Result<()> {
    let (h, w) = p.dims();
    let mut out = GrayImage::new(w as u32, h as u32);
    for r in 0..h {
        for c in 0..w {
            out.put_pixel(c as u32, r as u32, image::Luma([to_u8(p.get(r, c))]));
        }
    }
    out.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

/// Quantize to 8 bits and back, exactly as a write/read cycle would.
pub fn quantize_8bit(img: &ImageRgb) -> ImageRgb {
    img.map_channels(|p| p.map(|v| to_u8(v) as f64 / 255.0))
}

pub fn encode_plane(p: &Plane) -> Vec<u8> {
    let header = format!("{PLANE_MAGIC} {} {}\n", p.height(), p.width());
    let mut bytes = Vec::with_capacity(header.len() + 8 * p.len());
    bytes.extend_from_slice(header.as_bytes());
    for v in p.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

pub fn decode_plane(bytes: &[u8]) -> Result<Plane> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("P-PLANE header not terminated".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format("P-PLANE header is not ASCII".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(PLANE_MAGIC) {
        return Err(Error::Format(format!("bad P-PLANE magic in header {header:?}")));
    }
    let mut dim = || -> Result<usize> {
        parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad P-PLANE dimensions in header {header:?}")))
    };
    let (h, w) = (dim()?, dim()?);
    let body = &bytes[nl + 1..];
    if body.len() != 8 * h * w {
        return Err(Error::Format(format!("P-PLANE body has {} bytes, expected {}", body.len(), 8 * h * w)));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Plane::new(h, w, data)
}

pub fn write_plane(path: &Path, p: &Plane) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    f.write_all(&encode_plane(p))?;
    f.flush()?;
    Ok(())
}

pub fn read_plane(path: &Path) -> Result<Plane> {
    let bytes = fs::read(path)?;
    decode_plane(&bytes).map_err(|e| Error::data(path, e.to_string()))
}
