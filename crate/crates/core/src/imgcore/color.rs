//! RGB and full-range BT.601 YCbCr with zero-centered chroma.

use super::Plane;
use crate::error::Result;

const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;
const CB_SCALE: f64 = 0.564;
const CR_SCALE: f64 = 0.713;

/// Three equally sized planes in R, G, B order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    channels: [Plane; 3],
}

impl ImageRgb {
    pub fn new(r: Plane, g: Plane, b: Plane) -> Result<Self> {
        r.ensure_same_dims(&g)?;
        r.ensure_same_dims(&b)?;
        Ok(Self { channels: [r, g, b] })
    }

    pub fn from_gray(p: &Plane) -> Self {
        Self { channels: [p.clone(), p.clone(), p.clone()] }
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        Self { channels: rgb.map(|v| Plane::filled(height, width, v)) }
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    pub fn channel(&self, i: usize) -> &Plane {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Plane; 3] {
        &self.channels
    }

    pub fn into_channels(self) -> [Plane; 3] {
        self.channels
    }

    pub fn map_channels(&self, f: impl Fn(&Plane) -> Plane) -> ImageRgb {
        ImageRgb { channels: [f(&self.channels[0]), f(&self.channels[1]), f(&self.channels[2])] }
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<ImageRgb> {
        Ok(ImageRgb {
            channels: [
                self.channels[0].crop(top, left, height, width)?,
                self.channels[1].crop(top, left, height, width)?,
                self.channels[2].crop(top, left, height, width)?,
            ],
        })
    }

    pub fn flip_horizontal(&self) -> ImageRgb {
        self.map_channels(Plane::flip_horizontal)
    }

    pub fn resize_bilinear(&self, height: usize, width: usize) -> ImageRgb {
        self.map_channels(|p| p.resize_bilinear(height, width))
    }

    pub fn max_abs_diff(&self, other: &ImageRgb) -> Result<f64> {
        let mut m = 0.0f64;
        for (a, b) in self.channels.iter().zip(&other.channels) {
            m = m.max(a.max_abs_diff(b)?);
        }
        Ok(m)
    }
}

/// Luma in `[0, 1]` and chroma in `[-0.5, 0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct YCbCr {
    pub y: Plane,
    pub cb: Plane,
    pub cr: Plane,
}

impl YCbCr {
    pub fn new(y: Plane, cb: Plane, cr: Plane) -> Result<Self> {
        y.ensure_same_dims(&cb)?;
        y.ensure_same_dims(&cr)?;
        Ok(Self { y, cb, cr })
    }

    /// Same chroma, new luma.
    pub fn with_luma(&self, y: Plane) -> Result<YCbCr> {
        YCbCr::new(y, self.cb.clone(), self.cr.clone())
    }
}

pub fn rgb_to_ycbcr(img: &ImageRgb) -> YCbCr {
    let (h, w) = img.dims();
    let n = h * w;
    let (mut y, mut cb, mut cr) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let [r, g, b] = img.channels();
    for i in 0..n {
        let (rv, gv, bv) = (
            r.data()[i].clamp(0.0, 1.0),
            g.data()[i].clamp(0.0, 1.0),
            b.data()[i].clamp(0.0, 1.0),
        );
        let luma = KR * rv + KG * gv + KB * bv;
        y.push(luma);
        cb.push(CB_SCALE * (bv - luma));
        cr.push(CR_SCALE * (rv - luma));
    }
    YCbCr {
        y: Plane::new(h, w, y).expect("sizes agree"),
        cb: Plane::new(h, w, cb).expect("sizes agree"),
        cr: Plane::new(h, w, cr).expect("sizes agree"),
    }
}

/// Exact algebraic inverse of [`rgb_to_ycbcr`] without the final clamp.
///
/// Every output channel has unit derivative with respect to luma, which is
/// what lets classification gradients reach the luminance plane.
pub fn ycbcr_to_rgb_unclamped(img: &YCbCr) -> ImageRgb {
    let (h, w) = img.y.dims();
    let n = h * w;
    let (mut r, mut g, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let luma = img.y.data()[i];
        let rv = luma + img.cr.data()[i] / CR_SCALE;
        let bv = luma + img.cb.data()[i] / CB_SCALE;
        let gv = (luma - KR * rv - KB * bv) / KG;
        r.push(rv);
        g.push(gv);
        b.push(bv);
    }
    ImageRgb {
        channels: [
            Plane::new(h, w, r).expect("sizes agree"),
            Plane::new(h, w, g).expect("sizes agree"),
            Plane::new(h, w, b).expect("sizes agree"),
        ],
    }
}

pub fn ycbcr_to_rgb(img: &YCbCr) -> ImageRgb {
    ycbcr_to_rgb_unclamped(img).map_channels(Plane::clamp01)
}

/// Luma-only conversion, the same weights as [`rgb_to_ycbcr`].
pub fn luminance(img: &ImageRgb) -> Plane {
    rgb_to_ycbcr(img).y
}
