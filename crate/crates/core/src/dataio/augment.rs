use rand::Rng;

use crate::error::{Error, Result};
use crate::imgcore::{ImageRgb, Plane};

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub crop_extent: usize,
    pub enable_flips: bool,
    /// Per-channel gains are drawn from `[1 - j, 1 + j]`.
    pub jitter_strength: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { crop_extent: 64, enable_flips: true, jitter_strength: 0.0 }
    }
}

impl AugmentConfig {
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.crop_extent == 0 || self.crop_extent > height.min(width) {
            return Err(Error::param(format!("crop extent {} does not fit a {height}x{width} image", self.crop_extent)));
        }
        if !(0.0..1.0).contains(&self.jitter_strength) {
            return Err(Error::param(format!("jitter strength must lie in [0, 1), got {}", self.jitter_strength)));
        }
        Ok(())
    }
}

/// The five crop anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CropPosition {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    Center,
}

impl CropPosition {
    pub const ALL: [CropPosition; 5] =
        [Self::TopLeft, Self::TopRight, Self::BottomLeft, Self::BottomRight, Self::Center];

    pub fn origin(self, height: usize, width: usize, extent: usize) -> (usize, usize) {
        let (dh, dw) = (height - extent, width - extent);
        match self {
            Self::TopLeft => (0, 0),
            Self::TopRight => (0, dw),
            Self::BottomLeft => (dh, 0),
            Self::BottomRight => (dh, dw),
            Self::Center => (dh / 2, dw / 2),
        }
    }
}

/// One random draw, reusable for an image and all of its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentDraw {
    pub position: CropPosition,
    pub flip: bool,
    pub gains: [f64; 3],
}

impl AugmentDraw {
    /// Center crop, no flip, unit gains.
    pub fn evaluation() -> Self {
        Self { position: CropPosition::Center, flip: false, gains: [1.0; 3] }
    }

    pub fn sample<R: Rng>(cfg: &AugmentConfig, rng: &mut R) -> Self {
        let position = CropPosition::ALL[rng.gen_range(0..5)];
        let flip = cfg.enable_flips && rng.gen_bool(0.5);
        let j = cfg.jitter_strength;
        let gains = if j > 0.0 { [0; 3].map(|_| rng.gen_range(1.0 - j..=1.0 + j)) } else { [1.0; 3] };
        Self { position, flip, gains }
    }

    /// Crop and flip only.
    pub fn apply_geometry(&self, p: &Plane, extent: usize) -> Result<Plane> {
        let (top, left) = self.position.origin(p.height(), p.width(), extent);
        let out = p.crop(top, left, extent, extent)?;
        Ok(if self.flip { out.flip_horizontal() } else { out })
    }

    pub fn apply(&self, img: &ImageRgb, extent: usize) -> Result<ImageRgb> {
        let (h, w) = img.dims();
        let (top, left) = self.position.origin(h, w, extent);
        let mut out = img.crop(top, left, extent, extent)?;
        if self.flip {
            out = out.flip_horizontal();
        }
        if self.gains != [1.0; 3] {
            let [r, g, b] = out.into_channels();
            let [gr, gg, gb] = self.gains;
            out = ImageRgb::new(
                r.map(|v| (v * gr).clamp(0.0, 1.0)),
                g.map(|v| (v * gg).clamp(0.0, 1.0)),
                b.map(|v| (v * gb).clamp(0.0, 1.0)),
            )?;
        }
        Ok(out)
    }
}

/// Draw and apply in one step.
pub fn augment<R: Rng>(img: &ImageRgb, cfg: &AugmentConfig, rng: &mut R) -> Result<(ImageRgb, AugmentDraw)> {
    let (h, w) = img.dims();
    cfg.validate(h, w)?;
    let draw = AugmentDraw::sample(cfg, rng);
    Ok((draw.apply(img, cfg.crop_extent)?, draw))
}
