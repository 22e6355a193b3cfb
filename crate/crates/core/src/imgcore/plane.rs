use crate::error::{Error, Result};

/// A row-major 2-D grid of `f64` samples.
///
/// Used for luminance and chroma channels, convolution kernels, targets and
/// residuals alike. Image intensities are nominally in `[0, 1]`; kernels and
/// residuals are unrestricted.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::dim(format!("plane must be non-empty, got {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::dim(format!(
                "plane {height}x{width} needs {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    /// # Panics
    /// If either extent is zero.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "plane must be non-empty");
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "plane must be non-empty");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Sample with replicate (clamp-to-edge) padding.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.data[r * self.width + c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Element-wise combination of two equally sized planes.
    pub fn zip_map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Result<Plane> {
        self.ensure_same_dims(other)?;
        Ok(Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn ensure_same_dims(&self, other: &Plane) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dim(format!(
                "planes differ in size: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    pub fn clamp01(&self) -> Plane {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn max_abs_diff(&self, other: &Plane) -> Result<f64> {
        self.ensure_same_dims(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Copy of the `height x width` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Plane> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::dim(format!(
                "crop {height}x{width}@({top},{left}) outside {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width);
        for r in top..top + height {
            let start = r * self.width + left;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(Plane { height, width, data })
    }

    /// Mirror about the vertical axis (x-axis flip of the image content).
    pub fn flip_horizontal(&self) -> Plane {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks_exact(self.width) {
            data.extend(row.iter().rev());
        }
        Plane { height: self.height, width: self.width, data }
    }

    /// Centered square crop of side `min(h, w)`.
    pub fn center_square(&self) -> Plane {
        let side = self.height.min(self.width);
        let top = (self.height - side) / 2;
        let left = (self.width - side) / 2;
        self.crop(top, left, side, side).expect("square crop fits")
    }

    /// Bilinear resampling with pixel-center alignment and edge clamping.
    /// Returns a copy when the size already matches.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Plane {
        if (height, width) == self.dims() {
            return self.clone();
        }
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        Plane::from_fn(height, width, |r, c| {
            let fy = ((r as f64 + 0.5) * sy - 0.5).max(0.0);
            let fx = ((c as f64 + 0.5) * sx - 0.5).max(0.0);
            let y0 = (fy.floor() as usize).min(self.height - 1);
            let x0 = (fx.floor() as usize).min(self.width - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            let x1 = (x0 + 1).min(self.width - 1);
            let ty = fy - y0 as f64;
            let tx = fx - x0 as f64;
            let top = self.get(y0, x0) * (1.0 - tx) + self.get(y0, x1) * tx;
            let bottom = self.get(y1, x0) * (1.0 - tx) + self.get(y1, x1) * tx;
            top * (1.0 - ty) + bottom * ty
        })
    }
}

impl std::ops::Add for &Plane {
    type Output = Plane;

    fn add(self, rhs: &Plane) -> Plane {
        self.zip_map(rhs, |a, b| a + b).expect("plane sizes must match")
    }
}

impl std::ops::Sub for &Plane {
    type Output = Plane;

    fn sub(self, rhs: &Plane) -> Plane {
        self.zip_map(rhs, |a, b| a - b).expect("plane sizes must match")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Plane::new(0, 3, vec![]).is_err());
        assert!(Plane::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Plane::new(2, 2, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn clamped_access_replicates_edges() {
        let p = Plane::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        assert_eq!(p.get_clamped(-4, -1), 0.0);
        assert_eq!(p.get_clamped(9, 9), 5.0);
        assert_eq!(p.get_clamped(1, -1), 3.0);
    }

    #[test]
    fn flip_is_an_involution() {
        let p = Plane::from_fn(3, 4, |r, c| (r * 7 + c * c) as f64);
        assert_ne!(p.flip_horizontal(), p);
        assert_eq!(p.flip_horizontal().flip_horizontal(), p);
    }

    #[test]
    fn resize_to_same_size_is_copy() {
        let p = Plane::from_fn(5, 5, |r, c| (r + c) as f64 * 0.1);
        assert_eq!(p.resize_bilinear(5, 5), p);
        let down = p.resize_bilinear(2, 3);
        assert_eq!(down.dims(), (2, 3));
    }
}
