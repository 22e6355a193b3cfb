use super::Plane;
use crate::error::{Error, Result};

/// Correlation of `p` with `kernel` (no kernel flip), replicate padding.
///
/// `out(i, j) = sum_{u,v} kernel(u, v) * p(i + u - anchor.0, j + v - anchor.1)`.
pub fn convolve2d(p: &Plane, kernel: &Plane, anchor: (usize, usize)) -> Result<Plane> {
    let (kh, kw) = kernel.dims();
    if kh > p.height() || kw > p.width() {
        return Err(Error::dim(format!(
            "kernel {kh}x{kw} larger than plane {}x{}",
            p.height(),
            p.width()
        )));
    }
    if anchor.0 >= kh || anchor.1 >= kw {
        return Err(Error::dim(format!("anchor {anchor:?} outside kernel {kh}x{kw}")));
    }
    let (h, w) = p.dims();
    let (ar, ac) = (anchor.0 as isize, anchor.1 as isize);
    let mut out = vec![0.0; h * w];
    // Interior rows/cols read without clamping.
    let safe_r = ar as usize..(h + ar as usize).saturating_sub(kh - 1).max(ar as usize);
    let safe_c = ac as usize..(w + ac as usize).saturating_sub(kw - 1).max(ac as usize);
    let src = p.data();
    for i in 0..h {
        let row_safe = safe_r.contains(&i);
        for j in 0..w {
            let mut acc = 0.0;
            if row_safe && safe_c.contains(&j) {
                for u in 0..kh {
                    let base = (i + u - anchor.0) * w + j - anchor.1;
                    let krow = &kernel.data()[u * kw..(u + 1) * kw];
                    for (v, &k) in krow.iter().enumerate() {
                        acc += k * src[base + v];
                    }
                }
            } else {
                for u in 0..kh {
                    for v in 0..kw {
                        acc += kernel.get(u, v)
                            * p.get_clamped(i as isize + u as isize - ar, j as isize + v as isize - ac);
                    }
                }
            }
            out[i * w + j] = acc;
        }
    }
    Plane::new(h, w, out)
}

/// Mean over `(2r+1)^2` windows with replicate padding, `O(hw)` via running sums.
pub fn box_filter(p: &Plane, radius: usize) -> Plane {
    if radius == 0 {
        return p.clone();
    }
    let (h, w) = p.dims();
    let horizontal = running_mean_rows(p.data(), h, w, radius);
    let transposed = transpose(&horizontal, h, w);
    let vertical = running_mean_rows(&transposed, w, h, radius);
    Plane::new(h, w, transpose(&vertical, w, h)).expect("sizes agree")
}

fn running_mean_rows(src: &[f64], rows: usize, cols: usize, radius: usize) -> Vec<f64> {
    let window = 2 * radius + 1;
    let scale = 1.0 / window as f64;
    let mut out = vec![0.0; rows * cols];
    let mut prefix = vec![0.0; cols + 2 * radius + 1];
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        // prefix[k] = sum of the first k padded samples
        let mut acc = 0.0;
        for k in 0..cols + 2 * radius {
            let idx = (k as isize - radius as isize).clamp(0, cols as isize - 1) as usize;
            acc += row[idx];
            prefix[k + 1] = acc;
        }
        for c in 0..cols {
            out[r * cols + c] = (prefix[c + window] - prefix[c]) * scale;
        }
    }
    out
}

fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

/// Normalized 1-D Gaussian taps truncated at `ceil(3 sigma)`.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|k| {
            let d = k as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian blur, window truncated at `3 sigma`, replicate padding.
pub fn gaussian_blur(p: &Plane, sigma: f64) -> Plane {
    let taps = gaussian_taps(sigma);
    let radius = (taps.len() / 2) as isize;
    let (h, w) = p.dims();
    let mut tmp = Plane::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let acc: f64 = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * p.get_clamped(i as isize, j as isize + k as isize - radius))
                .sum();
            tmp.set(i, j, acc);
        }
    }
    let mut out = Plane::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let acc: f64 = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp.get_clamped(i as isize + k as isize - radius, j as isize))
                .sum();
            out.set(i, j, acc);
        }
    }
    out
}

pub fn mse(a: &Plane, b: &Plane) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// Peak-1.0 PSNR in dB; identical planes give `f64::INFINITY`.
pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / m).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Plane {
        Plane::from_fn(h, w, |_, _| rng.gen())
    }

    fn naive_box(p: &Plane, r: usize) -> Plane {
        let r = r as isize;
        let n = ((2 * r + 1) * (2 * r + 1)) as f64;
        Plane::from_fn(p.height(), p.width(), |i, j| {
            let mut s = 0.0;
            for du in -r..=r {
                for dv in -r..=r {
                    s += p.get_clamped(i as isize + du, j as isize + dv);
                }
            }
            s / n
        })
    }

    #[test]
    fn unit_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_plane(&mut rng, 7, 5);
        let k = Plane::filled(1, 1, 1.0);
        assert_eq!(convolve2d(&p, &k, (0, 0)).unwrap(), p);
    }

    #[test]
    fn unit_sum_kernel_preserves_constant() {
        let p = Plane::filled(6, 6, 0.37);
        let k = Plane::new(2, 3, vec![0.1, 0.2, 0.3, 0.15, 0.05, 0.2]).unwrap();
        let out = convolve2d(&p, &k, (1, 2)).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn box_kernel_center_is_mean() {
        let p = Plane::from_fn(3, 3, |r, c| (r * 3 + c) as f64);
        let k = Plane::filled(3, 3, 1.0 / 9.0);
        let out = convolve2d(&p, &k, (1, 1)).unwrap();
        assert!((out.get(1, 1) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_convention() {
        // Shift kernel: a single 1 at (0,0) with anchor (1,1) reads p(i-1, j-1).
        let p = Plane::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let mut k = Plane::zeros(3, 3);
        k.set(0, 0, 1.0);
        let out = convolve2d(&p, &k, (1, 1)).unwrap();
        assert_eq!(out.get(2, 2), p.get(1, 1));
        assert_eq!(out.get(0, 0), p.get(0, 0));
    }

    #[test]
    fn convolve_rejects_bad_shapes() {
        let p = Plane::zeros(2, 2);
        assert!(convolve2d(&p, &Plane::zeros(3, 1), (0, 0)).is_err());
        assert!(convolve2d(&p, &Plane::zeros(2, 2), (2, 0)).is_err());
    }

    #[test]
    fn convolve_is_linear_in_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_plane(&mut rng, 9, 11);
        let k1 = Plane::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let k2 = Plane::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let (a, b) = (0.7, -1.3);
        let combo = k1.zip_map(&k2, |x, y| a * x + b * y).unwrap();
        let lhs = convolve2d(&p, &combo, (2, 1)).unwrap();
        let r1 = convolve2d(&p, &k1, (2, 1)).unwrap();
        let r2 = convolve2d(&p, &k2, (2, 1)).unwrap();
        let rhs = r1.zip_map(&r2, |x, y| a * x + b * y).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn box_radius_zero_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_plane(&mut rng, 5, 8);
        assert_eq!(box_filter(&p, 0), p);
        let c = Plane::filled(6, 4, 0.25);
        assert!(box_filter(&c, 3).data().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn box_matches_naive_16x16_r2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_plane(&mut rng, 16, 16);
        assert!(box_filter(&p, 2).max_abs_diff(&naive_box(&p, 2)).unwrap() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]
        #[test]
        fn box_fast_equals_naive(h in 1usize..24, w in 1usize..24, r in 0usize..9, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_plane(&mut rng, h, w);
            prop_assert!(box_filter(&p, r).max_abs_diff(&naive_box(&p, r)).unwrap() < 1e-10);
        }
    }

    #[test]
    fn mse_and_psnr() {
        let a = Plane::zeros(4, 4);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!((mse(&a, &Plane::filled(4, 4, 0.5)).unwrap() - 0.25).abs() < 1e-15);
        assert!((psnr(&a, &Plane::filled(4, 4, 0.1)).unwrap() - 20.0).abs() < 1e-9);
        assert!(mse(&a, &Plane::zeros(3, 4)).is_err());
    }

    #[test]
    fn gaussian_taps_normalized_and_symmetric() {
        let t = gaussian_taps(1.0);
        assert_eq!(t.len(), 7);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for k in 0..3 {
            assert_eq!(t[k], t[6 - k]);
        }
    }
}
