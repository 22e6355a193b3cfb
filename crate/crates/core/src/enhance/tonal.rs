use crate::error::{Error, Result};
use crate::imgcore::{gaussian_blur, Plane};

pub const HIST_BINS: usize = 256;

fn bin_of(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * HIST_BINS as f64) as usize).min(HIST_BINS - 1)
}

/// Global histogram equalization over 256 bins.
///
/// `out = (cdf(bin(v)) - cdf_min) / (1 - cdf_min)` with `cdf_min` the smallest
/// nonzero CDF value. A single occupied bin leaves the input unchanged.
pub fn hist_equalize(y: &Plane) -> Plane {
    let mut counts = [0usize; HIST_BINS];
    for &v in y.data() {
        counts[bin_of(v)] += 1;
    }
    let n = y.len() as f64;
    let mut cdf = [0.0; HIST_BINS];
    let mut acc = 0usize;
    for (c, count) in cdf.iter_mut().zip(counts) {
        acc += count;
        *c = acc as f64 / n;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0.0).unwrap_or(1.0);
    if cdf_min >= 1.0 {
        return y.clone();
    }
    y.map(|v| (cdf[bin_of(v)] - cdf_min) / (1.0 - cdf_min))
}

/// Unsharp masking: `clamp(y + amount * (y - gaussian(y, radius)), 0, 1)`.
pub fn unsharp(y: &Plane, radius: f64, amount: f64) -> Result<Plane> {
    if !(radius > 0.0) {
        return Err(Error::param(format!("unsharp radius must be positive, got {radius}")));
    }
    let blurred = gaussian_blur(y, radius);
    y.zip_map(&blurred, |v, b| (v + amount * (v - b)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn histeq_constant_unchanged() {
        let y = Plane::filled(5, 5, 0.37);
        assert_eq!(hist_equalize(&y), y);
    }

    #[test]
    fn histeq_two_levels() {
        let y = Plane::from_fn(4, 4, |r, _| if r < 2 { 0.0 } else { 1.0 });
        assert_eq!(hist_equalize(&y), y);
    }

    #[test]
    fn histeq_flattens_uniform_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let y = Plane::from_fn(256, 256, |_, _| rng.gen());
        let out = hist_equalize(&y);
        let mut buckets = [0usize; 16];
        for &v in out.data() {
            buckets[((v * 16.0) as usize).min(15)] += 1;
        }
        let expected = out.len() as f64 / 16.0;
        for (k, &b) in buckets.iter().enumerate() {
            assert!(((b as f64 - expected) / expected).abs() < 0.05, "bucket {k}: {b}");
        }
    }

    #[test]
    fn unsharp_identities() {
        let c = Plane::filled(8, 8, 0.6);
        assert!(unsharp(&c, 1.0, 2.0).unwrap().max_abs_diff(&c).unwrap() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let y = Plane::from_fn(8, 8, |_, _| rng.gen());
        assert_eq!(unsharp(&y, 1.0, 0.0).unwrap(), y);
        assert!(unsharp(&y, 0.0, 1.0).is_err());
    }

    #[test]
    fn unsharp_step_overshoot() {
        let y = Plane::from_fn(16, 32, |_, c| if c < 16 { 0.2 } else { 0.8 });
        let out = unsharp(&y, 1.0, 2.0).unwrap();
        // First bright column: blur is 0.8 - 0.6 * (mass left of the edge) ~ 0.62,
        // so the raw response 0.8 + 2 * 0.18 exceeds 1 and clamps.
        assert_eq!(out.get(8, 16), 1.0);
        assert_eq!(out.get(8, 15), 0.0);
        for r in 0..16 {
            for c in (0..10).chain(22..32) {
                assert!((out.get(r, c) - y.get(r, c)).abs() < 1e-9);
            }
        }
    }
}
