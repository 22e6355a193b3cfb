//! Target generation: classical enhancement methods applied to luminance.
//!
//! The three smoothing filters (WLS, bilateral, guided) produce a base layer
//! that is turned into a detail-boosted target `base + c * (y - base)`;
//! histogram equalization and unsharp masking are used as-is.

pub mod cg;
mod edge_aware;
mod tonal;
mod wls;

use std::fmt;
use std::str::FromStr;

pub use edge_aware::{bilateral, guided};
pub use tonal::{hist_equalize, unsharp, HIST_BINS};
pub use wls::{smoothness_weights, wls_smooth, wls_smooth_with, WlsSystem, WlsWeights};

use crate::error::{Error, Result};
use crate::imgcore::Plane;

/// The `K = 5` enhancement methods, in stream order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnhanceMethod {
    Bf,
    Wls,
    Gf,
    HistEq,
    Imsharp,
}

impl EnhanceMethod {
    pub const ALL: [EnhanceMethod; 5] =
        [EnhanceMethod::Bf, EnhanceMethod::Wls, EnhanceMethod::Gf, EnhanceMethod::HistEq, EnhanceMethod::Imsharp];

    pub fn name(self) -> &'static str {
        match self {
            EnhanceMethod::Bf => "bf",
            EnhanceMethod::Wls => "wls",
            EnhanceMethod::Gf => "gf",
            EnhanceMethod::HistEq => "histeq",
            EnhanceMethod::Imsharp => "imsharp",
        }
    }

    /// Zero-based stream index.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&m| m == self).expect("listed")
    }
}

impl fmt::Display for EnhanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnhanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown enhancement method {s:?} (expected bf, wls, gf, histeq or imsharp)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhanceParams {
    pub wls_lambda: f64,
    pub wls_alpha: f64,
    pub wls_eps: f64,
    /// Detail gain `c` for the smoothing-based targets.
    pub detail_boost_c: f64,
    /// Spatial sigma as a fraction of the image diagonal.
    pub bf_sigma_spatial_frac: f64,
    /// Range sigma as a fraction of the luminance standard deviation.
    pub bf_sigma_range_frac: f64,
    /// Window radius as a fraction of `min(h, w)`.
    pub gf_radius_frac: f64,
    /// Regularizer as a fraction of the luminance variance.
    pub gf_eps_frac: f64,
    pub sharp_amount: f64,
    pub sharp_radius: f64,
}

impl Default for EnhanceParams {
    fn default() -> Self {
        Self {
            wls_lambda: 0.125,
            wls_alpha: 1.2,
            wls_eps: 1e-4,
            detail_boost_c: 1.2,
            bf_sigma_spatial_frac: 0.02,
            bf_sigma_range_frac: 0.5,
            gf_radius_frac: 0.04,
            gf_eps_frac: 0.01,
            sharp_amount: 2.0,
            sharp_radius: 1.0,
        }
    }
}

const GF_EPS_FLOOR: f64 = 1e-4;
const BF_RANGE_FLOOR: f64 = 1e-3;
const BF_SPATIAL_FLOOR: f64 = 0.5;

impl EnhanceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wls_alpha", self.wls_alpha),
            ("wls_eps", self.wls_eps),
            ("bf_sigma_spatial_frac", self.bf_sigma_spatial_frac),
            ("bf_sigma_range_frac", self.bf_sigma_range_frac),
            ("gf_radius_frac", self.gf_radius_frac),
            ("gf_eps_frac", self.gf_eps_frac),
            ("sharp_radius", self.sharp_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative =
            [("wls_lambda", self.wls_lambda), ("detail_boost_c", self.detail_boost_c), ("sharp_amount", self.sharp_amount)];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Canonical `key=value` lines; identical params give identical text.
    pub fn fingerprint(&self) -> String {
        format!(
            "wls_lambda={:?}\nwls_alpha={:?}\nwls_eps={:?}\ndetail_boost_c={:?}\nbf_sigma_spatial_frac={:?}\n\
             bf_sigma_range_frac={:?}\ngf_radius_frac={:?}\ngf_eps_frac={:?}\nsharp_amount={:?}\nsharp_radius={:?}\n",
            self.wls_lambda,
            self.wls_alpha,
            self.wls_eps,
            self.detail_boost_c,
            self.bf_sigma_spatial_frac,
            self.bf_sigma_range_frac,
            self.gf_radius_frac,
            self.gf_eps_frac,
            self.sharp_amount,
            self.sharp_radius
        )
    }

    /// Bilateral `(sigma_s, sigma_r)` adapted to this image.
    pub fn bilateral_sigmas(&self, y: &Plane) -> (f64, f64) {
        let (h, w) = y.dims();
        let diagonal = ((h * h + w * w) as f64).sqrt();
        let sigma_s = (self.bf_sigma_spatial_frac * diagonal).max(BF_SPATIAL_FLOOR);
        let sigma_r = (self.bf_sigma_range_frac * y.std_dev()).max(BF_RANGE_FLOOR);
        (sigma_s, sigma_r)
    }

    /// Guided-filter `(radius, eps)` adapted to this image.
    pub fn guided_params(&self, y: &Plane) -> (usize, f64) {
        let side = y.height().min(y.width()) as f64;
        let radius = (self.gf_radius_frac * side).round().max(1.0) as usize;
        let eps = (self.gf_eps_frac * y.variance()).max(GF_EPS_FLOOR);
        (radius, eps)
    }
}

fn detail_boost(y: &Plane, base: &Plane, c: f64) -> Result<Plane> {
    y.zip_map(base, |v, b| (b + c * (v - b)).clamp(0.0, 1.0))
}

/// The smoothing output a detail-boosted target is built from.
pub fn smoothing_base(method: EnhanceMethod, y: &Plane, params: &EnhanceParams) -> Result<Option<Plane>> {
    Ok(match method {
        EnhanceMethod::Wls => Some(wls_smooth(y, params.wls_lambda, params.wls_alpha, params.wls_eps)?),
        EnhanceMethod::Bf => {
            let (s, r) = params.bilateral_sigmas(y);
            Some(bilateral(y, s, r)?)
        }
        EnhanceMethod::Gf => {
            let (radius, eps) = params.guided_params(y);
            Some(guided(y, y, radius, eps)?)
        }
        EnhanceMethod::HistEq | EnhanceMethod::Imsharp => None,
    })
}

pub fn make_target(method: EnhanceMethod, y: &Plane, params: &EnhanceParams) -> Result<Plane> {
    params.validate()?;
    match smoothing_base(method, y, params)? {
        Some(base) => detail_boost(y, &base, params.detail_boost_c),
        None => match method {
            EnhanceMethod::HistEq => Ok(hist_equalize(y)),
            EnhanceMethod::Imsharp => unsharp(y, params.sharp_radius, params.sharp_amount),
            _ => unreachable!("smoothing methods return a base"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn method_names_round_trip() {
        for (i, m) in EnhanceMethod::ALL.into_iter().enumerate() {
            assert_eq!(m.name().parse::<EnhanceMethod>().unwrap(), m);
            assert_eq!(m.index(), i);
        }
        assert!("sharpen".parse::<EnhanceMethod>().is_err());
    }

    #[test]
    fn all_methods_fix_constants() {
        let y = Plane::filled(24, 20, 0.45);
        for m in EnhanceMethod::ALL {
            let t = make_target(m, &y, &EnhanceParams::default()).unwrap();
            assert!(t.max_abs_diff(&y).unwrap() < 1e-9, "{m}");
        }
    }

    #[test]
    fn imsharp_zero_amount_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let y = Plane::from_fn(16, 16, |_, _| rng.gen());
        let params = EnhanceParams { sharp_amount: 0.0, ..Default::default() };
        assert_eq!(make_target(EnhanceMethod::Imsharp, &y, &params).unwrap(), y);
    }

    #[test]
    fn targets_stay_in_unit_range_and_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let y = Plane::from_fn(32, 32, |_, _| rng.gen());
        for m in EnhanceMethod::ALL {
            let t = make_target(m, &y, &EnhanceParams::default()).unwrap();
            let (lo, hi) = t.min_max();
            assert!(lo >= 0.0 && hi <= 1.0, "{m}");
            let again = make_target(m, &y, &EnhanceParams::default()).unwrap();
            assert_eq!(t.data(), again.data(), "{m}");
        }
    }

    #[test]
    fn smoothing_keeps_step_location() {
        let y = Plane::from_fn(24, 32, |r, c| if c < 13 { 0.25 } else { 0.7 } + 0.01 * ((r * 7 + c * 3) % 5) as f64);
        let strongest = |p: &Plane| {
            (0..p.width() - 1)
                .max_by(|&a, &b| {
                    let ga: f64 = (0..p.height()).map(|r| (p.get(r, a + 1) - p.get(r, a)).abs()).sum();
                    let gb: f64 = (0..p.height()).map(|r| (p.get(r, b + 1) - p.get(r, b)).abs()).sum();
                    ga.partial_cmp(&gb).unwrap()
                })
                .unwrap()
        };
        for m in [EnhanceMethod::Wls, EnhanceMethod::Bf, EnhanceMethod::Gf] {
            let base = smoothing_base(m, &y, &EnhanceParams::default()).unwrap().unwrap();
            assert_eq!(strongest(&base), strongest(&y), "{m}");
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = EnhanceParams { gf_eps_frac: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = EnhanceParams { detail_boost_c: -1.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
