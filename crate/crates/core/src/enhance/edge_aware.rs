use crate::error::{Error, Result};
use crate::imgcore::{box_filter, Plane};

/// Direct bilateral filter over a square window truncated at `3 sigma_s`,
/// replicate padding.
pub fn bilateral(y: &Plane, sigma_s: f64, sigma_r: f64) -> Result<Plane> {
    if !(sigma_s > 0.0 && sigma_r > 0.0) {
        return Err(Error::param(format!("bilateral sigmas must be positive, got {sigma_s}, {sigma_r}")));
    }
    let radius = (3.0 * sigma_s).ceil().max(1.0) as isize;
    let spatial: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma_s * sigma_s)).exp())
        .collect();
    let range_scale = -1.0 / (2.0 * sigma_r * sigma_r);
    let (h, w) = y.dims();
    let out = Plane::from_fn(h, w, |i, j| {
        let center = y.get(i, j);
        let (mut num, mut den) = (0.0, 0.0);
        for (du, ws_u) in (-radius..=radius).zip(&spatial) {
            for (dv, ws_v) in (-radius..=radius).zip(&spatial) {
                let q = y.get_clamped(i as isize + du, j as isize + dv);
                let d = q - center;
                let wgt = ws_u * ws_v * (d * d * range_scale).exp();
                num += wgt * q;
                den += wgt;
            }
        }
        num / den
    });
    Ok(out)
}

/// Guided filter: per-window linear model of `y` on `guide`, averaged over
/// every window covering a pixel. Box filters throughout, so `O(hw)`.
pub fn guided(y: &Plane, guide: &Plane, radius: usize, eps: f64) -> Result<Plane> {
    y.ensure_same_dims(guide)?;
    if !(eps > 0.0) {
        return Err(Error::param(format!("guided filter eps must be positive, got {eps}")));
    }
    let mean_i = box_filter(guide, radius);
    let mean_p = box_filter(y, radius);
    let corr_ii = box_filter(&guide.zip_map(guide, |a, b| a * b)?, radius);
    let corr_ip = box_filter(&guide.zip_map(y, |a, b| a * b)?, radius);

    let n = y.len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for k in 0..n {
        let var = corr_ii.data()[k] - mean_i.data()[k] * mean_i.data()[k];
        let cov = corr_ip.data()[k] - mean_i.data()[k] * mean_p.data()[k];
        a[k] = cov / (var + eps);
        b[k] = mean_p.data()[k] - a[k] * mean_i.data()[k];
    }
    let (h, w) = y.dims();
    let mean_a = box_filter(&Plane::new(h, w, a)?, radius);
    let mean_b = box_filter(&Plane::new(h, w, b)?, radius);
    let mut out = mean_b;
    for ((o, ma), g) in out.data_mut().iter_mut().zip(mean_a.data()).zip(guide.data()) {
        *o += ma * g;
    }
    Ok(out)
}
