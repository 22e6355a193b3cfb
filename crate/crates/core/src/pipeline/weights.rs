use crate::classify::Prediction;
use crate::error::{Error, Result};

/// Fusion weights of `K` enhancement streams; the RGB stream always has 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamWeights {
    pub w: Vec<f64>,
    pub w_rgb: f64,
}

impl StreamWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::param(format!("stream weights must be positive and finite, got {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("stream weights must sum to 1, got {sum}")));
        }
        Ok(Self { w, w_rgb: 1.0 })
    }

    pub fn equal(k: usize) -> Self {
        Self { w: vec![1.0 / k as f64; k], w_rgb: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `w_1..w_K` followed by the RGB weight.
    pub fn with_rgb(&self) -> Vec<f64> {
        let mut v = self.w.clone();
        v.push(self.w_rgb);
        v
    }
}

/// Turns reconstruction errors into fusion weights: the smallest error gets
/// the largest weight and no stream ends at zero.
///
/// 1. normalize by the sum;
/// 2. map linearly so the largest value becomes 0 and the smallest 1;
/// 3. with `s2` the smallest positive value, subtract `s2 / 2` everywhere
///    and add `s2` back to the entries that were 0;
/// 4. normalize by the sum.
///
/// Equal errors leave step 2 undefined; equal weights are returned instead.
pub fn compute_weights_from_mse(mse: &[f64]) -> Result<StreamWeights> {
    if mse.len() < 2 {
        return Err(Error::param(format!("need at least 2 streams, got {}", mse.len())));
    }
    if mse.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::param(format!("MSE values must be finite and non-negative, got {mse:?}")));
    }
    let sum: f64 = mse.iter().sum();
    let max = mse.iter().copied().fold(f64::MIN, f64::max);
    let min = mse.iter().copied().fold(f64::MAX, f64::min);
    if sum == 0.0 || max == min {
        log::warn!("all stream MSEs are equal ({max}); using equal weights");
        return Ok(StreamWeights::equal(mse.len()));
    }
    let norm: Vec<f64> = mse.iter().map(|v| v / sum).collect();
    let (nmax, nmin) = (max / sum, min / sum);
    let mut w: Vec<f64> = norm.iter().map(|v| (v - nmax) / (nmin - nmax)).collect();

    let zeros: Vec<usize> = (0..w.len()).filter(|&i| w[i] <= 0.0).collect();
    let s2 = w.iter().copied().filter(|&v| v > 0.0).fold(f64::MAX, f64::min);
    if zeros.len() > 1 {
        log::warn!("{} streams share the largest MSE; each receives the same repair", zeros.len());
    }
    for v in w.iter_mut() {
        *v -= s2 / 2.0;
    }
    for &i in &zeros {
        w[i] = s2 / 2.0;
    }
    let total: f64 = w.iter().sum();
    Ok(StreamWeights { w: w.into_iter().map(|v| v / total).collect(), w_rgb: 1.0 })
}

/// `normalize(sum_k W_k p_k + p_rgb)`; the last stream is RGB.
pub fn fused_predict(streams: &[Prediction], weights: &StreamWeights) -> Result<Prediction> {
    if streams.len() != weights.len() + 1 {
        return Err(Error::dim(format!("{} streams for {} weights plus RGB", streams.len(), weights.len())));
    }
    let c = streams[0].probs.len();
    if streams.iter().any(|s| s.probs.len() != c) {
        return Err(Error::dim("streams disagree on the class count"));
    }
    let mut acc = vec![0.0; c];
    for (s, w) in streams.iter().zip(weights.with_rgb()) {
        for (a, p) in acc.iter_mut().zip(&s.probs) {
            *a += w * p;
        }
    }
    let total: f64 = acc.iter().sum();
    Ok(Prediction { probs: acc.into_iter().map(|v| v / total).collect() })
}
