use crate::error::{Error, Result};

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&a| (a - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Returns `(-log P[label], P - onehot(label))`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() < 2 {
        return Err(Error::param(format!("need at least two classes, got {}", logits.len())));
    }
    if label >= logits.len() {
        return Err(Error::param(format!("label {label} out of range for {} classes", logits.len())));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&a| (a - max).exp()).sum::<f64>().ln();
    let loss = -(logits[label] - max - log_sum);
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}
