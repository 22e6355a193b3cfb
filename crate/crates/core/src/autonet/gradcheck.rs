//! Central finite-difference checks against the analytic backward pass.

use std::collections::HashSet;

use rand::Rng;

use super::layers::LayerSpec;
use super::loss::softmax_cross_entropy;
use super::network::Network;
use super::params::{BlockRole, NetParams};
use super::Tensor;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_difference(x: &mut [f64], i: usize, step: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + step;
    let up = f(x);
    x[i] = orig - step;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * step)
}

/// Smaller steps tried when the one-sided slopes disagree.
const FALLBACK_STEPS: [f64; 2] = [1e-6, 1e-7];
/// One-sided slopes further apart than this (relative) mean the step crossed
/// a relu or max-pool switch, where no finite difference is meaningful.
pub const KINK_TOLERANCE: f64 = 1e-5;

/// Central difference along `i` at the first step whose forward and backward
/// slopes agree, or `None` if every step straddles a kink.
pub fn smooth_difference(x: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> Option<f64> {
    let orig = x[i];
    let mid = f(x);
    for step in std::iter::once(FD_STEP).chain(FALLBACK_STEPS) {
        x[i] = orig + step;
        let up = f(x);
        x[i] = orig - step;
        let down = f(x);
        x[i] = orig;
        if relative_error((up - mid) / step, (mid - down) / step) < KINK_TOLERANCE {
            return Some((up - down) / (2.0 * step));
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct CheckRow {
    pub name: String,
    pub checked: usize,
    /// Coordinates drawn but replaced because they sit on a kink.
    pub kinks: usize,
    pub max_rel_error: f64,
}

/// Compares `analytic` and `numeric` at `coords` distinct random indices below
/// `span` (all of them if fewer), replacing kinked draws with fresh ones.
pub fn check_coordinates<R: Rng>(
    name: impl Into<String>,
    span: usize,
    coords: usize,
    rng: &mut R,
    analytic: impl Fn(usize) -> f64,
    mut numeric: impl FnMut(usize) -> Option<f64>,
) -> CheckRow {
    let target = coords.min(span);
    let mut seen = HashSet::new();
    let (mut checked, mut kinks, mut worst) = (0, 0, 0.0f64);
    while checked < target && seen.len() < span {
        let i = rng.gen_range(0..span);
        if !seen.insert(i) {
            continue;
        }
        match numeric(i) {
            Some(n) => {
                worst = worst.max(relative_error(analytic(i), n));
                checked += 1;
            }
            None => kinks += 1,
        }
    }
    CheckRow { name: name.into(), checked, kinks, max_rel_error: worst }
}

/// Checks `d <net(x), g> / d theta` for up to `coords` random coordinates per
/// parameterized layer, plus the input gradient, with a random projection `g`.
pub fn check_network<R: Rng>(net: &Network, params: &NetParams, x: &Tensor, coords: usize, rng: &mut R) -> Result<Vec<CheckRow>> {
    let out_len: usize = net.output_shape().iter().product();
    let g = Tensor::new(net.output_shape().to_vec(), (0..out_len).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let objective = |p: &NetParams, input: &Tensor| -> f64 {
        let (y, _) = net.forward(p, input).expect("shapes validated");
        y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    };
    let (_, tape) = net.forward(params, x)?;
    let back = net.backward(params, &tape, &g, true)?;

    let mut rows = Vec::new();
    let mut probe = params.values().to_vec();
    for (li, layer) in net.layers().iter().enumerate() {
        let Some(block) = net.layout().find(li, BlockRole::Weight).cloned() else { continue };
        let bias = net.layout().find(li, BlockRole::Bias).cloned().expect("bias follows weight");
        let index = |k: usize| if k < block.len { block.offset + k } else { bias.offset + k - block.len };
        rows.push(check_coordinates(
            format!("{li}:{}", layer.name()),
            block.len + bias.len,
            coords,
            rng,
            |k| back.grads.values()[index(k)],
            |k| {
                smooth_difference(&mut probe, index(k), |v| {
                    objective(&NetParams::from_values(params.layout().clone(), v.to_vec()).expect("same layout"), x)
                })
            },
        ));
    }

    let input_grad = back.input_grad.expect("requested");
    let mut xin = x.data().to_vec();
    rows.push(check_coordinates(
        "input",
        xin.len(),
        coords,
        rng,
        |i| input_grad.data()[i],
        |i| smooth_difference(&mut xin, i, |v| objective(params, &Tensor::new(x.shape().to_vec(), v.to_vec()).expect("same shape"))),
    ));
    Ok(rows)
}

/// Softmax cross-entropy gradient w.r.t. the logits, at up to `coords` random
/// logit vectors of random length and label.
pub fn check_cross_entropy<R: Rng>(coords: usize, rng: &mut R) -> Result<CheckRow> {
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let n = rng.gen_range(2..12);
        let label = rng.gen_range(0..n);
        let mut logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let (_, grad) = softmax_cross_entropy(&logits, label)?;
        let i = rng.gen_range(0..n);
        let numeric = central_difference(&mut logits, i, FD_STEP, |v| softmax_cross_entropy(v, label).map_or(f64::NAN, |r| r.0));
        worst = worst.max(relative_error(grad[i], numeric));
    }
    Ok(CheckRow { name: "softmax_cross_entropy".into(), checked: coords, kinks: 0, max_rel_error: worst })
}

/// One small network per layer kind; each is checked on parameters and input.
pub fn check_layer_kinds<R: Rng>(coords: usize, rng: &mut R) -> Result<Vec<CheckRow>> {
    let cases: [(&str, Vec<usize>, Vec<LayerSpec>); 6] = [
        ("conv", vec![2, 9, 9], vec![LayerSpec::Conv { out_channels: 3, kernel: 3, stride: 1 }]),
        ("conv_stride2", vec![2, 11, 11], vec![LayerSpec::Conv { out_channels: 3, kernel: 5, stride: 2 }]),
        ("fc", vec![40], vec![LayerSpec::Fc { out: 7 }]),
        ("relu", vec![60], vec![LayerSpec::Relu]),
        ("maxpool", vec![2, 10, 10], vec![LayerSpec::MaxPool { size: 2 }]),
        ("flatten", vec![2, 4, 5], vec![LayerSpec::Flatten]),
    ];
    let mut rows = Vec::new();
    for (name, shape, specs) in cases {
        let net = Network::build(&shape, &specs)?;
        let params = net.init_params(rng);
        let len: usize = shape.iter().product();
        let x = Tensor::new(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        for mut row in check_network(&net, &params, &x, coords, rng)? {
            row.name = format!("{name}/{}", row.name);
            rows.push(row);
        }
    }
    Ok(rows)
}
