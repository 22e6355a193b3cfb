//! The dynamic enhancement layer.
//!
//! A filter-generating network ("EnhanceNet") maps a luminance plane to one
//! `s x s` kernel, which is then correlated with that same plane. Gradients
//! reach the network through the kernel taps.

use rand::Rng;

use crate::autonet::gradcheck::{check_coordinates, smooth_difference, CheckRow};
use crate::autonet::{BlockRole, Gradients, LayerSpec, NetParams, Network, Tape, Tensor};
use crate::error::{Error, Result};
use crate::imgcore::{convolve2d, mse, Plane};

pub const FILTER_SIZES: [usize; 3] = [5, 6, 7];

/// One generated `s x s` kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicFilter {
    taps: Plane,
}

impl DynamicFilter {
    pub fn new(taps: Plane) -> Result<Self> {
        let (h, w) = taps.dims();
        if h != w || !FILTER_SIZES.contains(&h) {
            return Err(Error::param(format!("filter must be 5x5, 6x6 or 7x7, got {h}x{w}")));
        }
        if taps.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::param("filter taps must be finite"));
        }
        Ok(Self { taps })
    }

    /// Tap 1 at the anchor, 0 elsewhere.
    pub fn identity(size: usize) -> Result<Self> {
        let mut taps = Plane::zeros(size.max(1), size.max(1));
        let a = anchor_of(size);
        taps.set(a, a, 1.0);
        Self::new(taps)
    }

    pub fn size(&self) -> usize {
        self.taps.height()
    }

    pub fn taps(&self) -> &Plane {
        &self.taps
    }

    /// `(floor((s-1)/2), floor((s-1)/2))`; even sizes sit left/up of center.
    pub fn anchor(&self) -> (usize, usize) {
        let a = anchor_of(self.size());
        (a, a)
    }

    pub fn is_identity(&self) -> bool {
        let a = anchor_of(self.size());
        self.taps.data().iter().enumerate().all(|(i, &v)| {
            let on = i == a * self.size() + a;
            v == if on { 1.0 } else { 0.0 }
        })
    }

    /// Human-readable `s x s` matrix, one row per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in 0..self.size() {
            let row: Vec<String> = (0..self.size()).map(|c| format!("{:+.6e}", self.taps.get(r, c))).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

pub fn anchor_of(size: usize) -> usize {
    size.saturating_sub(1) / 2
}

/// Correlate `y` with the filter taps (replicate padding, same size out).
pub fn apply_filter(y: &Plane, f: &DynamicFilter) -> Result<Plane> {
    convolve2d(y, f.taps(), f.anchor())
}

/// Gradient of a loss w.r.t. the taps given its gradient w.r.t. the
/// filtered plane: `g(u, v) = sum_ij dout(i, j) * y(i + u - a, j + v - a)`.
pub fn tap_gradient(y: &Plane, dout: &Plane, size: usize) -> Result<Plane> {
    y.ensure_same_dims(dout)?;
    let a = anchor_of(size) as isize;
    let (h, w) = y.dims();
    Ok(Plane::from_fn(size, size, |u, v| {
        let (du, dv) = (u as isize - a, v as isize - a);
        let mut acc = 0.0;
        for i in 0..h {
            let src_r = i as isize + du;
            for j in 0..w {
                acc += dout.get(i, j) * y.get_clamped(src_r, j as isize + dv);
            }
        }
        acc
    }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnhanceNetConfig {
    /// Side of the square luminance patch the network sees.
    pub input_extent: usize,
    pub filter_size: usize,
    /// Body layers; the `s^2`-wide head is appended automatically.
    pub body: Vec<LayerSpec>,
}

impl EnhanceNetConfig {
    /// conv 5x5x8/2, relu, conv 5x5x16/2, relu, maxpool 2, flatten, fc 128, relu.
    pub fn desk(filter_size: usize) -> Self {
        Self {
            input_extent: 64,
            filter_size,
            body: vec![
                LayerSpec::Conv { out_channels: 8, kernel: 5, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::Conv { out_channels: 16, kernel: 5, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::MaxPool { size: 2 },
                LayerSpec::Flatten,
                LayerSpec::Fc { out: 128 },
                LayerSpec::Relu,
            ],
        }
    }

    /// Wider variant whose parameter count is close to 570k (for audits).
    pub fn full_scale(filter_size: usize) -> Self {
        Self {
            input_extent: 64,
            filter_size,
            body: vec![
                LayerSpec::Conv { out_channels: 16, kernel: 5, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::Conv { out_channels: 32, kernel: 5, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::MaxPool { size: 2 },
                LayerSpec::Flatten,
                LayerSpec::Fc { out: 480 },
                LayerSpec::Relu,
            ],
        }
    }

    pub fn head_size(&self) -> usize {
        self.filter_size * self.filter_size
    }
}

/// The filter-generating network.
#[derive(Debug, Clone)]
pub struct EnhanceNet {
    cfg: EnhanceNetConfig,
    net: Network,
}

impl EnhanceNet {
    pub fn new(cfg: EnhanceNetConfig) -> Result<Self> {
        if !FILTER_SIZES.contains(&cfg.filter_size) {
            return Err(Error::param(format!("filter size must be 5, 6 or 7, got {}", cfg.filter_size)));
        }
        let mut specs = cfg.body.clone();
        specs.push(LayerSpec::Fc { out: cfg.head_size() });
        let net = Network::build(&[1, cfg.input_extent, cfg.input_extent], &specs)?;
        Ok(Self { cfg, net })
    }

    pub fn config(&self) -> &EnhanceNetConfig {
        &self.cfg
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn filter_size(&self) -> usize {
        self.cfg.filter_size
    }

    /// Random body, zero head weights and the identity kernel as head bias.
    pub fn init_identity<R: Rng>(&self, rng: &mut R) -> NetParams {
        let mut params = self.net.init_params(rng);
        let head = self.net.last_param_layer().expect("head layer");
        params.block_mut(head, BlockRole::Weight).expect("head weight").fill(0.0);
        let bias = params.block_mut(head, BlockRole::Bias).expect("head bias");
        bias.fill(0.0);
        let a = anchor_of(self.cfg.filter_size);
        bias[a * self.cfg.filter_size + a] = 1.0;
        params
    }

    /// The network input: centered square crop, bilinear resize, minus 0.5.
    pub fn prepare_input(&self, y: &Plane) -> Tensor {
        let e = self.cfg.input_extent;
        let sq = if y.height() == y.width() { y.clone() } else { y.center_square() };
        let patch = sq.resize_bilinear(e, e);
        Tensor::new(vec![1, e, e], patch.data().iter().map(|v| v - 0.5).collect()).expect("extent matches")
    }

    pub fn generate_filter(&self, params: &NetParams, y: &Plane) -> Result<(DynamicFilter, Tape)> {
        let (out, tape) = self.net.forward(params, &self.prepare_input(y))?;
        let s = self.cfg.filter_size;
        Ok((DynamicFilter::new(Plane::new(s, s, out.into_data())?)?, tape))
    }

    /// Accumulate `d loss / d params` from `d loss / d taps`.
    pub fn backward_taps(&self, params: &NetParams, tape: &Tape, dtaps: &Plane, grads: &mut Gradients) -> Result<()> {
        let g = Tensor::vector(dtaps.data().to_vec());
        self.net.backward_into(params, tape, &g, false, grads)?;
        Ok(())
    }

    /// `mse(apply_filter(y, generate_filter(y)), t)` and its parameter gradient.
    pub fn enhancement_loss_and_grads(&self, params: &NetParams, y: &Plane, t: &Plane) -> Result<(f64, Gradients)> {
        y.ensure_same_dims(t)?;
        let (filter, tape) = self.generate_filter(params, y)?;
        let pred = apply_filter(y, &filter)?;
        let loss = mse(&pred, t)?;
        let scale = 2.0 / y.len() as f64;
        let dpred = pred.zip_map(t, |p, q| scale * (p - q))?;
        let dtaps = tap_gradient(y, &dpred, filter.size())?;
        let mut grads = Gradients::zeros_like(params);
        self.backward_taps(params, &tape, &dtaps, &mut grads)?;
        Ok((loss, grads))
    }
}

/// Finite-difference check of the chain `y -> filter -> correlation -> mse`
/// on up to `coords` random parameter coordinates.
pub fn check_dynamic_chain<R: Rng>(
    net: &EnhanceNet,
    params: &NetParams,
    y: &Plane,
    t: &Plane,
    coords: usize,
    rng: &mut R,
) -> Result<CheckRow> {
    let (_, grads) = net.enhancement_loss_and_grads(params, y, t)?;
    let loss = |v: &[f64]| -> f64 {
        let p = NetParams::from_values(params.layout().clone(), v.to_vec()).expect("same layout");
        net.enhancement_loss_and_grads(&p, y, t).map_or(f64::NAN, |r| r.0)
    };
    let mut probe = params.values().to_vec();
    let span = probe.len();
    Ok(check_coordinates("dynamic_chain", span, coords, rng, |i| grads.values()[i], |i| smooth_difference(&mut probe, i, loss)))
}

/// Element-wise mean of equally sized filters.
pub fn mean_filter(filters: &[DynamicFilter]) -> Result<DynamicFilter> {
    let first = filters.first().ok_or_else(|| Error::param("cannot average an empty filter set"))?;
    let s = first.size();
    let mut acc = vec![0.0; s * s];
    for f in filters {
        if f.size() != s {
            return Err(Error::dim("filters differ in size"));
        }
        for (a, v) in acc.iter_mut().zip(f.taps().data()) {
            *a += v;
        }
    }
    let n = filters.len() as f64;
    DynamicFilter::new(Plane::new(s, s, acc.into_iter().map(|v| v / n).collect())?)
}
