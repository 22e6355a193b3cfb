use std::fmt;

use super::gemm::gemm;
use super::Tensor;
use crate::error::{Error, Result};

/// One entry of a network description. Input extents are inferred at build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    /// Valid (unpadded) convolution with a square kernel.
    Conv { out_channels: usize, kernel: usize, stride: usize },
    Fc { out: usize },
    Relu,
    /// Non-overlapping max pooling (`stride == size`), floor semantics.
    MaxPool { size: usize },
    Flatten,
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv { out_channels, kernel, stride } => {
                write!(f, "conv k={kernel} out={out_channels} stride={stride}")
            }
            LayerSpec::Fc { out } => write!(f, "fc out={out}"),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::MaxPool { size } => write!(f, "maxpool size={size}"),
            LayerSpec::Flatten => f.write_str("flatten"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn patch_len(&self) -> usize {
        self.in_c * self.k * self.k
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeom {
    pub c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub size: usize,
    pub out_h: usize,
    pub out_w: usize,
}

/// A layer with all extents resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layer {
    Conv(ConvGeom),
    Fc { input: usize, output: usize },
    Relu,
    MaxPool(PoolGeom),
    Flatten,
}

/// Per-layer intermediates kept by the forward pass.
#[derive(Debug, Clone)]
pub(crate) enum LayerCache {
    None,
    Cols(Vec<f64>),
    Argmax(Vec<usize>),
}

fn spatial(shape: &[usize], what: &str) -> Result<(usize, usize, usize)> {
    match shape {
        [c, h, w] => Ok((*c, *h, *w)),
        _ => Err(Error::Shape(format!("{what} needs a [C, H, W] input, got {shape:?}"))),
    }
}

impl Layer {
    pub(crate) fn resolve(spec: &LayerSpec, input: &[usize]) -> Result<(Layer, Vec<usize>)> {
        match *spec {
            LayerSpec::Conv { out_channels, kernel, stride } => {
                let (c, h, w) = spatial(input, "conv")?;
                if kernel == 0 || stride == 0 || out_channels == 0 {
                    return Err(Error::Shape(format!("degenerate conv spec {spec}")));
                }
                if kernel > h || kernel > w {
                    return Err(Error::Shape(format!("conv kernel {kernel} exceeds input {h}x{w}")));
                }
                let g = ConvGeom {
                    in_c: c,
                    in_h: h,
                    in_w: w,
                    out_c: out_channels,
                    k: kernel,
                    stride,
                    out_h: (h - kernel) / stride + 1,
                    out_w: (w - kernel) / stride + 1,
                };
                Ok((Layer::Conv(g), vec![g.out_c, g.out_h, g.out_w]))
            }
            LayerSpec::Fc { out } => match input {
                [n] if out > 0 => Ok((Layer::Fc { input: *n, output: out }, vec![out])),
                _ => Err(Error::Shape(format!("fc needs a flat input and out > 0, got {input:?} -> {out}"))),
            },
            LayerSpec::Relu => Ok((Layer::Relu, input.to_vec())),
            LayerSpec::MaxPool { size } => {
                let (c, h, w) = spatial(input, "maxpool")?;
                if size == 0 || size > h || size > w {
                    return Err(Error::Shape(format!("maxpool size {size} invalid for {h}x{w}")));
                }
                let g = PoolGeom { c, in_h: h, in_w: w, size, out_h: h / size, out_w: w / size };
                Ok((Layer::MaxPool(g), vec![c, g.out_h, g.out_w]))
            }
            LayerSpec::Flatten => Ok((Layer::Flatten, vec![input.iter().product()])),
        }
    }

    /// `(weight_len, bias_len, fan_in, fan_out)` for layers with parameters.
    pub(crate) fn param_shape(&self) -> Option<(usize, usize, usize, usize)> {
        match *self {
            Layer::Conv(g) => Some((g.out_c * g.patch_len(), g.out_c, g.patch_len(), g.out_c * g.k * g.k)),
            Layer::Fc { input, output } => Some((input * output, output, input, output)),
            _ => None,
        }
    }

    pub(crate) fn forward(&self, w: &[f64], b: &[f64], x: &Tensor, out_shape: &[usize]) -> (Tensor, LayerCache) {
        match *self {
            Layer::Conv(g) => {
                let cols = im2col(&g, x.data());
                let p = g.positions();
                let mut out = vec![0.0; g.out_c * p];
                for (o, row) in out.chunks_exact_mut(p).enumerate() {
                    row.fill(b[o]);
                }
                gemm(g.out_c, g.patch_len(), p, w, false, &cols, false, 1.0, &mut out);
                (Tensor::vector(out).with_shape(out_shape.to_vec()), LayerCache::Cols(cols))
            }
            Layer::Fc { input, output } => {
                let xs = x.data();
                let out = (0..output)
                    .map(|o| b[o] + w[o * input..(o + 1) * input].iter().zip(xs).map(|(a, c)| a * c).sum::<f64>())
                    .collect();
                (Tensor::vector(out), LayerCache::None)
            }
            Layer::Relu => {
                let out = x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
                (Tensor::vector(out).with_shape(out_shape.to_vec()), LayerCache::None)
            }
            Layer::MaxPool(g) => {
                let (out, arg) = maxpool_forward(&g, x.data());
                (Tensor::vector(out).with_shape(out_shape.to_vec()), LayerCache::Argmax(arg))
            }
            Layer::Flatten => (x.clone().with_shape(out_shape.to_vec()), LayerCache::None),
        }
    }

    /// Accumulates parameter gradients into `dw`/`db` and returns the input
    /// gradient when `need_dx`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward(
        &self,
        w: &[f64],
        x: &Tensor,
        cache: &LayerCache,
        dy: &[f64],
        dw: &mut [f64],
        db: &mut [f64],
        need_dx: bool,
    ) -> Option<Vec<f64>> {
        match *self {
            Layer::Conv(g) => {
                let LayerCache::Cols(cols) = cache else { unreachable!("conv caches its columns") };
                let p = g.positions();
                gemm(g.out_c, p, g.patch_len(), dy, false, cols, true, 1.0, dw);
                for (o, row) in dy.chunks_exact(p).enumerate() {
                    db[o] += row.iter().sum::<f64>();
                }
                need_dx.then(|| {
                    let mut dcols = vec![0.0; g.patch_len() * p];
                    gemm(g.patch_len(), g.out_c, p, w, true, dy, false, 0.0, &mut dcols);
                    col2im(&g, &dcols)
                })
            }
            Layer::Fc { input, output } => {
                let xs = x.data();
                for o in 0..output {
                    let g = dy[o];
                    db[o] += g;
                    if g != 0.0 {
                        for (dwi, xi) in dw[o * input..(o + 1) * input].iter_mut().zip(xs) {
                            *dwi += g * xi;
                        }
                    }
                }
                need_dx.then(|| {
                    let mut dx = vec![0.0; input];
                    for o in 0..output {
                        let g = dy[o];
                        if g != 0.0 {
                            for (d, wi) in dx.iter_mut().zip(&w[o * input..(o + 1) * input]) {
                                *d += g * wi;
                            }
                        }
                    }
                    dx
                })
            }
            Layer::Relu => {
                need_dx.then(|| x.data().iter().zip(dy).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect())
            }
            Layer::MaxPool(g) => need_dx.then(|| {
                let LayerCache::Argmax(arg) = cache else { unreachable!("maxpool caches argmax") };
                let mut dx = vec![0.0; g.c * g.in_h * g.in_w];
                for (&i, &d) in arg.iter().zip(dy) {
                    dx[i] += d;
                }
                dx
            }),
            Layer::Flatten => need_dx.then(|| dy.to_vec()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Layer::Conv(g) => format!("conv{}x{}x{}/s{}", g.k, g.k, g.out_c, g.stride),
            Layer::Fc { output, .. } => format!("fc{output}"),
            Layer::Relu => "relu".into(),
            Layer::MaxPool(g) => format!("maxpool{}", g.size),
            Layer::Flatten => "flatten".into(),
        }
    }
}

fn im2col(g: &ConvGeom, x: &[f64]) -> Vec<f64> {
    let p = g.positions();
    let mut cols = vec![0.0; g.patch_len() * p];
    for c in 0..g.in_c {
        for u in 0..g.k {
            for v in 0..g.k {
                let row = (c * g.k + u) * g.k + v;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let src_row = (c * g.in_h + oy * g.stride + u) * g.in_w + v;
                    for ox in 0..g.out_w {
                        dst[oy * g.out_w + ox] = x[src_row + ox * g.stride];
                    }
                }
            }
        }
    }
    cols
}

fn col2im(g: &ConvGeom, cols: &[f64]) -> Vec<f64> {
    let p = g.positions();
    let mut dx = vec![0.0; g.in_c * g.in_h * g.in_w];
    for c in 0..g.in_c {
        for u in 0..g.k {
            for v in 0..g.k {
                let row = (c * g.k + u) * g.k + v;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let dst_row = (c * g.in_h + oy * g.stride + u) * g.in_w + v;
                    for ox in 0..g.out_w {
                        dx[dst_row + ox * g.stride] += src[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
    dx
}

fn maxpool_forward(g: &PoolGeom, x: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = g.c * g.out_h * g.out_w;
    let mut out = Vec::with_capacity(n);
    let mut arg = Vec::with_capacity(n);
    for c in 0..g.c {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for u in 0..g.size {
                    for v in 0..g.size {
                        let i = (c * g.in_h + oy * g.size + u) * g.in_w + ox * g.size + v;
                        // Strict comparison: ties go to the first element in scan order.
                        if x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                out.push(best);
                arg.push(best_i);
            }
        }
    }
    (out, arg)
}

/// Naive loop convolution kernels; the fast path must agree within 1e-10.
pub mod reference {
    use super::ConvGeom;

    pub fn conv_forward(g: &ConvGeom, w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.out_c * g.out_h * g.out_w];
        for o in 0..g.out_c {
            for oy in 0..g.out_h {
                for ox in 0..g.out_w {
                    let mut acc = b[o];
                    for c in 0..g.in_c {
                        for u in 0..g.k {
                            for v in 0..g.k {
                                let wi = ((o * g.in_c + c) * g.k + u) * g.k + v;
                                let xi = (c * g.in_h + oy * g.stride + u) * g.in_w + ox * g.stride + v;
                                acc += w[wi] * x[xi];
                            }
                        }
                    }
                    out[(o * g.out_h + oy) * g.out_w + ox] = acc;
                }
            }
        }
        out
    }

    /// Returns `(dw, db, dx)`.
    pub fn conv_backward(g: &ConvGeom, w: &[f64], x: &[f64], dy: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; g.out_c];
        let mut dx = vec![0.0; x.len()];
        for o in 0..g.out_c {
            for oy in 0..g.out_h {
                for ox in 0..g.out_w {
                    let d = dy[(o * g.out_h + oy) * g.out_w + ox];
                    db[o] += d;
                    for c in 0..g.in_c {
                        for u in 0..g.k {
                            for v in 0..g.k {
                                let wi = ((o * g.in_c + c) * g.k + u) * g.k + v;
                                let xi = (c * g.in_h + oy * g.stride + u) * g.in_w + ox * g.stride + v;
                                dw[wi] += d * x[xi];
                                dx[xi] += d * w[wi];
                            }
                        }
                    }
                }
            }
        }
        (dw, db, dx)
    }
}
