//! Building the classifier inputs of each stream from one RGB view.

use crate::autonet::{softmax_cross_entropy, Gradients, NetParams, Tensor};
use crate::classify::{input_grad_planes, ClassNet, Prediction};
use crate::dynenh::{apply_filter, DynamicFilter};
use crate::error::Result;
use crate::imgcore::{rgb_to_ycbcr, ycbcr_to_rgb_unclamped, ImageRgb, Plane, YCbCr};

/// A view whose luminance was replaced, ready for the classifier.
#[derive(Debug, Clone)]
pub struct EnhancedView {
    pub y_enhanced: Plane,
    pub image: ImageRgb,
    /// 1 where the unclamped color value lies in `[0, 1]`; `None` means all 1.
    pub mask: Option<[Plane; 3]>,
}

/// Replaces the luminance of `view` with `y_new` and converts back to RGB.
/// An unchanged luminance returns the view itself, untouched.
pub fn with_luminance(view: &ImageRgb, ycc: &YCbCr, y_new: Plane) -> Result<EnhancedView> {
    if y_new == ycc.y {
        return Ok(EnhancedView { y_enhanced: y_new, image: view.clone(), mask: None });
    }
    let raw = ycbcr_to_rgb_unclamped(&ycc.with_luma(y_new.clone())?);
    let mask = raw.channels().clone().map(|c| c.map(|v| if (0.0..=1.0).contains(&v) { 1.0 } else { 0.0 }));
    Ok(EnhancedView { y_enhanced: y_new, image: raw.map_channels(|c| c.clamp01()), mask: Some(mask) })
}

pub fn filtered_view(view: &ImageRgb, filter: &DynamicFilter) -> Result<EnhancedView> {
    let ycc = rgb_to_ycbcr(view);
    let y_new = apply_filter(&ycc.y, filter)?;
    with_luminance(view, &ycc, y_new)
}

/// Loss, prediction and (weighted) gradients of one classifier pass.
pub struct ClassPass {
    pub loss: f64,
    pub prediction: Prediction,
    /// `d (weight * loss) / d luminance`, when requested.
    pub luma_grad: Option<Plane>,
}

/// Runs the classifier on `input`, accumulates `weight * dL/dparams` into
/// `grads` and optionally returns `weight * dL/dY` through the color
/// conversion (each channel has unit derivative w.r.t. Y).
pub fn class_pass(
    net: &ClassNet,
    params: &NetParams,
    input: &ImageRgb,
    mask: Option<&[Plane; 3]>,
    label: usize,
    weight: f64,
    grads: &mut Gradients,
    need_luma_grad: bool,
) -> Result<ClassPass> {
    let (logits, tape) = net.forward(params, input)?;
    let (loss, dlogits) = softmax_cross_entropy(logits.data(), label)?;
    let g = Tensor::vector(dlogits.into_iter().map(|v| v * weight).collect());
    let dx = net.network().backward_into(params, &tape, &g, need_luma_grad, grads)?;
    let luma_grad = match dx {
        Some(dx) => {
            let planes = input_grad_planes(&dx)?;
            let (h, w) = planes[0].dims();
            let mut out = Plane::zeros(h, w);
            for (c, p) in planes.iter().enumerate() {
                let m = mask.map(|m| &m[c]);
                for (i, (o, v)) in out.data_mut().iter_mut().zip(p.data()).enumerate() {
                    *o += v * m.map_or(1.0, |m| m.data()[i]);
                }
            }
            Some(out)
        }
        None => None,
    };
    Ok(ClassPass { loss, prediction: Prediction::from_logits(logits.data()), luma_grad })
}
