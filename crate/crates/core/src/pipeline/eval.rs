use super::bank::StaticFilterBank;
use super::streams::{filtered_view, with_luminance};
use super::weights::{fused_predict, StreamWeights};
use crate::autonet::NetParams;
use crate::classify::{accuracy, mean_average_precision, ClassNet, Prediction};
use crate::dataio::{AugmentDraw, Example};
use crate::dynenh::{apply_filter, DynamicFilter, EnhanceNet};
use crate::enhance::EnhanceMethod;
use crate::error::{Error, Result};
use crate::imgcore::{psnr, rgb_to_ycbcr, ImageRgb, Plane};

/// A trained pipeline ready for inference.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Baseline { class: NetParams },
    A1 { method: EnhanceMethod, enhance: NetParams, class: NetParams },
    A2 { bank: StaticFilterBank, weights: StreamWeights, class: NetParams },
    A3 { methods: Vec<EnhanceMethod>, enhance: Vec<NetParams>, weights: StreamWeights, class: NetParams },
}

impl TrainedModel {
    pub fn class_params(&self) -> &NetParams {
        match self {
            TrainedModel::Baseline { class }
            | TrainedModel::A1 { class, .. }
            | TrainedModel::A2 { class, .. }
            | TrainedModel::A3 { class, .. } => class,
        }
    }

    /// Stream names in evaluation order; multi-stream models end with `rgb`.
    pub fn stream_names(&self) -> Vec<String> {
        let mut names: Vec<String> = match self {
            TrainedModel::Baseline { .. } => Vec::new(),
            TrainedModel::A1 { method, .. } => return vec![method.name().to_string()],
            TrainedModel::A2 { bank, .. } => bank.methods.iter().map(|m| m.name().to_string()).collect(),
            TrainedModel::A3 { methods, .. } => methods.iter().map(|m| m.name().to_string()).collect(),
        };
        names.push("rgb".to_string());
        names
    }

    pub fn weights(&self) -> Option<&StreamWeights> {
        match self {
            TrainedModel::A2 { weights, .. } | TrainedModel::A3 { weights, .. } => Some(weights),
            _ => None,
        }
    }

    fn dynamic(&self) -> Vec<(EnhanceMethod, &NetParams)> {
        match self {
            TrainedModel::A1 { method, enhance, .. } => vec![(*method, enhance)],
            TrainedModel::A3 { methods, enhance, .. } => methods.iter().copied().zip(enhance).collect(),
            _ => Vec::new(),
        }
    }
}

/// Evaluation view of one example: a center crop at `extent`, no flip.
pub fn evaluation_view(ex: &Example, extent: usize) -> Result<ImageRgb> {
    AugmentDraw::evaluation().apply(&ex.image, extent)
}

/// Per-stream outputs for one image.
#[derive(Debug, Clone)]
pub struct StreamOutputs {
    pub predictions: Vec<Prediction>,
    pub fused: Prediction,
    /// For dynamic streams: the generated filter, original and enhanced luminance.
    pub dynamic: Vec<(DynamicFilter, Plane, Plane)>,
}

pub fn run_streams(
    model: &TrainedModel,
    class_net: &ClassNet,
    enhance_net: Option<&EnhanceNet>,
    view: &ImageRgb,
) -> Result<StreamOutputs> {
    let class = model.class_params();
    let predict = |img: &ImageRgb| class_net.predict(class, img);
    let mut predictions = Vec::new();
    let mut dynamic = Vec::new();
    match model {
        TrainedModel::Baseline { .. } => {}
        TrainedModel::A2 { bank, .. } => {
            for f in &bank.filters {
                predictions.push(predict(&filtered_view(view, f)?.image)?);
            }
        }
        TrainedModel::A1 { .. } | TrainedModel::A3 { .. } => {
            let net = enhance_net.ok_or_else(|| Error::param("dynamic model evaluated without its enhancement network"))?;
            let ycc = rgb_to_ycbcr(view);
            for (_, params) in model.dynamic() {
                let (filter, _) = net.generate_filter(params, &ycc.y)?;
                let y_new = apply_filter(&ycc.y, &filter)?;
                let ev = with_luminance(view, &ycc, y_new.clone())?;
                predictions.push(predict(&ev.image)?);
                dynamic.push((filter, ycc.y.clone(), y_new));
            }
        }
    }
    if !matches!(model, TrainedModel::A1 { .. }) {
        predictions.push(predict(view)?);
    }
    let fused = match model.weights() {
        Some(w) => fused_predict(&predictions, w)?,
        None => predictions[0].clone(),
    };
    Ok(StreamOutputs { predictions, fused, dynamic })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamMetrics {
    pub name: String,
    pub accuracy: f64,
    /// Present when some example carries more than one label.
    pub map: Option<f64>,
}

/// Reconstruction quality of one dynamic stream against its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PsnrMetrics {
    pub method: EnhanceMethod,
    /// Mean PSNR of the unenhanced luminance against the target.
    pub input_psnr: f64,
    /// Mean PSNR of the enhanced luminance against the target.
    pub output_psnr: f64,
}

impl PsnrMetrics {
    pub fn gain(&self) -> f64 {
        self.output_psnr - self.input_psnr
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub streams: Vec<StreamMetrics>,
    pub fused: StreamMetrics,
    pub psnr: Vec<PsnrMetrics>,
    pub fused_predictions: Vec<Prediction>,
}

/// Infinite PSNRs (exact reconstructions) are capped for averaging.
pub const PSNR_CAP: f64 = 100.0;

/// Per-stream and fused metrics on `examples`. Targets, when attached, must
/// align with the model's dynamic methods and feed the PSNR report.
pub fn evaluate(
    model: &TrainedModel,
    class_net: &ClassNet,
    enhance_net: Option<&EnhanceNet>,
    examples: &[Example],
    extent: usize,
) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::param("evaluation split is empty"));
    }
    let names = model.stream_names();
    let dyn_methods: Vec<EnhanceMethod> = model.dynamic().into_iter().map(|(m, _)| m).collect();
    let mut per_stream: Vec<Vec<Prediction>> = vec![Vec::new(); names.len()];
    let mut fused = Vec::with_capacity(examples.len());
    let mut psnr_sums = vec![(0.0, 0.0); dyn_methods.len()];
    let with_targets = !dyn_methods.is_empty() && examples.iter().all(|e| e.targets.len() >= dyn_methods.len());
    for ex in examples {
        let view = evaluation_view(ex, extent)?;
        let out = run_streams(model, class_net, enhance_net, &view)?;
        for (acc, p) in per_stream.iter_mut().zip(out.predictions) {
            acc.push(p);
        }
        fused.push(out.fused);
        if with_targets {
            for (k, (_, y, y_new)) in out.dynamic.iter().enumerate() {
                let t = AugmentDraw::evaluation().apply_geometry(&ex.targets[k], extent)?;
                psnr_sums[k].0 += psnr(y, &t)?.min(PSNR_CAP);
                psnr_sums[k].1 += psnr(y_new, &t)?.min(PSNR_CAP);
            }
        }
    }
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let multi = examples.iter().any(|e| e.labels.len() > 1);
    let label_sets: Vec<Vec<usize>> = examples.iter().map(|e| e.labels.clone()).collect();
    let metrics = |name: &str, preds: &[Prediction]| -> Result<StreamMetrics> {
        let map = if multi {
            let scores: Vec<Vec<f64>> = preds.iter().map(|p| p.probs.clone()).collect();
            Some(mean_average_precision(&scores, &label_sets)?.map)
        } else {
            None
        };
        Ok(StreamMetrics { name: name.to_string(), accuracy: accuracy(preds, &labels)?, map })
    };
    let streams = names.iter().zip(&per_stream).map(|(n, p)| metrics(n, p)).collect::<Result<Vec<_>>>()?;
    let n = examples.len() as f64;
    let psnr = if with_targets {
        dyn_methods
            .iter()
            .zip(psnr_sums)
            .map(|(&method, (a, b))| PsnrMetrics { method, input_psnr: a / n, output_psnr: b / n })
            .collect()
    } else {
        Vec::new()
    };
    Ok(EvalReport { streams, fused: metrics("fused", &fused)?, psnr, fused_predictions: fused })
}
