//! Desk-scale classification network and evaluation metrics.

use crate::autonet::{softmax, LayerSpec, NetParams, Network, Tape, Tensor};
use crate::error::{Error, Result};
use crate::imgcore::{ImageRgb, Plane};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassNetConfig {
    pub input_extent: usize,
    pub class_count: usize,
    /// Body layers; the final `fc C` is appended automatically.
    pub body: Vec<LayerSpec>,
}

impl ClassNetConfig {
    /// conv 3x3x16, relu, maxpool 2, conv 3x3x32, relu, maxpool 2, flatten, fc 128, relu.
    pub fn desk(class_count: usize) -> Self {
        Self {
            input_extent: 64,
            class_count,
            body: vec![
                LayerSpec::Conv { out_channels: 16, kernel: 3, stride: 1 },
                LayerSpec::Relu,
                LayerSpec::MaxPool { size: 2 },
                LayerSpec::Conv { out_channels: 32, kernel: 3, stride: 1 },
                LayerSpec::Relu,
                LayerSpec::MaxPool { size: 2 },
                LayerSpec::Flatten,
                LayerSpec::Fc { out: 128 },
                LayerSpec::Relu,
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassNet {
    cfg: ClassNetConfig,
    net: Network,
}

impl ClassNet {
    pub fn new(cfg: ClassNetConfig) -> Result<Self> {
        if cfg.class_count < 2 {
            return Err(Error::param(format!("need at least 2 classes, got {}", cfg.class_count)));
        }
        let mut specs = cfg.body.clone();
        specs.push(LayerSpec::Fc { out: cfg.class_count });
        let net = Network::build(&[3, cfg.input_extent, cfg.input_extent], &specs)?;
        Ok(Self { cfg, net })
    }

    pub fn config(&self) -> &ClassNetConfig {
        &self.cfg
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn class_count(&self) -> usize {
        self.cfg.class_count
    }

    /// Indices of the parameter blocks of the last two fc layers.
    pub fn head_blocks(&self) -> Vec<usize> {
        let fcs: Vec<usize> = self
            .net
            .layers()
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, crate::autonet::Layer::Fc { .. }))
            .map(|(i, _)| i)
            .collect();
        let tail = &fcs[fcs.len().saturating_sub(2)..];
        self.net.layout().blocks().iter().enumerate().filter(|(_, b)| tail.contains(&b.layer)).map(|(i, _)| i).collect()
    }

    /// Per-block learning-rate multipliers: `body` everywhere except the last
    /// two fc layers, which get `head`.
    pub fn lr_multipliers(&self, body: f64, head: f64) -> Vec<f64> {
        let heads = self.head_blocks();
        (0..self.net.layout().blocks().len()).map(|i| if heads.contains(&i) { head } else { body }).collect()
    }

    /// Channels minus 0.5, resized (center square, bilinear) when needed.
    pub fn prepare_input(&self, img: &ImageRgb) -> Tensor {
        let e = self.cfg.input_extent;
        let fitted = if img.dims() == (e, e) {
            img.clone()
        } else {
            let (h, w) = img.dims();
            let side = h.min(w);
            img.crop((h - side) / 2, (w - side) / 2, side, side).expect("square fits").resize_bilinear(e, e)
        };
        let mut data = Vec::with_capacity(3 * e * e);
        for c in fitted.channels() {
            data.extend(c.data().iter().map(|v| v - 0.5));
        }
        Tensor::new(vec![3, e, e], data).expect("extent matches")
    }

    pub fn forward(&self, params: &NetParams, img: &ImageRgb) -> Result<(Tensor, Tape)> {
        self.net.forward(params, &self.prepare_input(img))
    }

    pub fn predict(&self, params: &NetParams, img: &ImageRgb) -> Result<Prediction> {
        let (logits, _) = self.forward(params, img)?;
        Ok(Prediction::from_logits(logits.data()))
    }
}

/// Splits a `[3, e, e]` input gradient into three planes.
pub fn input_grad_planes(grad: &Tensor) -> Result<[Plane; 3]> {
    let s = grad.shape();
    if s.len() != 3 || s[0] != 3 {
        return Err(Error::Shape(format!("expected [3, h, w] gradient, got {s:?}")));
    }
    let n = s[1] * s[2];
    let d = grad.data();
    Ok([
        Plane::new(s[1], s[2], d[..n].to_vec())?,
        Plane::new(s[1], s[2], d[n..2 * n].to_vec())?,
        Plane::new(s[1], s[2], d[2 * n..].to_vec())?,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
}

impl Prediction {
    pub fn from_logits(logits: &[f64]) -> Self {
        Self { probs: softmax(logits) }
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

pub fn accuracy(preds: &[Prediction], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::param("accuracy of an empty prediction list"));
    }
    if preds.len() != labels.len() {
        return Err(Error::dim(format!("{} predictions, {} labels", preds.len(), labels.len())));
    }
    let correct = preds.iter().zip(labels).filter(|(p, &l)| p.argmax() == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapReport {
    pub map: f64,
    /// `None` for classes without positives.
    pub per_class: Vec<Option<f64>>,
}

/// Average precision of one ranking; `scores[i]` and `positive[i]` per sample.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positive[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// `scores[sample][class]`, `label_sets[sample]` lists the positive classes.
pub fn mean_average_precision(scores: &[Vec<f64>], label_sets: &[Vec<usize>]) -> Result<MapReport> {
    if scores.is_empty() {
        return Err(Error::param("mAP of an empty score list"));
    }
    if scores.len() != label_sets.len() {
        return Err(Error::dim(format!("{} score rows, {} label sets", scores.len(), label_sets.len())));
    }
    let classes = scores[0].len();
    if scores.iter().any(|s| s.len() != classes) {
        return Err(Error::dim("score rows differ in length"));
    }
    let mut per_class = Vec::with_capacity(classes);
    for c in 0..classes {
        let col: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        let pos: Vec<bool> = label_sets.iter().map(|l| l.contains(&c)).collect();
        let ap = average_precision(&col, &pos);
        if ap.is_none() {
            log::warn!("class {c} has no positives; excluded from mAP");
        }
        per_class.push(ap);
    }
    let valid: Vec<f64> = per_class.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::param("no class has a positive sample"));
    }
    Ok(MapReport { map: valid.iter().sum::<f64>() / valid.len() as f64, per_class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autonet::BlockRole;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pred(p: &[f64]) -> Prediction {
        Prediction { probs: p.to_vec() }
    }

    #[test]
    fn zero_final_layer_gives_uniform_prediction() {
        let net = ClassNet::new(ClassNetConfig::desk(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let mut params = net.network().init_params(&mut rng);
        let last = net.network().last_param_layer().unwrap();
        params.block_mut(last, BlockRole::Weight).unwrap().fill(0.0);
        let img = ImageRgb::new(
            Plane::from_fn(64, 64, |_, _| rng.gen()),
            Plane::from_fn(64, 64, |_, _| rng.gen()),
            Plane::from_fn(64, 64, |_, _| rng.gen()),
        )
        .unwrap();
        let p = net.predict(&params, &img).unwrap();
        assert!(p.probs.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let (a, _) = net.forward(&params, &img).unwrap();
        let (b, _) = net.forward(&params, &img).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn desk_parameter_count_and_multipliers() {
        let net = ClassNet::new(ClassNetConfig::desk(8)).unwrap();
        let n = net.network().total_count();
        assert_eq!(n, 448 + 4640 + 6272 * 128 + 128 + 128 * 8 + 8);
        let m = net.lr_multipliers(0.1, 1.0);
        assert_eq!(m, vec![0.1, 0.1, 0.1, 0.1, 1.0, 1.0, 1.0, 1.0]);
        assert!(ClassNet::new(ClassNetConfig::desk(1)).is_err());
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[pred(&[0.9, 0.1]), pred(&[0.2, 0.8])], &[0, 1]).unwrap(), 1.0);
        let uniform = vec![pred(&[0.5, 0.5]); 4];
        assert_eq!(accuracy(&uniform, &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&uniform, &[0]).is_err());

        let preds: Vec<Prediction> = (0..10).map(|i| if i < 7 { pred(&[0.1, 0.9]) } else { pred(&[0.6, 0.4]) }).collect();
        assert!((accuracy(&preds, &[1; 10]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn average_precision_cases() {
        assert_eq!(average_precision(&[0.9, 0.1], &[true, false]), Some(1.0));
        assert_eq!(average_precision(&[0.9, 0.1], &[false, true]), Some(0.5));
        // ties go to the lower sample index
        assert_eq!(average_precision(&[0.5, 0.5], &[false, true]), Some(0.5));
        assert_eq!(average_precision(&[0.5, 0.5], &[false, false]), None);
    }

    #[test]
    fn map_cases() {
        let scores = vec![vec![0.9, 0.1], vec![0.1, 0.2]];
        let labels = vec![vec![0], vec![0, 1]];
        // class 0: ranks sample 0 then 1, both positive -> 1.0
        // class 1: ranks sample 1 (positive) then 0 -> 1.0
        assert_eq!(mean_average_precision(&scores, &labels).unwrap().map, 1.0);
        let scores = vec![vec![0.9, 0.9], vec![0.1, 0.1]];
        let labels = vec![vec![0], vec![1]];
        let r = mean_average_precision(&scores, &labels).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0), Some(0.5)]);
        assert_eq!(r.map, 0.75);
        let r = mean_average_precision(&scores, &[vec![0], vec![0]]).unwrap();
        assert_eq!(r.per_class[1], None);
        assert_eq!(r.map, 1.0);
    }

    #[test]
    fn input_gradient_reaches_every_channel() {
        let cfg = ClassNetConfig { input_extent: 8, class_count: 3, body: vec![LayerSpec::Flatten] };
        let net = ClassNet::new(cfg).unwrap();
        let params = net.network().init_params(&mut ChaCha8Rng::seed_from_u64(61));
        let img = ImageRgb::filled(8, 8, [0.2, 0.5, 0.8]);
        let (_, tape) = net.forward(&params, &img).unwrap();
        let back = net.network().backward(&params, &tape, &Tensor::vector(vec![1.0, 0.0, 0.0]), true).unwrap();
        let planes = input_grad_planes(&back.input_grad.unwrap()).unwrap();
        assert!(planes.iter().all(|p| p.dims() == (8, 8)));
        assert!(planes.iter().all(|p| p.data().iter().any(|&v| v != 0.0)));
    }
}
