use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bank::StaticFilterBank;
use super::config::{RunConfig, Weighting};
use super::streams::{class_pass, filtered_view, with_luminance};
use super::weights::{compute_weights_from_mse, fused_predict, StreamWeights};
use crate::autonet::{Gradients, NetParams, Sgd};
use crate::classify::{ClassNet, Prediction};
use crate::dataio::{AugmentDraw, Example};
use crate::dynenh::{apply_filter, tap_gradient, EnhanceNet};
use crate::error::{Error, Result};
use crate::imgcore::{mse, rgb_to_ycbcr, ImageRgb};

const PHASE_PRETRAIN: u64 = 1;
const PHASE_JOINT: u64 = 2;
const INIT_CLASS: u64 = 11;
const INIT_ENHANCE: u64 = 12;

/// SplitMix64 over the parts; used to derive independent seeded streams.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut z = 0x243F_6A88_85A3_08D3u64;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Seeded initial classifier parameters.
pub fn init_class_params(cfg: &RunConfig, net: &ClassNet) -> NetParams {
    net.network().init_params(&mut ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, INIT_CLASS])))
}

/// Seeded identity-initialized enhancement parameters for stream `k`.
pub fn init_enhance_params(cfg: &RunConfig, net: &EnhanceNet, k: usize) -> NetParams {
    let method = cfg.methods.get(k).map_or(k, |m| m.index()) as u64;
    net.init_identity(&mut ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, INIT_ENHANCE, method])))
}

/// Per-epoch means of the training losses.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    /// Sum over streams of the reconstruction errors.
    pub mse: f64,
    /// Weighted sum over streams of the classification losses.
    pub class_loss: f64,
    pub train_accuracy: f64,
    /// Mean per-sample stream weights (empty for single-stream runs).
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

/// What one sample contributed to a batch, as seen by an observer.
#[derive(Debug, Clone)]
pub struct ObservedSample {
    pub label: usize,
    /// Classifier inputs, enhancement streams first and RGB last.
    pub stream_inputs: Vec<ImageRgb>,
    /// Loss weights aligned with `stream_inputs`.
    pub weights: Vec<f64>,
}

#[derive(Debug)]
pub struct BatchRecord<'a> {
    pub epoch: usize,
    pub batch: usize,
    /// Classifier parameters the batch was evaluated with.
    pub class_params: &'a NetParams,
    pub samples: Vec<ObservedSample>,
    /// Batch-mean loss reported by the trainer.
    pub reported_loss: f64,
}

pub trait TrainObserver {
    fn on_batch(&mut self, record: &BatchRecord<'_>);
}

impl<F: FnMut(&BatchRecord<'_>)> TrainObserver for F {
    fn on_batch(&mut self, record: &BatchRecord<'_>) {
        self(record)
    }
}

struct SampleOut {
    class_grads: Gradients,
    enhance_grads: Vec<Gradients>,
    loss: f64,
    mse: f64,
    class_loss: f64,
    weights: Vec<f64>,
    correct: bool,
    observed: Option<ObservedSample>,
}

trait Job: Sync {
    fn sample(&self, ex: &Example, draw: &AugmentDraw, observe: bool) -> Result<SampleOut>;
    fn class_params(&self) -> &NetParams;
    fn apply(&mut self, class: &Gradients, enhance: &[Gradients], step: usize) -> Result<()>;
}

fn check_examples(cfg: &RunConfig, examples: &[Example], targets: usize) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::param("training set is empty"));
    }
    for ex in examples {
        let (h, w) = ex.image.dims();
        cfg.augment.validate(h, w)?;
        if ex.targets.len() < targets {
            return Err(Error::MissingTarget {
                path: ex.path.clone(),
                method: cfg.methods.get(ex.targets.len()).map_or("?", |m| m.name()).to_string(),
            });
        }
    }
    Ok(())
}

fn run<J: Job>(
    job: &mut J,
    cfg: &RunConfig,
    examples: &[Example],
    epochs: usize,
    phase: u64,
    mut observer: Option<&mut dyn TrainObserver>,
) -> Result<TrainLog> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    let mut log = TrainLog::default();
    let mut step = 0;
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, phase, epoch as u64])));
        let (mut loss, mut mse_sum, mut class_loss, mut correct) = (0.0, 0.0, 0.0, 0usize);
        let mut weight_sum: Vec<f64> = Vec::new();
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let observe = observer.is_some();
            let mut outs = Vec::with_capacity(batch.len());
            for chunk in batch.chunks(cfg.threads) {
                let part: Vec<Result<SampleOut>> = pool.install(|| {
                    chunk
                        .par_iter()
                        .map(|&i| {
                            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, phase, epoch as u64, i as u64]));
                            let draw = AugmentDraw::sample(&cfg.augment, &mut rng);
                            job.sample(&examples[i], &draw, observe)
                        })
                        .collect()
                });
                for r in part {
                    outs.push(r?);
                }
            }

            let n = outs.len() as f64;
            let mut class_grads = Gradients::zeros_like(job.class_params());
            let mut enhance_grads: Vec<Gradients> = outs[0].enhance_grads.iter().map(|g| Gradients::zeros(g.layout().clone())).collect();
            let mut batch_loss = 0.0;
            for o in &outs {
                class_grads.add_scaled(&o.class_grads, 1.0)?;
                for (acc, g) in enhance_grads.iter_mut().zip(&o.enhance_grads) {
                    acc.add_scaled(g, 1.0)?;
                }
                batch_loss += o.loss;
                mse_sum += o.mse;
                class_loss += o.class_loss;
                correct += o.correct as usize;
                if weight_sum.is_empty() {
                    weight_sum = vec![0.0; o.weights.len()];
                }
                for (a, w) in weight_sum.iter_mut().zip(&o.weights) {
                    *a += w;
                }
            }
            loss += batch_loss;
            class_grads.scale(1.0 / n);
            enhance_grads.iter_mut().for_each(|g| g.scale(1.0 / n));

            if let Some(obs) = observer.as_deref_mut() {
                let record = BatchRecord {
                    epoch,
                    batch: b,
                    class_params: job.class_params(),
                    samples: outs.iter_mut().filter_map(|o| o.observed.take()).collect(),
                    reported_loss: batch_loss / n,
                };
                obs.on_batch(&record);
            }
            job.apply(&class_grads, &enhance_grads, step)?;
            step += 1;
        }
        let n = examples.len() as f64;
        let entry = EpochLog {
            epoch: epoch + 1,
            loss: loss / n,
            mse: mse_sum / n,
            class_loss: class_loss / n,
            train_accuracy: correct as f64 / n,
            weights: weight_sum.iter().map(|w| w / n).collect(),
        };
        log::info!(
            "epoch {} loss {:.6} mse {:.6} class {:.6} acc {:.4}",
            entry.epoch,
            entry.loss,
            entry.mse,
            entry.class_loss,
            entry.train_accuracy
        );
        log.epochs.push(entry);
    }
    Ok(log)
}

fn class_optimizer(cfg: &RunConfig, net: &ClassNet, params: &NetParams, joint: bool) -> Sgd {
    let opt = Sgd::new(cfg.class_sgd.clone(), params);
    if joint {
        opt.with_block_multipliers(net.lr_multipliers(cfg.body_lr_mult, cfg.head_lr_mult))
    } else {
        opt
    }
}

struct RgbJob<'a> {
    net: &'a ClassNet,
    params: NetParams,
    opt: Sgd,
    extent: usize,
}

impl Job for RgbJob<'_> {
    fn sample(&self, ex: &Example, draw: &AugmentDraw, observe: bool) -> Result<SampleOut> {
        let view = draw.apply(&ex.image, self.extent)?;
        let mut grads = Gradients::zeros_like(&self.params);
        let pass = class_pass(self.net, &self.params, &view, None, ex.label, 1.0, &mut grads, false)?;
        Ok(SampleOut {
            class_grads: grads,
            enhance_grads: Vec::new(),
            loss: pass.loss,
            mse: 0.0,
            class_loss: pass.loss,
            weights: Vec::new(),
            correct: pass.prediction.argmax() == ex.label,
            observed: observe.then(|| ObservedSample { label: ex.label, stream_inputs: vec![view], weights: vec![1.0] }),
        })
    }

    fn class_params(&self) -> &NetParams {
        &self.params
    }

    fn apply(&mut self, class: &Gradients, _: &[Gradients], step: usize) -> Result<()> {
        self.opt.step(&mut self.params, class, step)
    }
}

/// RGB-only classifier training from fresh seeded parameters (first phase).
pub fn pretrain_classnet(cfg: &RunConfig, net: &ClassNet, examples: &[Example]) -> Result<(NetParams, TrainLog)> {
    cfg.validate()?;
    check_examples(cfg, examples, 0)?;
    let params = init_class_params(cfg, net);
    let opt = class_optimizer(cfg, net, &params, false);
    let mut job = RgbJob { net, params, opt, extent: cfg.augment.crop_extent };
    let log = run(&mut job, cfg, examples, cfg.pretrain_epochs, PHASE_PRETRAIN, None)?;
    Ok((job.params, log))
}

/// Continued RGB-only training with the joint-phase schedule; the baseline
/// every enhanced variant is compared against.
pub fn train_baseline(cfg: &RunConfig, net: &ClassNet, examples: &[Example], init: &NetParams) -> Result<(NetParams, TrainLog)> {
    cfg.validate()?;
    check_examples(cfg, examples, 0)?;
    let opt = class_optimizer(cfg, net, init, true);
    let mut job = RgbJob { net, params: init.clone(), opt, extent: cfg.augment.crop_extent };
    let log = run(&mut job, cfg, examples, cfg.epochs, PHASE_JOINT, None)?;
    Ok((job.params, log))
}

struct StatJob<'a> {
    net: &'a ClassNet,
    bank: &'a StaticFilterBank,
    weights: &'a StreamWeights,
    params: NetParams,
    opt: Sgd,
    extent: usize,
}

impl Job for StatJob<'_> {
    fn sample(&self, ex: &Example, draw: &AugmentDraw, observe: bool) -> Result<SampleOut> {
        let view = draw.apply(&ex.image, self.extent)?;
        let mut grads = Gradients::zeros_like(&self.params);
        let mut inputs: Vec<ImageRgb> =
            self.bank.filters.iter().map(|f| Ok(filtered_view(&view, f)?.image)).collect::<Result<_>>()?;
        inputs.push(view);
        let weights = self.weights.with_rgb();
        let mut loss = 0.0;
        let mut preds = Vec::with_capacity(inputs.len());
        for (input, &w) in inputs.iter().zip(&weights) {
            let pass = class_pass(self.net, &self.params, input, None, ex.label, w, &mut grads, false)?;
            loss += w * pass.loss;
            preds.push(pass.prediction);
        }
        let fused = fused_predict(&preds, self.weights)?;
        Ok(SampleOut {
            class_grads: grads,
            enhance_grads: Vec::new(),
            loss,
            mse: 0.0,
            class_loss: loss,
            weights: self.weights.w.clone(),
            correct: fused.argmax() == ex.label,
            observed: observe.then(|| ObservedSample { label: ex.label, stream_inputs: inputs, weights }),
        })
    }

    fn class_params(&self) -> &NetParams {
        &self.params
    }

    fn apply(&mut self, class: &Gradients, _: &[Gradients], step: usize) -> Result<()> {
        self.opt.step(&mut self.params, class, step)
    }
}

/// Classifier training on fixed filtered streams plus RGB with the loss
/// `sum_k W_k L_k + L_rgb`; the filters are not adapted.
pub fn train_stat(
    cfg: &RunConfig,
    net: &ClassNet,
    bank: &StaticFilterBank,
    weights: &StreamWeights,
    examples: &[Example],
    init: &NetParams,
    observer: Option<&mut dyn TrainObserver>,
) -> Result<(NetParams, TrainLog)> {
    cfg.validate()?;
    check_examples(cfg, examples, 0)?;
    if bank.len() != weights.len() {
        return Err(Error::dim(format!("{} bank filters for {} weights", bank.len(), weights.len())));
    }
    let opt = class_optimizer(cfg, net, init, true);
    let mut job = StatJob { net, bank, weights, params: init.clone(), opt, extent: cfg.augment.crop_extent };
    let log = run(&mut job, cfg, examples, cfg.epochs, PHASE_JOINT, observer)?;
    Ok((job.params, log))
}

struct DynJob<'a> {
    enhance: &'a EnhanceNet,
    class: &'a ClassNet,
    enhance_params: Vec<NetParams>,
    class_params: NetParams,
    enhance_opts: Vec<Sgd>,
    class_opt: Sgd,
    weighting: Weighting,
    include_rgb: bool,
    mse_term: bool,
    mse_scale: f64,
    extent: usize,
}

impl Job for DynJob<'_> {
    fn sample(&self, ex: &Example, draw: &AugmentDraw, observe: bool) -> Result<SampleOut> {
        let view = draw.apply(&ex.image, self.extent)?;
        let ycc = rgb_to_ycbcr(&view);
        let y = &ycc.y;
        let s = self.enhance.filter_size();
        let k_streams = self.enhance_params.len();

        let mut streams = Vec::with_capacity(k_streams);
        let mut mses = Vec::with_capacity(k_streams);
        for (k, params) in self.enhance_params.iter().enumerate() {
            let target = draw.apply_geometry(&ex.targets[k], self.extent)?;
            let (filter, tape) = self.enhance.generate_filter(params, y)?;
            let y_new = apply_filter(y, &filter)?;
            mses.push(mse(&y_new, &target)?);
            streams.push((target, tape, with_luminance(&view, &ycc, y_new)?));
        }
        let weights = if k_streams == 1 {
            StreamWeights { w: vec![1.0], w_rgb: 1.0 }
        } else {
            match self.weighting {
                Weighting::Equal => StreamWeights::equal(k_streams),
                Weighting::Mse => compute_weights_from_mse(&mses)?,
            }
        };

        let mut class_grads = Gradients::zeros_like(&self.class_params);
        let mut enhance_grads = Vec::with_capacity(k_streams);
        let mut class_loss = 0.0;
        let mut preds: Vec<Prediction> = Vec::with_capacity(k_streams + 1);
        let scale = self.mse_scale * 2.0 / y.len() as f64;
        for (k, (target, tape, ev)) in streams.iter().enumerate() {
            let w = weights.w[k];
            let pass =
                class_pass(self.class, &self.class_params, &ev.image, ev.mask.as_ref(), ex.label, w, &mut class_grads, true)?;
            class_loss += w * pass.loss;
            preds.push(pass.prediction);
            let mut dy = pass.luma_grad.expect("requested");
            if self.mse_term {
                for ((d, p), t) in dy.data_mut().iter_mut().zip(ev.y_enhanced.data()).zip(target.data()) {
                    *d += scale * (p - t);
                }
            }
            let dtaps = tap_gradient(y, &dy, s)?;
            let mut g = Gradients::zeros_like(&self.enhance_params[k]);
            self.enhance.backward_taps(&self.enhance_params[k], tape, &dtaps, &mut g)?;
            enhance_grads.push(g);
        }
        if self.include_rgb {
            let pass = class_pass(self.class, &self.class_params, &view, None, ex.label, 1.0, &mut class_grads, false)?;
            class_loss += pass.loss;
            preds.push(pass.prediction);
        }
        let fused = if self.include_rgb { fused_predict(&preds, &weights)? } else { preds[0].clone() };
        let mse_total: f64 = mses.iter().sum();
        let observed = observe.then(|| {
            let mut inputs: Vec<ImageRgb> = streams.iter().map(|(_, _, ev)| ev.image.clone()).collect();
            let mut w = weights.w.clone();
            if self.include_rgb {
                inputs.push(view.clone());
                w.push(1.0);
            }
            ObservedSample { label: ex.label, stream_inputs: inputs, weights: w }
        });
        Ok(SampleOut {
            class_grads,
            enhance_grads,
            loss: if self.mse_term { self.mse_scale * mse_total } else { 0.0 } + class_loss,
            mse: mse_total,
            class_loss,
            weights: if k_streams > 1 { weights.w } else { Vec::new() },
            correct: fused.argmax() == ex.label,
            observed,
        })
    }

    fn class_params(&self) -> &NetParams {
        &self.class_params
    }

    fn apply(&mut self, class: &Gradients, enhance: &[Gradients], step: usize) -> Result<()> {
        self.class_opt.step(&mut self.class_params, class, step)?;
        for ((opt, p), g) in self.enhance_opts.iter_mut().zip(&mut self.enhance_params).zip(enhance) {
            opt.step(p, g, step)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct A1Result {
    pub enhance: NetParams,
    pub class: NetParams,
    pub log: TrainLog,
}

#[derive(Debug, Clone)]
pub struct DynResult {
    pub enhance: Vec<NetParams>,
    pub class: NetParams,
    /// Mean per-sample weights over the final epoch.
    pub weights: StreamWeights,
    pub log: TrainLog,
}

#[allow(clippy::too_many_arguments)]
fn dyn_job<'a>(
    cfg: &RunConfig,
    enhance: &'a EnhanceNet,
    class: &'a ClassNet,
    init: &NetParams,
    include_rgb: bool,
) -> DynJob<'a> {
    let enhance_params: Vec<NetParams> = (0..cfg.methods.len()).map(|k| init_enhance_params(cfg, enhance, k)).collect();
    let enhance_opts = enhance_params.iter().map(|p| Sgd::new(cfg.enhance_sgd.clone(), p)).collect();
    DynJob {
        enhance,
        class,
        class_opt: class_optimizer(cfg, class, init, true),
        class_params: init.clone(),
        enhance_params,
        enhance_opts,
        weighting: cfg.weighting,
        include_rgb,
        mse_term: cfg.mse_term,
        mse_scale: cfg.mse_scale,
        extent: cfg.augment.crop_extent,
    }
}

fn check_filter_size(cfg: &RunConfig, enhance: &EnhanceNet) -> Result<()> {
    if enhance.filter_size() != cfg.filter_size {
        return Err(Error::param(format!(
            "enhancement network generates {0}x{0} filters, run expects {1}x{1}",
            enhance.filter_size(),
            cfg.filter_size
        )));
    }
    Ok(())
}

/// Joint training of one enhancement network and the classifier with the
/// loss `mse_scale * mse(Y', T) + L`. `examples[i].targets[0]` is the method's target.
pub fn train_approach1(
    cfg: &RunConfig,
    enhance: &EnhanceNet,
    class: &ClassNet,
    examples: &[Example],
    init: &NetParams,
) -> Result<A1Result> {
    cfg.validate()?;
    check_filter_size(cfg, enhance)?;
    check_examples(cfg, examples, 1)?;
    let single = RunConfig { methods: cfg.methods[..1].to_vec(), ..cfg.clone() };
    let mut job = dyn_job(&single, enhance, class, init, false);
    let log = run(&mut job, cfg, examples, cfg.epochs, PHASE_JOINT, None)?;
    Ok(A1Result { enhance: job.enhance_params.remove(0), class: job.class_params, log })
}

/// Joint training of `K` enhancement networks and the classifier with the
/// loss `mse_scale * sum_k mse_k + sum_k W_k L_k + L_rgb`, `W` from each sample's
/// current errors. Targets are aligned with `cfg.methods`.
pub fn train_dyn(
    cfg: &RunConfig,
    enhance: &EnhanceNet,
    class: &ClassNet,
    examples: &[Example],
    init: &NetParams,
) -> Result<DynResult> {
    cfg.validate()?;
    check_filter_size(cfg, enhance)?;
    check_examples(cfg, examples, cfg.methods.len())?;
    let mut job = dyn_job(cfg, enhance, class, init, true);
    let log = run(&mut job, cfg, examples, cfg.epochs, PHASE_JOINT, None)?;
    let k = cfg.methods.len();
    let weights = match log.epochs.last() {
        Some(last) => {
            let total: f64 = last.weights.iter().sum();
            StreamWeights::new(last.weights.iter().map(|w| w / total).collect())?
        }
        None => StreamWeights::equal(k),
    };
    Ok(DynResult { enhance: job.enhance_params, class: job.class_params, weights, log })
}
