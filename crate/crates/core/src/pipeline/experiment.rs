use super::bank::derive_static_filters;
use super::config::{Approach, RunConfig, Weighting};
use super::eval::TrainedModel;
use super::static_filter_mses;
use super::train::{train_approach1, train_baseline, train_dyn, train_stat, TrainLog};
use super::weights::{compute_weights_from_mse, StreamWeights};
use crate::autonet::NetParams;
use crate::classify::ClassNet;
use crate::dataio::Example;
use crate::dynenh::EnhanceNet;
use crate::error::{Error, Result};
use crate::imgcore::luminance;

/// The log of one training stage (`joint`, or `a1-<method>` for the filter
/// networks a static bank is distilled from).
#[derive(Debug, Clone)]
pub struct StageLog {
    pub stage: String,
    pub log: TrainLog,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: TrainedModel,
    pub stages: Vec<StageLog>,
    /// A2 only: the trained filter networks the bank was distilled from.
    pub distilled_from: Vec<NetParams>,
}

/// Second-phase training of `cfg.approach`, starting from the RGB-trained
/// classifier `init`. Targets of `examples` align with `cfg.methods`.
pub fn train_model(
    cfg: &RunConfig,
    class: &ClassNet,
    enhance: &EnhanceNet,
    examples: &[Example],
    init: &NetParams,
) -> Result<Experiment> {
    cfg.validate()?;
    let joint = |log| vec![StageLog { stage: "joint".into(), log }];
    Ok(match cfg.approach {
        Approach::Baseline => {
            let (class, log) = train_baseline(cfg, class, examples, init)?;
            Experiment { model: TrainedModel::Baseline { class }, stages: joint(log), distilled_from: Vec::new() }
        }
        Approach::A1 => {
            let r = train_approach1(cfg, enhance, class, examples, init)?;
            let model = TrainedModel::A1 { method: cfg.methods[0], enhance: r.enhance, class: r.class };
            Experiment { model, stages: joint(r.log), distilled_from: Vec::new() }
        }
        Approach::A3 => {
            let r = train_dyn(cfg, enhance, class, examples, init)?;
            let model = TrainedModel::A3 { methods: cfg.methods.clone(), enhance: r.enhance, weights: r.weights, class: r.class };
            Experiment { model, stages: joint(r.log), distilled_from: Vec::new() }
        }
        Approach::A2 => {
            if examples.iter().any(|e| e.targets.len() < cfg.methods.len()) {
                return Err(Error::param("static filters need the targets of every method"));
            }
            let mut stages = Vec::new();
            let mut params = Vec::new();
            for (k, &method) in cfg.methods.iter().enumerate() {
                let single: Vec<Example> =
                    examples.iter().map(|e| Example { targets: vec![e.targets[k].clone()], ..e.clone() }).collect();
                let a1_cfg = RunConfig { approach: Approach::A1, methods: vec![method], ..cfg.clone() };
                let r = train_approach1(&a1_cfg, enhance, class, &single, init)?;
                stages.push(StageLog { stage: format!("a1-{method}"), log: r.log });
                params.push(r.enhance);
            }
            let lumas: Vec<_> = examples.iter().map(|e| luminance(&e.image)).collect();
            let bank = derive_static_filters(enhance, &cfg.methods, &params, &lumas)?;
            let weights = match cfg.weighting {
                Weighting::Equal => StreamWeights::equal(cfg.methods.len()),
                Weighting::Mse => {
                    let targets: Vec<Vec<_>> = examples.iter().map(|e| e.targets.clone()).collect();
                    compute_weights_from_mse(&static_filter_mses(&bank, &lumas, &targets)?)?
                }
            };
            let (class, log) = train_stat(cfg, class, &bank, &weights, examples, init, None)?;
            stages.push(StageLog { stage: "joint".into(), log });
            Experiment { model: TrainedModel::A2 { bank, weights, class }, stages, distilled_from: params }
        }
    })
}
