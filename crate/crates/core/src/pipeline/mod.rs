//! The three enhancement-plus-classification architectures, the MSE-based
//! stream weighting and weighted fusion at inference time.
//!
//! * A1: one dynamic filter stream trained jointly with the classifier.
//! * A2: fixed mean filters (one per method) plus RGB; only the classifier
//!   learns, with loss `sum_k W_k L_k + L_rgb`.
//! * A3: one dynamic filter stream per method plus RGB, trained jointly with
//!   per-sample weights from the current reconstruction errors.
//!
//! Every variant fine-tunes a classifier first trained on RGB alone.

mod bank;
mod config;
mod eval;
mod experiment;
mod gradsuite;
mod streams;
mod train;
mod weights;

pub use bank::{derive_static_filters, per_image_filters, StaticFilterBank};
pub use config::{Approach, RunConfig, Weighting};
pub use eval::{evaluate, evaluation_view, run_streams, EvalReport, PsnrMetrics, StreamMetrics, StreamOutputs, TrainedModel, PSNR_CAP};
pub use experiment::{train_model, Experiment, StageLog};
pub use gradsuite::gradient_suite;
pub use streams::{class_pass, filtered_view, with_luminance, ClassPass, EnhancedView};
pub use train::{
    derive_seed, init_class_params, init_enhance_params, pretrain_classnet, train_approach1, train_baseline, train_dyn,
    train_stat, A1Result, BatchRecord, DynResult, EpochLog, ObservedSample, TrainLog, TrainObserver,
};
pub use weights::{compute_weights_from_mse, fused_predict, StreamWeights};

use crate::error::Result;
use crate::imgcore::{mse, Plane};

/// Mean over images of `mse(apply(filter_k, Y), T_k)` for every bank filter.
pub fn static_filter_mses(bank: &StaticFilterBank, lumas: &[Plane], targets: &[Vec<Plane>]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; bank.len()];
    for (y, ts) in lumas.iter().zip(targets) {
        for (k, f) in bank.filters.iter().enumerate() {
            out[k] += mse(&crate::dynenh::apply_filter(y, f)?, &ts[k])?;
        }
    }
    let n = lumas.len().max(1) as f64;
    Ok(out.into_iter().map(|v| v / n).collect())
}
