//! The files of an experiment directory.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use dynenh::autonet::checkpoint;
use dynenh::classify::ClassNet;
use dynenh::dynenh::{DynamicFilter, EnhanceNet};
use dynenh::enhance::EnhanceMethod;
use dynenh::imgcore::Plane;
use dynenh::pipeline::{Approach, EvalReport, StageLog, StaticFilterBank, StreamWeights, TrainedModel};
use sha2::{Digest, Sha256};

use crate::rundir::write_atomic;

pub const CONFIG_FILE: &str = "config.txt";
pub const LOG_FILE: &str = "log.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const INPUTS_FILE: &str = "inputs.sha256";
pub const CHECKPOINT_DIR: &str = "checkpoints";

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| anyhow!("csv: {e}"))
}

pub fn log_csv(stages: &[StageLog]) -> Result<Vec<u8>> {
    let rows = stages.iter().flat_map(|s| {
        s.log.epochs.iter().map(move |e| {
            vec![
                s.stage.clone(),
                e.epoch.to_string(),
                e.loss.to_string(),
                e.mse.to_string(),
                e.class_loss.to_string(),
                e.train_accuracy.to_string(),
                e.weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(";"),
            ]
        })
    });
    csv_bytes(&["stage", "epoch", "loss", "mse", "class_loss", "train_accuracy", "weights"], rows)
}

/// `(stage, epoch, loss)` rows of a log file.
pub fn read_loss_curve(path: &Path) -> Result<Vec<(String, usize, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| anyhow!("{}: short row", path.display()));
        out.push((field(0)?.to_string(), field(1)?.parse()?, field(2)?.parse()?));
    }
    Ok(out)
}

pub fn summary_rows(report: &EvalReport) -> Vec<(String, String, f64)> {
    let mut rows = Vec::new();
    for s in report.streams.iter().chain(std::iter::once(&report.fused)) {
        rows.push((s.name.clone(), "accuracy".to_string(), s.accuracy));
        if let Some(map) = s.map {
            rows.push((s.name.clone(), "map".to_string(), map));
        }
    }
    for p in &report.psnr {
        let name = p.method.name().to_string();
        rows.push((name.clone(), "psnr_input".into(), p.input_psnr));
        rows.push((name.clone(), "psnr_output".into(), p.output_psnr));
        rows.push((name, "psnr_gain".into(), p.gain()));
    }
    rows
}

pub fn summary_csv(report: &EvalReport) -> Result<Vec<u8>> {
    let rows = summary_rows(report).into_iter().map(|(s, m, v)| vec![s, m, v.to_string()]);
    csv_bytes(&["stream", "metric", "value"], rows)
}

pub fn read_summary(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 {
            bail!("{}: expected stream,metric,value rows", path.display());
        }
        out.push((rec[0].to_string(), rec[1].to_string(), rec[2].parse()?));
    }
    Ok(out)
}

pub fn weights_csv(methods: &[EnhanceMethod], w: &StreamWeights) -> Result<Vec<u8>> {
    let rows = methods
        .iter()
        .zip(&w.w)
        .map(|(m, v)| vec![m.name().to_string(), v.to_string()])
        .chain(std::iter::once(vec!["rgb".to_string(), w.w_rgb.to_string()]));
    csv_bytes(&["stream", "weight"], rows)
}

fn read_weights(path: &Path, methods: &[EnhanceMethod]) -> Result<StreamWeights> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut w = Vec::new();
    for (rec, m) in r.records().zip(methods) {
        let rec = rec?;
        if &rec[0] != m.name() {
            bail!("{}: expected stream {}, found {}", path.display(), m.name(), &rec[0]);
        }
        w.push(rec[1].parse()?);
    }
    if w.len() != methods.len() {
        bail!("{}: {} weights for {} methods", path.display(), w.len(), methods.len());
    }
    Ok(StreamWeights::new(w)?)
}

pub fn filter_row(label: &str, method: EnhanceMethod, f: &DynamicFilter) -> Vec<String> {
    let mut row = vec![label.to_string(), method.name().to_string()];
    row.extend(f.taps().data().iter().map(|v| v.to_string()));
    row
}

pub fn filters_csv(size: usize, rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut header = vec!["image".to_string(), "method".to_string()];
    header.extend((0..size * size).map(|i| format!("tap_{}_{}", i / size, i % size)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_bytes(&header, rows)
}

fn read_bank(path: &Path, methods: &[EnhanceMethod], size: usize) -> Result<StaticFilterBank> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut filters = Vec::new();
    for (rec, m) in r.records().zip(methods) {
        let rec = rec?;
        if &rec[1] != m.name() || rec.len() != 2 + size * size {
            bail!("{}: malformed row for {}", path.display(), m.name());
        }
        let taps = rec.iter().skip(2).map(|v| v.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>()?;
        filters.push(DynamicFilter::new(Plane::new(size, size, taps)?)?);
    }
    Ok(StaticFilterBank::new(methods.to_vec(), filters)?)
}

fn enhance_file(m: EnhanceMethod) -> String {
    format!("enhance-{}.ckpt", m.name())
}

const CLASS_FILE: &str = "class.ckpt";
const BANK_FILE: &str = "bank.csv";

pub fn save_model(dir: &Path, model: &TrainedModel, class: &ClassNet, enhance: &EnhanceNet) -> Result<()> {
    let ck = dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ck)?;
    write_atomic(&ck, CLASS_FILE, &checkpoint::encode(class.network(), model.class_params())?)?;
    match model {
        TrainedModel::Baseline { .. } => {}
        TrainedModel::A1 { method, enhance: p, .. } => {
            write_atomic(&ck, &enhance_file(*method), &checkpoint::encode(enhance.network(), p)?)?;
        }
        TrainedModel::A2 { bank, weights, .. } => {
            let rows = bank.methods.iter().zip(&bank.filters).map(|(m, f)| filter_row("static", *m, f));
            write_atomic(&ck, BANK_FILE, &filters_csv(bank.filter_size(), rows)?)?;
            write_atomic(dir, WEIGHTS_FILE, &weights_csv(&bank.methods, weights)?)?;
        }
        TrainedModel::A3 { methods, enhance: ps, weights, .. } => {
            for (m, p) in methods.iter().zip(ps) {
                write_atomic(&ck, &enhance_file(*m), &checkpoint::encode(enhance.network(), p)?)?;
            }
            write_atomic(dir, WEIGHTS_FILE, &weights_csv(methods, weights)?)?;
        }
    }
    Ok(())
}

pub fn load_model(
    dir: &Path,
    approach: Approach,
    methods: &[EnhanceMethod],
    class: &ClassNet,
    enhance: &EnhanceNet,
) -> Result<TrainedModel> {
    let ck = dir.join(CHECKPOINT_DIR);
    let class_params = checkpoint::load(&ck.join(CLASS_FILE), class.network())
        .with_context(|| format!("loading the classifier checkpoint of {}", dir.display()))?;
    let load_enh = |m: EnhanceMethod| {
        checkpoint::load(&ck.join(enhance_file(m)), enhance.network()).with_context(|| format!("loading the {m} checkpoint"))
    };
    Ok(match approach {
        Approach::Baseline => TrainedModel::Baseline { class: class_params },
        Approach::A1 => TrainedModel::A1 { method: methods[0], enhance: load_enh(methods[0])?, class: class_params },
        Approach::A2 => TrainedModel::A2 {
            bank: read_bank(&ck.join(BANK_FILE), methods, enhance.filter_size())?,
            weights: read_weights(&dir.join(WEIGHTS_FILE), methods)?,
            class: class_params,
        },
        Approach::A3 => TrainedModel::A3 {
            methods: methods.to_vec(),
            enhance: methods.iter().map(|&m| load_enh(m)).collect::<Result<_>>()?,
            weights: read_weights(&dir.join(WEIGHTS_FILE), methods)?,
            class: class_params,
        },
    })
}

/// Content hash of the dataset: class names, then every sample's split,
/// relative path, label and file bytes, in manifest order.
pub fn dataset_hash(manifest: &dynenh::dataio::DatasetManifest) -> Result<String> {
    let mut h = Sha256::new();
    for c in &manifest.class_names {
        h.update(c.as_bytes());
        h.update([0]);
    }
    for (split, samples) in [("train", &manifest.train), ("val", &manifest.val), ("test", &manifest.test)] {
        for s in samples {
            h.update(split.as_bytes());
            h.update(s.path.to_string_lossy().as_bytes());
            h.update(s.label.to_le_bytes());
            h.update(fs::read(manifest.absolute(s))?);
        }
    }
    Ok(format!("{:x}", h.finalize()))
}
