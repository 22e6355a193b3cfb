//! The subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use dynenh::classify::{ClassNet, ClassNetConfig};
use dynenh::dataio::{
    generate_targets, load_dataset, load_examples, synth_texture_dataset, AugmentDraw, DatasetManifest, Example, Split,
    SynthConfig, TargetCache,
};
use dynenh::dynenh::{apply_filter, EnhanceNet, EnhanceNetConfig};
use dynenh::enhance::EnhanceMethod;
use dynenh::imgcore::io::write_gray;
use dynenh::imgcore::{luminance, Plane};
use dynenh::pipeline::{
    evaluate, evaluation_view, gradient_suite, per_image_filters, pretrain_classnet, train_model, Approach, StageLog,
    TrainedModel,
};
use dynenh::Error as CoreError;

use crate::plot;
use crate::records::*;
use crate::rundir::{timestamped, write_atomic, RunLock};
use crate::settings::Settings;

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Methods whose targets a run needs.
fn target_methods(settings: &Settings) -> Result<Vec<EnhanceMethod>> {
    let cfg = settings.run_config()?;
    Ok(if cfg.approach == Approach::Baseline { Vec::new() } else { cfg.methods })
}

fn remediate(e: CoreError, settings: &Settings) -> anyhow::Error {
    match e {
        CoreError::MissingTarget { .. } => anyhow!(
            "{e}\nGenerate the targets with: dynenh gen-targets --data {} --cache {}",
            settings.get("data"),
            settings.get("cache")
        ),
        other => other.into(),
    }
}

fn manifest(settings: &Settings) -> Result<DatasetManifest> {
    let data = settings.data_dir()?;
    load_dataset(&data, settings.ratios()?, settings.get("split_seed").parse()?)
        .with_context(|| format!("loading dataset {}", data.display()))
}

fn nets(settings: &Settings, m: &DatasetManifest) -> Result<(ClassNet, EnhanceNet)> {
    let cfg = settings.run_config()?;
    Ok((
        ClassNet::new(ClassNetConfig::desk(m.class_count()))?,
        EnhanceNet::new(EnhanceNetConfig::desk(cfg.filter_size))?,
    ))
}

pub fn gen_targets(settings: &Settings) -> Result<()> {
    let m = manifest(settings)?;
    let methods = settings.methods()?;
    let cache = TargetCache::new(settings.cache_dir());
    let report = generate_targets(&m, &methods, &settings.enhance_params()?, &cache)?;
    println!(
        "targets in {}: computed {}, reused {}, spot-checked {}, repaired {}",
        cache.dir().display(),
        report.computed,
        report.skipped,
        report.spot_checked,
        report.repaired
    );
    if !report.failures.is_empty() {
        for f in &report.failures {
            eprintln!("failed: {} ({}): {}", f.path.display(), f.method, f.message);
        }
        bail!("{} targets could not be generated", report.failures.len());
    }
    Ok(())
}

pub fn synth_data(cfg: &SynthConfig, out: &Path) -> Result<()> {
    let (m, report) = synth_texture_dataset(cfg, out)?;
    let text = format!(
        "classes={}\nper_class={}\nextent={}\nseed={}\nblur_sigma={}\ntrain={}\nval={}\ntest={}\n\
         oracle_clean_accuracy={}\noracle_blurred_accuracy={}\noracle_sharpened_accuracy={}\n",
        cfg.class_count,
        cfg.per_class,
        cfg.extent,
        cfg.seed,
        cfg.blur_sigma,
        m.train.len(),
        m.val.len(),
        m.test.len(),
        report.clean_accuracy,
        report.blurred_accuracy,
        report.sharpened_accuracy
    );
    write_atomic(out, "synth.txt", text.as_bytes())?;
    print!("{text}");
    Ok(())
}

/// Trains `settings` into `out` (or a fresh timestamped directory under
/// `runs_root`) and evaluates the test split. Returns the run directory.
pub fn train(settings: &Settings, out: Option<PathBuf>, runs_root: &Path) -> Result<PathBuf> {
    let cfg = settings.run_config()?;
    let m = manifest(settings)?;
    let methods = target_methods(settings)?;
    let cache = TargetCache::new(settings.cache_dir());
    let params = settings.enhance_params()?;
    let train = load_examples(&m, Split::Train, &methods, Some(&cache), &params).map_err(|e| remediate(e, settings))?;
    let test = load_examples(&m, Split::Test, &methods, Some(&cache), &params).map_err(|e| remediate(e, settings))?;
    let (class, enhance) = nets(settings, &m)?;

    let dir = out.unwrap_or_else(|| timestamped(runs_root, &format!("train-{}", cfg.approach)));
    let _lock = RunLock::acquire(&dir)?;
    write_atomic(&dir, CONFIG_FILE, settings.to_text().as_bytes())?;
    let inputs = format!("dataset={}\ntargets={}\n", dataset_hash(&m)?, params.fingerprint().replace('\n', ";"));
    write_atomic(&dir, INPUTS_FILE, inputs.as_bytes())?;
    log::info!("run directory {}", dir.display());
    eprint!("{}", settings.to_text());

    let (init, pre_log) = pretrain_classnet(&cfg, &class, &train)?;
    let exp = train_model(&cfg, &class, &enhance, &train, &init)?;
    let mut stages = vec![StageLog { stage: "pretrain".into(), log: pre_log }];
    stages.extend(exp.stages);
    write_atomic(&dir, LOG_FILE, &log_csv(&stages)?)?;
    save_model(&dir, &exp.model, &class, &enhance)?;

    if test.is_empty() {
        log::warn!("test split is empty; no summary written");
    } else {
        let report = evaluate(&exp.model, &class, Some(&enhance), &test, cfg.augment.crop_extent)?;
        write_atomic(&dir, SUMMARY_FILE, &summary_csv(&report)?)?;
        print_summary(&report);
    }
    println!("{}", dir.display());
    Ok(dir)
}

fn print_summary(report: &dynenh::pipeline::EvalReport) {
    for (stream, metric, value) in summary_rows(report) {
        println!("{stream:>8} {metric:<12} {value:.4}");
    }
}

struct LoadedRun {
    settings: Settings,
    manifest: DatasetManifest,
    class: ClassNet,
    enhance: EnhanceNet,
    model: TrainedModel,
}

fn load_run(run: &Path) -> Result<LoadedRun> {
    let mut settings = Settings::default();
    settings.apply_file(&run.join(CONFIG_FILE)).with_context(|| format!("{} is not a run directory", run.display()))?;
    let cfg = settings.run_config()?;
    let manifest = manifest(&settings)?;
    let (class, enhance) = nets(&settings, &manifest)?;
    let model = load_model(run, cfg.approach, &cfg.methods, &class, &enhance)?;
    Ok(LoadedRun { settings, manifest, class, enhance, model })
}

fn enhanced_methods(model: &TrainedModel) -> Vec<EnhanceMethod> {
    match model {
        TrainedModel::Baseline { .. } => Vec::new(),
        TrainedModel::A1 { method, .. } => vec![*method],
        TrainedModel::A2 { bank, .. } => bank.methods.clone(),
        TrainedModel::A3 { methods, .. } => methods.clone(),
    }
}

/// Examples of `split`, with targets when the cache holds them.
fn split_examples(r: &LoadedRun, split: Split) -> Result<Vec<Example>> {
    if r.manifest.split(split).is_empty() {
        bail!("split {} is empty for this dataset", split.name());
    }
    let methods = enhanced_methods(&r.model);
    let cache = TargetCache::new(r.settings.cache_dir());
    let params = r.settings.enhance_params()?;
    match load_examples(&r.manifest, split, &methods, Some(&cache), &params) {
        Err(CoreError::MissingTarget { path, method }) => {
            log::warn!("no cached {method} target for {}; PSNR is not reported", path.display());
            Ok(load_examples(&r.manifest, split, &[], None, &params)?)
        }
        other => Ok(other?),
    }
}

pub struct DumpRequest {
    pub dir: PathBuf,
    pub limit: usize,
}

pub fn eval(run: &Path, split: Split, out: Option<PathBuf>, dump: Option<DumpRequest>) -> Result<PathBuf> {
    let r = load_run(run)?;
    let examples = split_examples(&r, split)?;
    let extent = r.settings.run_config()?.augment.crop_extent;
    let dir = out.unwrap_or_else(|| run.join(format!("eval-{}", split.name())));
    let _lock = RunLock::acquire(&dir)?;
    let report = evaluate(&r.model, &r.class, Some(&r.enhance), &examples, extent)?;
    write_atomic(&dir, SUMMARY_FILE, &summary_csv(&report)?)?;
    print_summary(&report);
    if let Some(d) = dump {
        dump_enhanced(&r, &examples, extent, &d)?;
    }
    println!("{}", dir.display());
    Ok(dir)
}

/// The enhanced luminance of stream `k` for one evaluation view.
fn stream_luma(r: &LoadedRun, k: usize, y: &Plane) -> Result<Plane> {
    Ok(match &r.model {
        TrainedModel::A1 { enhance, .. } => apply_filter(y, &r.enhance.generate_filter(enhance, y)?.0)?,
        TrainedModel::A3 { enhance, .. } => apply_filter(y, &r.enhance.generate_filter(&enhance[k], y)?.0)?,
        TrainedModel::A2 { bank, .. } => apply_filter(y, &bank.filters[k])?,
        TrainedModel::Baseline { .. } => unreachable!("no enhancement streams"),
    })
}

/// Per image and method: the target, the enhanced luminance and the
/// complement of their absolute difference.
fn dump_enhanced(r: &LoadedRun, examples: &[Example], extent: usize, req: &DumpRequest) -> Result<()> {
    let methods = enhanced_methods(&r.model);
    if methods.is_empty() {
        bail!("the baseline has no enhancement streams to dump");
    }
    fs::create_dir_all(&req.dir)?;
    for ex in examples.iter().take(req.limit) {
        let view = evaluation_view(ex, extent)?;
        let y = luminance(&view);
        let stem = ex.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for (k, m) in methods.iter().enumerate() {
            let y_new = stream_luma(r, k, &y)?;
            let base = req.dir.join(format!("{stem}-{m}"));
            write_gray(&PathBuf::from(format!("{}-enhanced.png", base.display())), &y_new.clamp01())?;
            if let Some(t) = ex.targets.get(k) {
                let t = AugmentDraw::evaluation().apply_geometry(t, extent)?;
                write_gray(&PathBuf::from(format!("{}-target.png", base.display())), &t)?;
                let diff = t.zip_map(&y_new, |a, b| (1.0 - (a - b).abs()).clamp(0.0, 1.0))?;
                write_gray(&PathBuf::from(format!("{}-diff.png", base.display())), &diff)?;
            }
        }
    }
    Ok(())
}

pub fn export_filters(run: &Path, split: Split, out: &Path) -> Result<()> {
    let r = load_run(run)?;
    let size = r.enhance.filter_size();
    let rows: Vec<Vec<String>> = match &r.model {
        TrainedModel::Baseline { .. } => bail!("the baseline has no filters"),
        TrainedModel::A2 { bank, .. } => {
            bank.methods.iter().zip(&bank.filters).map(|(m, f)| filter_row("static", *m, f)).collect()
        }
        TrainedModel::A1 { .. } | TrainedModel::A3 { .. } => {
            let examples = load_examples(&r.manifest, split, &[], None, &r.settings.enhance_params()?)?;
            if examples.is_empty() {
                bail!("split {} is empty for this dataset", split.name());
            }
            let lumas: Vec<Plane> = examples.iter().map(|e| luminance(&e.image)).collect();
            let dynamic: Vec<(EnhanceMethod, &dynenh::autonet::NetParams)> = match &r.model {
                TrainedModel::A1 { method, enhance, .. } => vec![(*method, enhance)],
                TrainedModel::A3 { methods, enhance, .. } => methods.iter().copied().zip(enhance).collect(),
                _ => unreachable!(),
            };
            let mut rows = Vec::new();
            for (m, p) in dynamic {
                let filters = per_image_filters(&r.enhance, p, &lumas)?;
                for (ex, f) in examples.iter().zip(&filters) {
                    let rel = ex.path.strip_prefix(&r.manifest.root).unwrap_or(&ex.path);
                    rows.push(filter_row(&rel.to_string_lossy(), m, f));
                }
            }
            rows
        }
    };
    let bytes = filters_csv(size, rows)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
    println!("{}", out.display());
    Ok(())
}

pub fn gradcheck(seed: u64, coords: usize, filter_size: usize) -> Result<()> {
    let rows = gradient_suite(seed, coords, filter_size)?;
    println!("{:<28} {:>7} {:>6} {:>14}  status", "check", "coords", "kinks", "max_rel_error");
    let mut failed = 0;
    for r in &rows {
        let ok = r.max_rel_error < GRADCHECK_TOLERANCE;
        failed += usize::from(!ok);
        println!("{:<28} {:>7} {:>6} {:>14.3e}  {}", r.name, r.checked, r.kinks, r.max_rel_error, if ok { "ok" } else { "FAIL" });
    }
    if failed > 0 {
        bail!("{failed} gradient checks exceed {GRADCHECK_TOLERANCE:e}");
    }
    Ok(())
}

/// Collects the test summaries and loss curves of `runs` into `out`.
pub fn report(runs: &[PathBuf], out: Option<PathBuf>, plot_file: bool, runs_root: &Path) -> Result<PathBuf> {
    let dir = match out {
        Some(d) => d,
        None if runs.len() == 1 => runs[0].join("report"),
        None => timestamped(runs_root, "report"),
    };
    let _lock = RunLock::acquire(&dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "stream", "metric", "value"])?;
    let mut curves = Vec::new();
    for run in runs {
        let name = run.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| run.display().to_string());
        for (stream, metric, value) in read_summary(&run.join(SUMMARY_FILE))? {
            println!("{name} {stream:>8} {metric:<12} {value:.4}");
            w.write_record([name.clone(), stream, metric, value.to_string()])?;
        }
        let curve: Vec<f64> =
            read_loss_curve(&run.join(LOG_FILE))?.into_iter().filter(|(s, _, _)| s == "joint").map(|(_, _, l)| l).collect();
        curves.push((name, curve));
    }
    write_atomic(&dir, SUMMARY_FILE, &w.into_inner().map_err(|e| anyhow!("csv: {e}"))?)?;
    if plot_file {
        write_atomic(&dir, "loss.svg", plot::loss_svg("joint-phase training loss", &curves).as_bytes())?;
    }
    println!("{}", dir.display());
    Ok(dir)
}
