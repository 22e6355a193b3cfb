//! End-to-end acceptance suite. Every criterion runs in sequence and prints a
//! single PASS/FAIL line; the test fails if any criterion fails.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dynenh::autonet::softmax_cross_entropy;
use dynenh::classify::{ClassNet, ClassNetConfig};
use dynenh::dataio::*;
use dynenh::dynenh::{apply_filter, EnhanceNet, EnhanceNetConfig};
use dynenh::enhance::{guided, wls_smooth, EnhanceMethod, EnhanceParams};
use dynenh::imgcore::{box_filter, gaussian_blur, luminance, mse, Plane};
use dynenh::pipeline::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget_secs: u64, detail: String) -> Outcome {
    check(elapsed <= Duration::from_secs(budget_secs), format!("{detail}; {:.1}s of {budget_secs}s", elapsed.as_secs_f64()))
}

/// Bypasses the test harness's output capture so the lines always show.
fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

struct Corpus {
    _dir: tempfile::TempDir,
    train: Vec<Example>,
    test: Vec<Example>,
    classes: usize,
}

fn corpus(cfg: &SynthConfig, methods: &[EnhanceMethod]) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = synth_texture_dataset(cfg, &dir.path().join("data")).unwrap();
    let cache = TargetCache::new(dir.path().join("cache"));
    let params = EnhanceParams::default();
    generate_targets(&manifest, methods, &params, &cache).unwrap();
    let train = load_examples(&manifest, Split::Train, methods, Some(&cache), &params).unwrap();
    let test = load_examples(&manifest, Split::Test, methods, Some(&cache), &params).unwrap();
    Corpus { _dir: dir, train, test, classes: manifest.class_count() }
}

fn small_corpus(methods: &[EnhanceMethod]) -> Corpus {
    let cfg = SynthConfig { per_class: 3, extent: 64, ratios: SplitRatios { train: 0.67, val: 0.0, test: 0.33 }, ..Default::default() };
    corpus(&cfg, methods)
}

fn desk_nets(classes: usize) -> (ClassNet, EnhanceNet) {
    (ClassNet::new(ClassNetConfig::desk(classes)).unwrap(), EnhanceNet::new(EnhanceNetConfig::desk(6)).unwrap())
}

fn full_view_config(approach: Approach, methods: &[EnhanceMethod]) -> RunConfig {
    let mut cfg = RunConfig { approach, methods: methods.to_vec(), epochs: 1, pretrain_epochs: 1, batch_size: 4, ..Default::default() };
    cfg.augment.enable_flips = false;
    cfg
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let rows = gradient_suite(2024, 100, 6).map_err(|e| e.to_string())?;
    let worst = rows.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error)).unwrap();
    let short = rows.iter().filter(|r| r.checked < 100 && !r.name.ends_with("/input")).count();
    let names = ["conv/", "conv_stride2/", "fc/", "relu/", "maxpool/", "flatten/", "softmax_cross_entropy", "classnet/", "dynamic_chain"];
    let missing: Vec<&str> = names.iter().copied().filter(|n| !rows.iter().any(|r| r.name.starts_with(n))).collect();
    if !missing.is_empty() {
        return Err(format!("checks missing: {missing:?}"));
    }
    let kinks: usize = rows.iter().map(|r| r.kinks).sum();
    check(
        worst.max_rel_error < 1e-4,
        format!("{} checks, worst {} at {:.2e}, {short} with < 100 coords, {kinks} kinked draws replaced", rows.len(), worst.name, worst.max_rel_error),
    )
        .and_then(|d| within(start.elapsed(), 60, d))
}

fn textured(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Plane {
    let noise = Plane::from_fn(h, w, |_, _| rng.gen_range(0.0..1.0));
    let smooth = gaussian_blur(&noise, 1.5);
    Plane::from_fn(h, w, |i, j| {
        let edge = if j > w / 2 { 0.35 } else { 0.0 };
        (0.2 + edge + 0.6 * smooth.get(i, j) + 0.05 * noise.get(i, j)).clamp(0.0, 1.0)
    })
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y = textured(&mut rng, 32, 32);
    let p = EnhanceParams::default();
    let u = wls_smooth(&y, p.wls_lambda, p.wls_alpha, p.wls_eps).map_err(|e| e.to_string())?;
    let a = oracles::dense_wls_matrix(&y, p.wls_lambda, p.wls_alpha, p.wls_eps);
    let residual = oracles::residual_inf(&a, u.data(), y.data());

    let mut guided_err: f64 = 0.0;
    for (radius, eps) in [(1, 1e-3), (2, 1e-2), (3, 1e-4)] {
        let (y, g) = (textured(&mut rng, 16, 16), textured(&mut rng, 16, 16));
        for guide in [&y, &g] {
            let fast = guided(&y, guide, radius, eps).map_err(|e| e.to_string())?;
            guided_err = guided_err.max(fast.max_abs_diff(&oracles::naive_guided(&y, guide, radius, eps)).map_err(|e| e.to_string())?);
        }
    }

    let mut box_err: f64 = 0.0;
    for _ in 0..120 {
        let (h, w) = (rng.gen_range(1..24), rng.gen_range(1..24));
        let radius = rng.gen_range(0..6);
        let p = Plane::from_fn(h, w, |_, _| rng.gen_range(-1.0..1.0));
        box_err = box_err.max(box_filter(&p, radius).max_abs_diff(&oracles::naive_box(&p, radius)).map_err(|e| e.to_string())?);
    }
    check(
        residual < 1e-6 && guided_err < 1e-8 && box_err < 1e-10,
        format!("wls residual {residual:.2e}, guided {guided_err:.2e}, box {box_err:.2e} over 120 cases"),
    )
    .and_then(|d| within(start.elapsed(), 60, d))
}

fn criterion_3() -> Outcome {
    let methods = EnhanceMethod::ALL;
    let c = small_corpus(&methods);
    let (class, enhance) = desk_nets(c.classes);
    let mut cfg = full_view_config(Approach::A1, &methods[..1]);
    cfg.class_sgd.learning_rate = 0.0;
    cfg.enhance_sgd.learning_rate = 0.0;
    let mut images = 0;
    for k in 0..methods.len() {
        let params = init_enhance_params(&cfg, &enhance, k);
        for ex in c.train.iter().chain(&c.test) {
            let y = luminance(&ex.image);
            let (filter, _) = enhance.generate_filter(&params, &y).map_err(|e| e.to_string())?;
            if apply_filter(&y, &filter).map_err(|e| e.to_string())? != y {
                return Err(format!("filter {k} changes {}", ex.path.display()));
            }
            images += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for (k, &method) in methods.iter().enumerate() {
        let expected = c.train.iter().map(|ex| mse(&luminance(&ex.image), &ex.targets[k]).unwrap()).sum::<f64>() / c.train.len() as f64;
        let single: Vec<Example> = c.train.iter().map(|e| Example { targets: vec![e.targets[k].clone()], ..e.clone() }).collect();
        let a1 = RunConfig { methods: vec![method], ..cfg.clone() };
        let init = init_class_params(&a1, &class);
        let log = train_approach1(&a1, &enhance, &class, &single, &init).map_err(|e| e.to_string())?.log;
        worst = worst.max((log.epochs[0].mse - expected).abs() / expected);
    }
    check(worst < 1e-14, format!("{images} image/filter pairs unchanged; worst relative MSE-term error {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig { ratios: SplitRatios { train: 0.6, val: 0.0, test: 0.4 }, ..Default::default() };
    let c = corpus(&cfg, &[EnhanceMethod::Imsharp]);
    let (class, enhance) = desk_nets(c.classes);
    let run = RunConfig {
        approach: Approach::A1,
        methods: vec![EnhanceMethod::Imsharp],
        pretrain_epochs: 5,
        epochs: 30,
        seed: 7,
        ..Default::default()
    };
    let (init, _) = pretrain_classnet(&run, &class, &c.train).map_err(|e| e.to_string())?;
    let exp = train_model(&run, &class, &enhance, &c.train, &init).map_err(|e| e.to_string())?;
    let rep = evaluate(&exp.model, &class, Some(&enhance), &c.test, run.augment.crop_extent).map_err(|e| e.to_string())?;
    let p = &rep.psnr[0];
    check(
        p.gain() >= 3.0,
        format!("held-out PSNR {:.2} -> {:.2} dB, gain {:+.2} dB on {} images", p.input_psnr, p.output_psnr, p.gain(), c.test.len()),
    )
    .and_then(|d| within(start.elapsed(), 600, d))
}

/// The fixture's weights worked by hand: the range map gives [6,7,4,0,3]/7,
/// every entry drops by 3/14, the zero entry becomes 3/14, and the result
/// [9,11,5,3,3]/14 is normalized.
const FIXTURE_WEIGHTS: [f64; 5] = [9.0 / 31.0, 11.0 / 31.0, 5.0 / 31.0, 3.0 / 31.0, 3.0 / 31.0];

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..1000 {
        let mse: Vec<f64> = (0..5).map(|_| rng.gen_range(1e-4..1.0)).collect();
        let w = compute_weights_from_mse(&mse).map_err(|e| e.to_string())?.w;
        let sum: f64 = w.iter().sum();
        if w.iter().any(|&x| x <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(format!("trial {trial}: {w:?}"));
        }
        for i in 0..5 {
            for j in 0..5 {
                if mse[i] < mse[j] && w[i] < w[j] {
                    return Err(format!("trial {trial}: order broken at {i},{j}"));
                }
            }
        }
    }
    let w = compute_weights_from_mse(&[2.0, 1.0, 4.0, 8.0, 5.0]).map_err(|e| e.to_string())?.w;
    let err = w.iter().zip(FIXTURE_WEIGHTS).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(err < 1e-5, format!("1000 random vectors valid; fixture error {err:.1e}")).and_then(|d| within(start.elapsed(), 10, d))
}

fn criterion_6() -> Outcome {
    let methods = EnhanceMethod::ALL;
    let c = small_corpus(&[]);
    let (class, enhance) = desk_nets(c.classes);
    let mut cfg = full_view_config(Approach::A2, &methods);
    cfg.epochs = 2;
    cfg.augment.enable_flips = true;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params: Vec<_> = methods.iter().map(|_| enhance.network().init_params(&mut rng)).collect();
    let lumas: Vec<_> = c.train.iter().map(|e| luminance(&e.image)).collect();
    let bank = derive_static_filters(&enhance, &methods, &params, &lumas).map_err(|e| e.to_string())?;
    let weights = compute_weights_from_mse(&[0.02, 0.01, 0.04, 0.08, 0.05]).map_err(|e| e.to_string())?;
    let init = init_class_params(&cfg, &class);
    let (mut batches, mut worst) = (0usize, 0.0f64);
    let mut observer = |rec: &BatchRecord<'_>| {
        let mut total = 0.0;
        for s in &rec.samples {
            for (input, w) in s.stream_inputs.iter().zip(weights.with_rgb()) {
                let logits = class.forward(rec.class_params, input).unwrap().0;
                total += w * softmax_cross_entropy(logits.data(), s.label).unwrap().0;
            }
        }
        worst = worst.max((total / rec.samples.len() as f64 - rec.reported_loss).abs());
        batches += 1;
    };
    train_stat(&cfg, &class, &bank, &weights, &c.train, &init, Some(&mut observer)).map_err(|e| e.to_string())?;
    let expected = 2 * c.train.len().div_ceil(cfg.batch_size);
    check(batches == expected && worst < 1e-12, format!("{batches} batches over 2 epochs, worst gap {worst:.1e}"))
}

fn criterion_7() -> Outcome {
    let methods = EnhanceMethod::ALL.to_vec();
    let c = small_corpus(&methods);
    let (class_net, enhance) = desk_nets(c.classes);
    let cfg = full_view_config(Approach::A2, &methods);
    let (class, _) = pretrain_classnet(&cfg, &class_net, &c.train).map_err(|e| e.to_string())?;
    let rgb = evaluate(&TrainedModel::Baseline { class: class.clone() }, &class_net, None, &c.test, 64).map_err(|e| e.to_string())?;
    let a2 = TrainedModel::A2 {
        bank: StaticFilterBank::identity(methods.clone(), 6).map_err(|e| e.to_string())?,
        weights: StreamWeights::equal(methods.len()),
        class: class.clone(),
    };
    let enh = (0..methods.len()).map(|k| init_enhance_params(&cfg, &enhance, k)).collect();
    let a3 = TrainedModel::A3 { methods: methods.clone(), enhance: enh, weights: StreamWeights::equal(methods.len()), class };
    let mut detail = format!("rgb {:.4}", rgb.fused.accuracy);
    for (name, model) in [("static", a2), ("dynamic", a3)] {
        let rep = evaluate(&model, &class_net, Some(&enhance), &c.test, 64).map_err(|e| e.to_string())?;
        let rgb_stream = rep.streams.last().unwrap().accuracy;
        if rep.fused.accuracy != rgb_stream || rep.fused.accuracy != rgb.fused.accuracy {
            return Err(format!("{name}: fused {} vs rgb stream {rgb_stream}", rep.fused.accuracy));
        }
        let _ = write!(detail, ", {name} fused {:.4}", rep.fused.accuracy);
    }
    Ok(detail)
}

/// Settings for the classification comparison.
fn comparison_config(seed: u64) -> RunConfig {
    RunConfig { pretrain_epochs: 5, epochs: 15, body_lr_mult: 1.0, seed, ..Default::default() }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let methods = EnhanceMethod::ALL;
    let cfg = SynthConfig { ratios: SplitRatios { train: 0.6, val: 0.0, test: 0.4 }, ..Default::default() };
    let c = corpus(&cfg, &methods);
    let (class, enhance) = desk_nets(c.classes);
    let (mut fc, mut stat, mut dynamic) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 1..=5 {
        let base = comparison_config(seed);
        let (init, _) = pretrain_classnet(&base, &class, &c.train).map_err(|e| e.to_string())?;
        let accuracy = |approach: Approach| -> Result<f64, String> {
            let run = RunConfig { approach, ..base.clone() };
            let exp = train_model(&run, &class, &enhance, &c.train, &init).map_err(|e| e.to_string())?;
            let rep = evaluate(&exp.model, &class, Some(&enhance), &c.test, run.augment.crop_extent).map_err(|e| e.to_string())?;
            Ok(rep.fused.accuracy)
        };
        fc.push(accuracy(Approach::Baseline)?);
        stat.push(accuracy(Approach::A2)?);
        dynamic.push(accuracy(Approach::A3)?);
        report(&format!("    seed {seed}: fc {:.4} stat {:.4} dyn {:.4}", fc.last().unwrap(), stat.last().unwrap(), dynamic.last().unwrap()));
    }
    let (f, s, d) = (median(fc), median(stat), median(dynamic));
    check(
        d - f >= 0.02 && s >= f.min(d),
        format!("median fused accuracy fc {f:.4}, stat {s:.4}, dyn {d:.4} (dyn - fc = {:+.2} points)", 100.0 * (d - f)),
    )
    .and_then(|d| within(start.elapsed(), 45 * 60, d))
}

fn criterion_9() -> Outcome {
    let c = small_corpus(&[]);
    let (_, enhance) = desk_nets(c.classes);
    let lumas: Vec<_> = c.train.iter().chain(&c.test).take(10).map(|e| luminance(&e.image)).collect();
    if lumas.len() != 10 {
        return Err(format!("fixture has {} images", lumas.len()));
    }
    let methods = EnhanceMethod::ALL;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params: Vec<_> = methods.iter().map(|_| enhance.network().init_params(&mut rng)).collect();
    let bank = derive_static_filters(&enhance, &methods, &params, &lumas).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (k, p) in params.iter().enumerate() {
        let exported = per_image_filters(&enhance, p, &lumas).map_err(|e| e.to_string())?;
        for (i, &tap) in bank.filters[k].taps().data().iter().enumerate() {
            let brute = exported.iter().map(|f| f.taps().data()[i]).sum::<f64>() / exported.len() as f64;
            worst = worst.max((tap - brute).abs());
        }
    }
    check(worst < 1e-12, format!("{} filters over 10 images, worst tap error {worst:.1e}", methods.len()))
}

fn dynenh(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dynenh"))
        .args(args)
        .env_remove("DYNENH_CACHE_DIR")
        .env_remove("DYNENH_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("dynenh {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (data, cache) = (root.join("data"), root.join("cache"));
    dynenh(&["synth-data", "--out", &s(&data), "--per-class", "3", "--extent", "64", "--train-ratio", "0.67", "--val-ratio", "0", "--test-ratio", "0.33"])?;
    dynenh(&["gen-targets", "--data", &s(&data), "--cache", &s(&cache)])?;
    let sets = ["train_ratio=0.67", "val_ratio=0", "test_ratio=0.33", "pretrain_epochs=1", "epochs=2", "batch_size=4"];
    let mut compared = 0;
    for approach in ["baseline", "a2", "a3"] {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let run = root.join(format!("{approach}-{rep}"));
            let mut args = vec!["train".to_string(), "--data".into(), s(&data), "--cache".into(), s(&cache), "--approach".into(), approach.into(), "--out".into(), s(&run)];
            for kv in sets {
                args.extend(["--set".to_string(), kv.to_string()]);
            }
            dynenh(&args.iter().map(String::as_str).collect::<Vec<_>>())?;
            dynenh(&["eval", &s(&run), "--split", "test", "--out", &s(&run.join("eval"))])?;
            runs.push(run);
        }
        for file in ["log.csv", "summary.csv", "eval/summary.csv"] {
            let read = |r: &Path| std::fs::read(r.join(file)).map_err(|e| format!("{}: {e}", r.join(file).display()));
            if read(&runs[0])? != read(&runs[1])? {
                return Err(format!("{approach}: {file} differs between runs"));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} file pairs byte-identical across baseline, a2 and a3 train/eval runs"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient suite", criterion_1),
        ("filter oracles", criterion_2),
        ("identity initialization", criterion_3),
        ("filter learning", criterion_4),
        ("stream weighting", criterion_5),
        ("static loss decomposition", criterion_6),
        ("degenerate pipeline", criterion_7),
        ("classification gain", criterion_8),
        ("static filter distillation", criterion_9),
        ("determinism", criterion_10),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("DYNENH_ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => report(&format!("criterion {n:>2} {name}: PASS ({d}) [{secs:.1}s]")),
            Err(d) => {
                report(&format!("criterion {n:>2} {name}: FAIL ({d}) [{secs:.1}s]"));
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
