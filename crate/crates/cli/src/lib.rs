//! The `dynenh` command line: target generation, synthetic data, training,
//! evaluation, filter export, gradient checks and reports.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dynenh::dataio::{Split, SplitRatios, SynthConfig};

pub mod commands;
pub mod plot;
pub mod records;
pub mod rundir;
pub mod settings;

use settings::{Settings, KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

fn config_help() -> String {
    let mut s = String::from(
        "Config keys (key=value; a config file overrides the defaults, DYNENH_CACHE_DIR and \
         DYNENH_THREADS override the file, flags override everything):\n",
    );
    for (k, d, help) in KEYS {
        s.push_str(&format!("  {k:<17} {help} [default: {}]\n", if d.is_empty() { "none" } else { d }));
    }
    s
}

#[derive(Parser, Debug)]
#[command(name = "dynenh", version, about = "Dynamic enhancement filters for image classification")]
#[command(after_long_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Config file with key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Dataset root.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute and cache the enhancement targets of a dataset.
    GenTargets {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated methods, or `all`.
        #[arg(long, alias = "method")]
        methods: Option<String>,
    },
    /// Write the synthetic oriented-texture corpus.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long, default_value_t = 60)]
        per_class: usize,
        #[arg(long, default_value_t = 96)]
        extent: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.6)]
        train_ratio: f64,
        #[arg(long, default_value_t = 0.2)]
        val_ratio: f64,
        #[arg(long, default_value_t = 0.2)]
        test_ratio: f64,
    },
    /// Train a model and evaluate it on the test split.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// baseline, a1, a2 or a3.
        #[arg(long)]
        approach: Option<String>,
        /// Comma-separated methods, or `all`.
        #[arg(long, alias = "method")]
        methods: Option<String>,
        #[arg(long)]
        weighting: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        pretrain_epochs: Option<usize>,
        /// Run directory (default: a timestamped directory under --runs-root).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        runs_root: PathBuf,
    },
    /// Evaluate a trained run on one split.
    Eval {
        /// Run directory written by `train`.
        run: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Output directory (default: <run>/eval-<split>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write target, enhanced and difference images into this directory.
        #[arg(long)]
        dump_enhanced: Option<PathBuf>,
        /// Number of images to dump.
        #[arg(long, default_value_t = 1)]
        dump_limit: usize,
    },
    /// Write the filters of a trained run as CSV (per image, or the static bank).
    ExportFilters {
        run: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every layer, the loss and the filter chain.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        coords: usize,
        #[arg(long, default_value_t = 6)]
        filter_size: usize,
    },
    /// Collect run summaries (and optionally an SVG loss plot).
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: bool,
        #[arg(long, default_value = "runs")]
        runs_root: PathBuf,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn runtime<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn resolve(cfg: &ConfigArgs, extra: &[(&str, Option<String>)]) -> anyhow::Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &cfg.config {
        s.apply_file(path)?;
    }
    if let Ok(dir) = std::env::var("DYNENH_CACHE_DIR") {
        s.set("cache", dir)?;
    }
    if let Ok(t) = std::env::var("DYNENH_THREADS") {
        s.set("threads", t)?;
    }
    for kv in &cfg.sets {
        let (k, v) = settings::parse_pair(kv)?;
        s.set(&k, v)?;
    }
    let paths = [("data", &cfg.data), ("cache", &cfg.cache)];
    for (k, v) in paths {
        if let Some(p) = v {
            s.set(k, p.to_string_lossy())?;
        }
    }
    if let Some(seed) = cfg.seed {
        s.set("seed", seed.to_string())?;
    }
    if let Some(t) = cfg.threads {
        s.set("threads", t.to_string())?;
    }
    for (k, v) in extra {
        if let Some(v) = v {
            s.set(k, v.clone())?;
        }
    }
    s.run_config()?;
    s.enhance_params()?;
    let threads = s.threads()?;
    // the global pool serves data loading and target generation
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(s)
}

fn parse_split(s: &str) -> anyhow::Result<Split> {
    s.parse::<Split>().map_err(|e| anyhow::anyhow!("{e}"))
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::GenTargets { cfg, methods } => {
            let s = usage(resolve(&cfg, &[("methods", methods)]))?;
            runtime(commands::gen_targets(&s))
        }
        Command::SynthData { out, classes, per_class, extent, seed, train_ratio, val_ratio, test_ratio } => {
            let ratios = SplitRatios { train: train_ratio, val: val_ratio, test: test_ratio };
            usage(ratios.validate().map_err(anyhow::Error::from))?;
            let cfg = SynthConfig { class_count: classes, per_class, extent, seed, ratios, ..SynthConfig::default() };
            runtime(commands::synth_data(&cfg, &out))
        }
        Command::Train { cfg, approach, methods, weighting, epochs, pretrain_epochs, out, runs_root } => {
            let extra = [
                ("approach", approach),
                ("methods", methods),
                ("weighting", weighting),
                ("epochs", epochs.map(|e| e.to_string())),
                ("pretrain_epochs", pretrain_epochs.map(|e| e.to_string())),
            ];
            let s = usage(resolve(&cfg, &extra))?;
            runtime(commands::train(&s, out, &runs_root).map(|_| ()))
        }
        Command::Eval { run, split, out, dump_enhanced, dump_limit } => {
            let split = usage(parse_split(&split))?;
            let dump = dump_enhanced.map(|dir| commands::DumpRequest { dir, limit: dump_limit });
            runtime(commands::eval(&run, split, out, dump).map(|_| ()))
        }
        Command::ExportFilters { run, split, out } => {
            let split = usage(parse_split(&split))?;
            runtime(commands::export_filters(&run, split, &out))
        }
        Command::Gradcheck { seed, coords, filter_size } => runtime(commands::gradcheck(seed, coords, filter_size)),
        Command::Report { runs, out, plot, runs_root } => runtime(commands::report(&runs, out, plot, &runs_root).map(|_| ())),
    }
}

/// Runs one command line (including the program name) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}
