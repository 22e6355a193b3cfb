use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::DatasetManifest;
use crate::enhance::{make_target, EnhanceMethod, EnhanceParams};
use crate::error::{Error, Result};
use crate::imgcore::io::{read_image, read_plane, write_plane};
use crate::imgcore::{luminance, Plane};

/// One in twenty fresh entries is recomputed per run.
const SPOT_CHECK_EVERY: usize = 20;

/// Target files live at `<dir>/<relative parent>/<stem>.<method>.plane`; a
/// `<method>.params` file records the parameters they were computed with.
#[derive(Debug, Clone)]
pub struct TargetCache {
    dir: PathBuf,
}

impl TargetCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, rel: &Path, method: EnhanceMethod) -> PathBuf {
        let stem = rel.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let parent = rel.parent().unwrap_or(Path::new(""));
        self.dir.join(parent).join(format!("{stem}.{}.plane", method.name()))
    }

    fn params_path(&self, method: EnhanceMethod) -> PathBuf {
        self.dir.join(format!("{}.params", method.name()))
    }

    pub fn is_method_fresh(&self, method: EnhanceMethod, params: &EnhanceParams) -> bool {
        fs::read_to_string(self.params_path(method)).map(|s| s == params.fingerprint()).unwrap_or(false)
    }

    /// Reads one target; absent or stale entries yield [`Error::MissingTarget`].
    pub fn load(&self, rel: &Path, method: EnhanceMethod, params: &EnhanceParams, dims: (usize, usize)) -> Result<Plane> {
        let missing = || Error::MissingTarget { path: rel.to_path_buf(), method: method.name().to_string() };
        if !self.is_method_fresh(method, params) {
            return Err(missing());
        }
        let path = self.entry_path(rel, method);
        if !path.is_file() {
            return Err(missing());
        }
        let plane = read_plane(&path)?;
        if plane.dims() != dims {
            return Err(missing());
        }
        Ok(plane)
    }

    fn store(&self, rel: &Path, method: EnhanceMethod, plane: &Plane) -> Result<()> {
        let path = self.entry_path(rel, method);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("plane.tmp");
        write_plane(&tmp, plane)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetFailure {
    pub path: PathBuf,
    pub method: EnhanceMethod,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetReport {
    pub computed: usize,
    pub skipped: usize,
    pub spot_checked: usize,
    /// Spot-checked entries that differed from recomputation and were rewritten.
    pub repaired: usize,
    pub failures: Vec<TargetFailure>,
}

enum Outcome {
    Computed,
    Skipped,
    Checked { repaired: bool },
    Failed(String),
}

/// Computes every missing or stale `(image, method)` target of the corpus.
pub fn generate_targets(
    manifest: &DatasetManifest,
    methods: &[EnhanceMethod],
    params: &EnhanceParams,
    cache: &TargetCache,
) -> Result<TargetReport> {
    params.validate()?;
    fs::create_dir_all(cache.dir())?;
    let samples: Vec<_> = manifest.all_samples().collect();
    let mut report = TargetReport::default();
    for &method in methods {
        let fresh_method = cache.is_method_fresh(method, params);
        let outcomes: Vec<Outcome> = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let run = || -> Result<Outcome> {
                    let y = luminance(&read_image(&manifest.absolute(s))?);
                    let cached = if fresh_method { cache.load(&s.path, method, params, y.dims()).ok() } else { None };
                    match cached {
                        Some(plane) if i % SPOT_CHECK_EVERY == 0 => {
                            let again = make_target(method, &y, params)?;
                            let repaired = again != plane;
                            if repaired {
                                log::warn!("cached {method} target for {} was stale; rewritten", s.path.display());
                                cache.store(&s.path, method, &again)?;
                            }
                            Ok(Outcome::Checked { repaired })
                        }
                        Some(_) => Ok(Outcome::Skipped),
                        None => {
                            cache.store(&s.path, method, &make_target(method, &y, params)?)?;
                            Ok(Outcome::Computed)
                        }
                    }
                };
                run().unwrap_or_else(|e| Outcome::Failed(e.to_string()))
            })
            .collect();
        for (s, o) in samples.iter().zip(outcomes) {
            match o {
                Outcome::Computed => report.computed += 1,
                Outcome::Skipped => report.skipped += 1,
                Outcome::Checked { repaired } => {
                    report.skipped += 1;
                    report.spot_checked += 1;
                    report.repaired += repaired as usize;
                }
                Outcome::Failed(message) => {
                    log::warn!("{method} target for {} failed: {message}", s.path.display());
                    report.failures.push(TargetFailure { path: s.path.clone(), method, message });
                }
            }
        }
        fs::write(cache.params_path(method), params.fingerprint())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{load_dataset, SplitRatios};
    use crate::imgcore::{io::write_image, ImageRgb};

    fn corpus(n: usize) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (ci, name) in ["a", "b"].iter().enumerate() {
            fs::create_dir_all(dir.path().join(name)).unwrap();
            for i in 0..n {
                let img = ImageRgb::new(
                    Plane::from_fn(12, 12, |r, c| ((r * 7 + c * 3 + i + ci) % 11) as f64 / 10.0),
                    Plane::from_fn(12, 12, |r, _| r as f64 / 12.0),
                    Plane::from_fn(12, 12, |_, c| c as f64 / 12.0),
                )
                .unwrap();
                write_image(&dir.path().join(name).join(format!("{i}.png")), &img).unwrap();
            }
        }
        dir
    }

    #[test]
    fn generation_is_idempotent_and_exact() {
        let data = corpus(5);
        let cache_dir = tempfile::tempdir().unwrap();
        let m = load_dataset(data.path(), SplitRatios::default(), 0).unwrap();
        let cache = TargetCache::new(cache_dir.path());
        let params = EnhanceParams::default();
        let first = generate_targets(&m, &EnhanceMethod::ALL, &params, &cache).unwrap();
        assert_eq!(first.computed, 50);
        assert!(first.failures.is_empty());
        let second = generate_targets(&m, &EnhanceMethod::ALL, &params, &cache).unwrap();
        assert_eq!((second.computed, second.skipped), (0, 50));
        assert!(second.spot_checked >= 5);
        assert_eq!(second.repaired, 0);

        let s = &m.train[0];
        let y = luminance(&read_image(&m.absolute(s)).unwrap());
        for method in EnhanceMethod::ALL {
            let cached = cache.load(&s.path, method, &params, y.dims()).unwrap();
            assert_eq!(cached, make_target(method, &y, &params).unwrap());
        }
        assert!(cache.entry_path(Path::new("a/0.png"), EnhanceMethod::Wls).ends_with("a/0.wls.plane"));
    }

    #[test]
    fn changed_params_invalidate_entries() {
        let data = corpus(2);
        let cache_dir = tempfile::tempdir().unwrap();
        let m = load_dataset(data.path(), SplitRatios::default(), 0).unwrap();
        let cache = TargetCache::new(cache_dir.path());
        let params = EnhanceParams::default();
        generate_targets(&m, &[EnhanceMethod::Imsharp], &params, &cache).unwrap();
        let changed = EnhanceParams { sharp_amount: 1.0, ..params.clone() };
        let s = &m.train[0];
        assert!(matches!(cache.load(&s.path, EnhanceMethod::Imsharp, &changed, (12, 12)), Err(Error::MissingTarget { .. })));
        let r = generate_targets(&m, &[EnhanceMethod::Imsharp], &changed, &cache).unwrap();
        assert_eq!(r.computed, 4);
    }

    #[test]
    fn corrupted_entry_is_repaired_by_spot_check() {
        let data = corpus(2);
        let cache_dir = tempfile::tempdir().unwrap();
        let m = load_dataset(data.path(), SplitRatios::default(), 0).unwrap();
        let cache = TargetCache::new(cache_dir.path());
        let params = EnhanceParams::default();
        generate_targets(&m, &[EnhanceMethod::HistEq], &params, &cache).unwrap();
        let first = m.all_samples().next().unwrap();
        write_plane(&cache.entry_path(&first.path, EnhanceMethod::HistEq), &Plane::zeros(12, 12)).unwrap();
        let r = generate_targets(&m, &[EnhanceMethod::HistEq], &params, &cache).unwrap();
        assert_eq!(r.repaired, 1);
    }

    #[test]
    fn missing_entry_reports_path() {
        let cache = TargetCache::new("/nonexistent-cache");
        let err = cache.load(Path::new("a/x.png"), EnhanceMethod::Gf, &EnhanceParams::default(), (4, 4)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a/x.png") && msg.contains("gen-targets"), "{msg}");
    }
}
