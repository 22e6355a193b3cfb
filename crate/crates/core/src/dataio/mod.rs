//! Dataset ingestion, seeded splits, target caching, augmentation and the
//! synthetic texture corpus.
//!
//! A corpus root holds either one subdirectory of PNG/PPM files per class or
//! a `manifest.csv` with a header row and `path,label[,label2...]` rows,
//! where paths are relative to the root and labels are class names.

mod augment;
mod cache;
mod synth;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use augment::{augment, AugmentConfig, AugmentDraw, CropPosition};
pub use cache::{generate_targets, TargetCache, TargetFailure, TargetReport};
pub use synth::{oriented_energy_accuracy, synth_texture_dataset, SynthConfig, SynthReport};

use crate::enhance::EnhanceMethod;
use crate::error::{Error, Result};
use crate::imgcore::{io::read_image, ImageRgb, Plane};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    /// Relative to the corpus root.
    pub path: PathBuf,
    pub label: usize,
    /// All labels of the sample when it has more than one.
    pub label_set: Option<Vec<usize>>,
}

impl Sample {
    pub fn labels(&self) -> Vec<usize> {
        self.label_set.clone().unwrap_or_else(|| vec![self.label])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::param(format!("unknown split {s:?} (expected train, val or test)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.6, val: 0.2, test: 0.2 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|v| !(*v >= 0.0)) || self.train <= 0.0 || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!(
                "split ratios must be non-negative, train > 0, and sum to 1 (got {}/{}/{})",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub class_names: Vec<String>,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    pub seed: u64,
}

impl DatasetManifest {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Every sample, train then val then test.
    pub fn all_samples(&self) -> impl Iterator<Item = &Sample> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    pub fn absolute(&self, sample: &Sample) -> PathBuf {
        self.root.join(&sample.path)
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm"))
        .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        out.push(entry?.path());
    }
    out.sort();
    Ok(out)
}

fn scan_directories(root: &Path) -> Result<(Vec<String>, Vec<Sample>)> {
    let mut classes = Vec::new();
    let mut samples = Vec::new();
    let mut problems = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let files: Vec<PathBuf> = sorted_entries(&dir)?.into_iter().filter(|p| p.is_file() && is_image(p)).collect();
        if files.is_empty() {
            problems.push(format!("{}: empty class directory", dir.display()));
            continue;
        }
        let label = classes.len();
        classes.push(name.clone());
        for f in files {
            let rel = f.strip_prefix(root).expect("listed under root").to_path_buf();
            samples.push(Sample { path: rel, label, label_set: None });
        }
    }
    if !problems.is_empty() {
        return Err(Error::data(root, problems.join("; ")));
    }
    Ok((classes, samples))
}

fn read_manifest(root: &Path) -> Result<(Vec<String>, Vec<Sample>)> {
    let path = root.join(MANIFEST_FILE);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(&path)
        .map_err(|e| Error::data(&path, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(&path, e.to_string()))?;
        let fields: Vec<String> = rec.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        if fields.len() < 2 {
            return Err(Error::data(&path, format!("row {} needs a path and at least one label", i + 2)));
        }
        rows.push(fields);
    }
    let mut classes: Vec<String> = rows.iter().flat_map(|r| r[1..].iter().cloned()).collect();
    classes.sort();
    classes.dedup();
    let index = |name: &String| classes.binary_search(name).expect("collected above");
    let mut samples = Vec::with_capacity(rows.len());
    for r in &rows {
        let labels: Vec<usize> = r[1..].iter().map(index).collect();
        let label_set = (labels.len() > 1).then(|| labels.clone());
        samples.push(Sample { path: PathBuf::from(&r[0]), label: labels[0], label_set });
    }
    Ok((classes, samples))
}

/// Reads the corpus at `root` and assigns seeded, per-class stratified splits.
pub fn load_dataset(root: &Path, ratios: SplitRatios, seed: u64) -> Result<DatasetManifest> {
    ratios.validate()?;
    if !root.is_dir() {
        return Err(Error::data(root, "corpus root is not a directory"));
    }
    let (class_names, samples) =
        if root.join(MANIFEST_FILE).is_file() { read_manifest(root)? } else { scan_directories(root)? };
    if class_names.len() < 2 {
        return Err(Error::data(root, format!("need at least 2 classes, found {}", class_names.len())));
    }

    let problems: Vec<String> = samples
        .par_iter()
        .filter_map(|s| {
            let p = root.join(&s.path);
            if !p.is_file() {
                Some(format!("{}: missing file", p.display()))
            } else {
                image::image_dimensions(&p).err().map(|e| format!("{}: {e}", p.display()))
            }
        })
        .collect();
    if !problems.is_empty() {
        return Err(Error::data(root, problems.join("; ")));
    }

    let mut manifest = DatasetManifest {
        root: root.to_path_buf(),
        class_names,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in 0..manifest.class_count() {
        let mut members: Vec<&Sample> = samples.iter().filter(|s| s.label == c).collect();
        if members.is_empty() {
            return Err(Error::data(root, format!("class {:?} has no primary samples", manifest.class_names[c])));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = ((n as f64 * ratios.train).round() as usize).clamp(1, n);
        let n_val = ((n as f64 * ratios.val).round() as usize).min(n - n_train);
        for (i, s) in members.into_iter().enumerate() {
            let dest = if i < n_train {
                &mut manifest.train
            } else if i < n_train + n_val {
                &mut manifest.val
            } else {
                &mut manifest.test
            };
            dest.push(s.clone());
        }
    }
    for list in [&mut manifest.train, &mut manifest.val, &mut manifest.test] {
        list.sort_by(|a, b| a.path.cmp(&b.path));
    }
    Ok(manifest)
}

/// Writes `manifest.csv` for the given samples (paths relative to `root`).
pub fn write_manifest(root: &Path, class_names: &[String], samples: &[Sample]) -> Result<()> {
    let path = root.join(MANIFEST_FILE);
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(&path).map_err(|e| Error::data(&path, e.to_string()))?;
    let io = |e: csv::Error| Error::data(&path, e.to_string());
    w.write_record(["path", "label"]).map_err(io)?;
    for s in samples {
        let mut rec = vec![s.path.to_string_lossy().replace('\\', "/")];
        rec.extend(s.labels().iter().map(|&l| class_names[l].clone()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// A decoded sample with its cached targets (one per requested method).
#[derive(Debug, Clone)]
pub struct Example {
    pub path: PathBuf,
    pub image: ImageRgb,
    pub label: usize,
    pub labels: Vec<usize>,
    pub targets: Vec<Plane>,
}

/// Decodes a split and attaches the cached targets of `methods`.
pub fn load_examples(
    manifest: &DatasetManifest,
    split: Split,
    methods: &[EnhanceMethod],
    cache: Option<&TargetCache>,
    params: &crate::enhance::EnhanceParams,
) -> Result<Vec<Example>> {
    if !methods.is_empty() && cache.is_none() {
        return Err(Error::param("targets requested without a cache directory"));
    }
    manifest
        .split(split)
        .par_iter()
        .map(|s| {
            let abs = manifest.absolute(s);
            let image = read_image(&abs)?;
            let targets = match cache {
                Some(c) => methods.iter().map(|&m| c.load(&s.path, m, params, image.dims())).collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            Ok(Example { path: abs, image, label: s.label, labels: s.labels(), targets })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::io::write_image;

    fn corpus(classes: &[(&str, usize)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, n) in classes {
            fs::create_dir_all(dir.path().join(name)).unwrap();
            for i in 0..*n {
                let img = ImageRgb::filled(4, 4, [i as f64 / 10.0, 0.5, 0.2]);
                write_image(&dir.path().join(name).join(format!("img{i}.png")), &img).unwrap();
            }
        }
        dir
    }

    #[test]
    fn directory_split_is_stratified_and_reproducible() {
        let dir = corpus(&[("b", 4), ("a", 4)]);
        let ratios = SplitRatios { train: 0.5, val: 0.25, test: 0.25 };
        let m = load_dataset(dir.path(), ratios, 1).unwrap();
        assert_eq!(m.class_names, vec!["a", "b"]);
        assert_eq!((m.train.len(), m.val.len(), m.test.len()), (4, 2, 2));
        for c in 0..2 {
            assert_eq!(m.train.iter().filter(|s| s.label == c).count(), 2);
        }
        assert_eq!(m, load_dataset(dir.path(), ratios, 1).unwrap());
        let all: Vec<_> = m.all_samples().map(|s| s.path.clone()).collect();
        let mut dedup = all.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), all.len());
    }

    #[test]
    fn every_class_gets_a_train_sample() {
        let dir = corpus(&[("a", 1), ("b", 3)]);
        let m = load_dataset(dir.path(), SplitRatios { train: 0.1, val: 0.45, test: 0.45 }, 3).unwrap();
        assert!(m.train.iter().any(|s| s.label == 0));
        assert!(m.train.iter().any(|s| s.label == 1));
    }

    #[test]
    fn empty_class_directory_rejected() {
        let dir = corpus(&[("a", 2), ("b", 2)]);
        fs::create_dir(dir.path().join("c")).unwrap();
        let err = load_dataset(dir.path(), SplitRatios::default(), 0).unwrap_err().to_string();
        assert!(err.contains("empty class directory"), "{err}");
    }

    #[test]
    fn manifest_with_label_sets() {
        let dir = corpus(&[("x", 2), ("y", 2)]);
        fs::write(
            dir.path().join(MANIFEST_FILE),
            "path,label\nx/img0.png,cat\nx/img1.png,dog,cat\ny/img0.png,dog\ny/img1.png,cat\n",
        )
        .unwrap();
        let m = load_dataset(dir.path(), SplitRatios { train: 1.0, val: 0.0, test: 0.0 }, 0).unwrap();
        assert_eq!(m.class_names, vec!["cat", "dog"]);
        let multi = m.train.iter().find(|s| s.path == Path::new("x/img1.png")).unwrap();
        assert_eq!(multi.label, 1);
        assert_eq!(multi.label_set, Some(vec![1, 0]));
    }

    #[test]
    fn manifest_missing_file_named() {
        let dir = corpus(&[("x", 1), ("y", 1)]);
        fs::write(dir.path().join(MANIFEST_FILE), "path,label\nx/img0.png,a\nx/nope.png,b\n").unwrap();
        let err = load_dataset(dir.path(), SplitRatios::default(), 0).unwrap_err().to_string();
        assert!(err.contains("nope.png"), "{err}");
    }

    #[test]
    fn manifest_round_trip() {
        let dir = corpus(&[("a", 2), ("b", 2)]);
        let m = load_dataset(dir.path(), SplitRatios { train: 1.0, val: 0.0, test: 0.0 }, 0).unwrap();
        write_manifest(dir.path(), &m.class_names, &m.train).unwrap();
        let again = load_dataset(dir.path(), SplitRatios { train: 1.0, val: 0.0, test: 0.0 }, 0).unwrap();
        assert_eq!(again.train, m.train);
    }
}
