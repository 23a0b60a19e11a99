//! Hallucination detection in embedding space.
//!
//! Embeddings are normalized, reduced by PCA and z-scored; each class gets a
//! Gaussian mixture density, and a held-out calibration split sets a
//! per-class log-density cutoff at a low percentile. A sample inside at least
//! one class region is inside the union region; anything else is flagged.

pub mod embedding;
pub mod gmm;
pub mod preprocess;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use embedding::{EmbeddingMatrix, Manifest};
pub use gmm::{fit_gmm, ClassDensityModel, CovarianceType, FitTrace, GmmConfig};
pub use preprocess::{Components, PreprocessPipeline};

use crate::error::{HalluError, Result};
use crate::report::{read_json, schema_v1, write_json};
use crate::rng;
use crate::stats::percentile_lower;

/// Stratified per-class split into `(train, calibration)`.
pub fn split(matrix: &EmbeddingMatrix, train_fraction: f64, seed: u64) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(HalluError::input(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut train = Vec::new();
    let mut calib = Vec::new();
    for c in 0..matrix.classes.len() {
        let mut idx: Vec<usize> = (0..matrix.len()).filter(|&i| matrix.labels[i] == c).collect();
        if idx.len() < 2 {
            return Err(HalluError::input(format!(
                "class {:?} has {} samples; need at least 2 to split",
                matrix.classes[c],
                idx.len()
            )));
        }
        idx.shuffle(&mut rng::stream(seed, &format!("detector/split/{c}")));
        let n_train = ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        calib.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    calib.sort_unstable();
    Ok((matrix.subset(&train), matrix.subset(&calib)))
}

/// Log-density cutoff of one class. `-∞` (stored as `null`) admits everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThreshold {
    pub class: String,
    #[serde(with = "neg_inf_as_null")]
    pub cutoff: f64,
    pub percentile: f64,
    pub count: usize,
}

mod neg_inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *x == f64::NEG_INFINITY {
            s.serialize_none()
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedThresholds {
    #[serde(default = "schema_v1")]
    pub schema: String,
    pub thresholds: Vec<ClassThreshold>,
}

impl CalibratedThresholds {
    /// Cutoffs of `-∞` for every class: nothing is flagged.
    pub fn admit_all(classes: &[String]) -> Self {
        Self {
            schema: schema_v1(),
            thresholds: classes
                .iter()
                .map(|c| ClassThreshold { class: c.clone(), cutoff: f64::NEG_INFINITY, percentile: 0.0, count: 0 })
                .collect(),
        }
    }
}

/// Lower-interpolation percentile of the calibration log-densities.
/// Returns `(cutoff, count)`.
pub fn calibrate(model: &ClassDensityModel, points: &[Vec<f64>], percentile: f64) -> Result<(f64, usize)> {
    if points.is_empty() {
        return Err(HalluError::input("calibration set is empty"));
    }
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(HalluError::input(format!("percentile {percentile} outside (0, 100)")));
    }
    let mut ll = points.iter().map(|p| model.log_density(p)).collect::<Result<Vec<_>>>()?;
    ll.sort_by(f64::total_cmp);
    Ok((percentile_lower(&ll, percentile), ll.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDetection {
    pub log_densities: Vec<f64>,
    pub in_hdr: Vec<bool>,
    pub in_hcdr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    #[serde(default = "schema_v1")]
    pub schema: String,
    pub classes: Vec<String>,
    pub samples: Vec<SampleDetection>,
    /// Fraction of samples outside every class region.
    pub hallucination_rate: f64,
}

impl DetectionReport {
    pub fn inside_rate(&self) -> f64 {
        1.0 - self.hallucination_rate
    }

    /// Fraction of samples inside the region of `class`.
    pub fn class_inside_rate(&self, class: usize) -> f64 {
        self.samples.iter().filter(|s| s.in_hdr[class]).count() as f64 / self.samples.len().max(1) as f64
    }

    /// One row per sample: per-class log-density and flag, then the union flag.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["sample".to_string()];
        header.extend(self.classes.iter().map(|c| format!("logpdf_{c}")));
        header.extend(self.classes.iter().map(|c| format!("in_hdr_{c}")));
        header.push("in_hcdr".into());
        w.write_record(&header)?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(s.log_densities.iter().map(|x| x.to_string()));
            rec.extend(s.in_hdr.iter().map(|b| u8::from(*b).to_string()));
            rec.push(u8::from(s.in_hcdr).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    #[serde(default = "schema_v1")]
    pub schema: String,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default)]
    pub pca: Components,
    #[serde(default)]
    pub gmm: GmmConfig,
}

fn default_train_fraction() -> f64 {
    0.8
}
fn default_percentile() -> f64 {
    10.0
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            schema: schema_v1(),
            train_fraction: default_train_fraction(),
            percentile: default_percentile(),
            pca: Components::default(),
            gmm: GmmConfig::default(),
        }
    }
}

/// Provenance of a fitted bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub schema: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: DetectorConfig,
    pub classes: Vec<String>,
    pub train_counts: Vec<usize>,
    pub calibration_counts: Vec<usize>,
    pub fit_traces: Vec<FitTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub classes: Vec<String>,
    pub models: Vec<ClassDensityModel>,
}

pub const PIPELINE_FILE: &str = "pipeline.json";
pub const MODEL_FILE: &str = "model.json";
pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to run detection.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorBundle {
    pub pipeline: PreprocessPipeline,
    pub classes: Vec<String>,
    pub models: Vec<ClassDensityModel>,
    pub thresholds: CalibratedThresholds,
    pub manifest: BundleManifest,
}

fn class_points(pipeline: &PreprocessPipeline, m: &EmbeddingMatrix, class: usize) -> Result<Vec<Vec<f64>>> {
    pipeline.transform_all(&m.class_rows(class))
}

/// Split, fit the shared pipeline and per-class mixtures on the training
/// part, and calibrate on the rest.
pub fn fit_detector(data: &EmbeddingMatrix, cfg: &DetectorConfig, seed: u64) -> Result<DetectorBundle> {
    data.validate()?;
    let (train, calib) = split(data, cfg.train_fraction, rng::stream_seed(seed, "detector/split"))?;
    let refs: Vec<&[f64]> = train.rows.iter().map(Vec::as_slice).collect();
    let pipeline = PreprocessPipeline::fit(&refs, cfg.pca)?;
    let fits = (0..data.classes.len())
        .into_par_iter()
        .map(|c| {
            let pts = class_points(&pipeline, &train, c)?;
            let pts: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
            fit_gmm(&pts, &cfg.gmm, rng::stream_seed(seed, &format!("detector/gmm/{c}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let (models, fit_traces): (Vec<_>, Vec<_>) = fits.into_iter().unzip();
    let manifest = BundleManifest {
        schema: schema_v1(),
        seed,
        config_hash: crate::report::config_hash(&serde_json::to_value(cfg)?),
        config: cfg.clone(),
        classes: data.classes.clone(),
        train_counts: (0..data.classes.len()).map(|c| train.class_rows(c).len()).collect(),
        calibration_counts: (0..data.classes.len()).map(|c| calib.class_rows(c).len()).collect(),
        fit_traces,
    };
    let mut bundle = DetectorBundle {
        pipeline,
        classes: data.classes.clone(),
        models,
        thresholds: CalibratedThresholds::admit_all(&data.classes),
        manifest,
    };
    bundle.calibrate_on(&calib, cfg.percentile)?;
    Ok(bundle)
}

impl DetectorBundle {
    /// Set every class cutoff from the calibration rows of that class.
    pub fn calibrate_on(&mut self, calib: &EmbeddingMatrix, percentile: f64) -> Result<()> {
        if calib.classes != self.classes {
            return Err(HalluError::input("calibration classes differ from the fitted classes"));
        }
        let mut thresholds = Vec::with_capacity(self.classes.len());
        for (c, model) in self.models.iter().enumerate() {
            let pts = class_points(&self.pipeline, calib, c)?;
            let (cutoff, count) = calibrate(model, &pts, percentile)?;
            thresholds.push(ClassThreshold { class: self.classes[c].clone(), cutoff, percentile, count });
        }
        self.thresholds = CalibratedThresholds { schema: schema_v1(), thresholds };
        Ok(())
    }

    /// Recalibrate at a new percentile using the calibration split that the
    /// recorded seed reproduces from `data`.
    pub fn recalibrate(&mut self, data: &EmbeddingMatrix, percentile: f64) -> Result<()> {
        let (_, calib) =
            split(data, self.manifest.config.train_fraction, rng::stream_seed(self.manifest.seed, "detector/split"))?;
        self.calibrate_on(&calib, percentile)?;
        self.manifest.config.percentile = percentile;
        self.manifest.config_hash = crate::report::config_hash(&serde_json::to_value(&self.manifest.config)?);
        Ok(())
    }

    pub fn detect(&self, rows: &[&[f64]]) -> Result<DetectionReport> {
        if self.thresholds.thresholds.len() != self.models.len() {
            return Err(HalluError::model("thresholds and models disagree on class count"));
        }
        let samples = rows
            .par_iter()
            .map(|row| {
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(HalluError::input("embedding has a non-finite value"));
                }
                let z = self.pipeline.transform(row)?;
                let log_densities = self.models.iter().map(|m| m.log_density(&z)).collect::<Result<Vec<_>>>()?;
                let in_hdr: Vec<bool> = log_densities
                    .iter()
                    .zip(&self.thresholds.thresholds)
                    .map(|(l, t)| *l >= t.cutoff)
                    .collect();
                let in_hcdr = in_hdr.iter().any(|b| *b);
                Ok(SampleDetection { log_densities, in_hdr, in_hcdr })
            })
            .collect::<Result<Vec<_>>>()?;
        let outside = samples.iter().filter(|s| !s.in_hcdr).count();
        Ok(DetectionReport {
            schema: schema_v1(),
            classes: self.classes.clone(),
            hallucination_rate: if samples.is_empty() { 0.0 } else { outside as f64 / samples.len() as f64 },
            samples,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join(PIPELINE_FILE), &self.pipeline)?;
        let models = ModelFile { schema: schema_v1(), classes: self.classes.clone(), models: self.models.clone() };
        write_json(&dir.join(MODEL_FILE), &models)?;
        write_json(&dir.join(THRESHOLDS_FILE), &self.thresholds)?;
        write_json(&dir.join(MANIFEST_FILE), &self.manifest)
    }

    /// Load a bundle; a missing piece is reported as a missing artifact.
    pub fn load(dir: &Path) -> Result<Self> {
        let pipeline: PreprocessPipeline = read_json(&dir.join(PIPELINE_FILE))?;
        let models: ModelFile = read_json(&dir.join(MODEL_FILE))?;
        let thresholds: CalibratedThresholds = read_json(&dir.join(THRESHOLDS_FILE))?;
        let manifest: BundleManifest = read_json(&dir.join(MANIFEST_FILE))?;
        if models.models.iter().any(|m| m.dim() != pipeline.output_dim()) {
            return Err(HalluError::model("model dimension does not match the pipeline output"));
        }
        if models.models.len() != models.classes.len() || thresholds.thresholds.len() != models.classes.len() {
            return Err(HalluError::model("bundle pieces disagree on class count"));
        }
        Ok(Self { pipeline, classes: models.classes, models: models.models, thresholds, manifest })
    }
}

/// Collate per-checkpoint hallucination rates, in the given order.
pub fn hallucination_rate_trace(reports: &[DetectionReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["checkpoint", "samples", "hallucination_rate"])?;
    for (i, r) in reports.iter().enumerate() {
        w.write_record([i.to_string(), r.samples.len().to_string(), r.hallucination_rate.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Well-separated synthetic classes: class `c` is centered at
/// `separation·e_c + offset·e_C` (C = number of classes) with isotropic noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_per_class")]
    pub per_class: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_offset")]
    pub offset: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_classes() -> usize {
    2
}
fn default_per_class() -> usize {
    2000
}
fn default_dim() -> usize {
    16
}
fn default_separation() -> f64 {
    4.0
}
fn default_offset() -> f64 {
    2.0
}
fn default_noise() -> f64 {
    0.4
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SyntheticSpec {
    fn check(&self) -> Result<()> {
        if self.classes == 0 || self.dim <= self.classes || self.per_class == 0 {
            return Err(HalluError::input("synthetic data needs classes ≥ 1, dim > classes, per_class ≥ 1"));
        }
        if !(self.noise > 0.0) {
            return Err(HalluError::input("noise must be positive"));
        }
        Ok(())
    }

    pub fn class_mean(&self, c: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        m[c] = self.separation;
        m[self.classes] = self.offset;
        m
    }

    /// Mean of all class centers, the middle of the gap between classes.
    pub fn gap_center(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for c in 0..self.classes {
            for (gi, mi) in g.iter_mut().zip(self.class_mean(c)) {
                *gi += mi / self.classes as f64;
            }
        }
        g
    }
}

fn gaussian_rows(center: &[f64], std: f64, n: usize, seed: u64, label: &str) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, label);
    (0..n)
        .map(|_| {
            center
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    c + std * z
                })
                .collect()
        })
        .collect()
}

pub fn synthetic_classes(spec: &SyntheticSpec, seed: u64) -> Result<EmbeddingMatrix> {
    spec.check()?;
    let mut rows = Vec::with_capacity(spec.classes * spec.per_class);
    let mut labels = Vec::with_capacity(rows.capacity());
    for c in 0..spec.classes {
        rows.extend(gaussian_rows(&spec.class_mean(c), spec.noise, spec.per_class, seed, &format!("synthetic/{c}")));
        labels.extend(std::iter::repeat_n(c, spec.per_class));
    }
    let classes = (0..spec.classes).map(|c| format!("class{c}")).collect();
    let mut m = EmbeddingMatrix::new(rows, labels, classes)?;
    m.source = serde_json::json!({ "synthetic": spec, "seed": seed });
    Ok(m)
}

/// Probes around the gap center with a small isotropic spread.
pub fn gap_probes(spec: &SyntheticSpec, n: usize, std: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    spec.check()?;
    Ok(gaussian_rows(&spec.gap_center(), std, n, seed, "synthetic/gap"))
}
