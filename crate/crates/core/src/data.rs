//! Dataset ingestion, feature normalization, the synthetic RoI generator and
//! the explanation file format.
//!
//! Dataset file layout:
//!
//! ```json
//! {"class_names": ["N+B", "D+I"],
//!  "splits": {"train": [RoI, ...], "val": [...], "test": [...]}}
//! ```
//!
//! where each RoI is
//! `{"id": str, "w": int, "h": int, "label": int, "nuclei": [{"x", "y", "f": [...]}], "planted": [int]}`
//! and `planted` is optional.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{build_cell_graph, CellGraph, GraphConfig, NucleusRecord};
use crate::rng::rng_from;
use crate::{json, Error, Result};

/// One region of interest: the per-sample unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiRecord {
    pub id: String,
    #[serde(rename = "w")]
    pub image_w: u32,
    #[serde(rename = "h")]
    pub image_h: u32,
    pub label: usize,
    pub nuclei: Vec<NucleusRecord>,
    #[serde(rename = "planted", default, skip_serializing_if = "Option::is_none")]
    pub planted_relevant: Option<Vec<usize>>,
}

impl RoiRecord {
    pub fn build_graph(&self, cfg: &GraphConfig) -> Result<CellGraph> {
        let g = build_cell_graph(
            &self.nuclei,
            f64::from(self.image_w),
            f64::from(self.image_h),
            cfg,
        )?;
        Ok(g.with_label(Some(self.label)))
    }

    pub fn feature_dim(&self) -> usize {
        self.nuclei.first().map_or(0, |n| n.features.len())
    }
}

/// Per-dimension statistics of the hand-crafted features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Dimensions whose train standard deviation vanished; left unscaled.
    pub constant: Vec<bool>,
}

const CONSTANT_STD: f64 = 1e-12;

impl FeatureStats {
    /// Population mean/std over every nucleus in `rois`.
    pub fn compute(rois: &[RoiRecord]) -> Result<Self> {
        let dim = rois
            .first()
            .map(RoiRecord::feature_dim)
            .ok_or(Error::EmptyInput(
                "feature statistics need a non-empty split",
            ))?;
        let mut sum = vec![0.0; dim];
        let mut count = 0usize;
        for n in rois.iter().flat_map(|r| &r.nuclei) {
            for (s, v) in sum.iter_mut().zip(&n.features) {
                *s += v;
            }
            count += 1;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; dim];
        for n in rois.iter().flat_map(|r| &r.nuclei) {
            for ((s, v), m) in sq.iter_mut().zip(&n.features).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = sq.iter().map(|s| (s / count as f64).sqrt()).collect();
        let constant = std.iter().map(|&s| s < CONSTANT_STD).collect();
        Ok(Self {
            mean,
            std,
            constant,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Z-scores every non-constant dimension in place.
    pub fn apply(&self, rois: &mut [RoiRecord]) -> Result<()> {
        for roi in rois.iter_mut() {
            for n in &mut roi.nuclei {
                if n.features.len() != self.dim() {
                    return Err(Error::FeatureDim {
                        expected: self.dim(),
                        found: n.features.len(),
                    });
                }
                for (j, v) in n.features.iter_mut().enumerate() {
                    if !self.constant[j] {
                        *v = (*v - self.mean[j]) / self.std[j];
                    }
                }
            }
        }
        Ok(())
    }
}

/// Train/validation/test partition with class names and train statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<RoiRecord>,
    pub val: Vec<RoiRecord>,
    pub test: Vec<RoiRecord>,
    pub class_names: Vec<String>,
    pub feature_stats: FeatureStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "val" => Ok(SplitName::Val),
            "test" => Ok(SplitName::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

impl DatasetSplit {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn split(&self, name: SplitName) -> &[RoiRecord] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }

    fn splits(&self) -> [(&'static str, &[RoiRecord]); 3] {
        [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ]
    }

    /// Assembles a split from its parts, validating every invariant and
    /// computing train statistics.
    pub fn from_parts(
        class_names: Vec<String>,
        train: Vec<RoiRecord>,
        val: Vec<RoiRecord>,
        test: Vec<RoiRecord>,
    ) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::Schema {
                record: "dataset".into(),
                field: "class_names".into(),
                reason: format!("need at least 2 classes, got {}", class_names.len()),
            });
        }
        if train.is_empty() {
            return Err(Error::Schema {
                record: "dataset".into(),
                field: "splits.train".into(),
                reason: "train split is empty".into(),
            });
        }
        let feature_stats = FeatureStats::compute(&train)?;
        let ds = Self {
            train,
            val,
            test,
            class_names,
            feature_stats,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.num_classes();
        let dim = self.feature_stats.dim();
        let mut seen = HashSet::new();
        for (_, rois) in self.splits() {
            for roi in rois {
                validate_roi(roi, c, dim)?;
                if !seen.insert(roi.id.as_str()) {
                    return Err(Error::SplitOverlap(roi.id.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> DatasetFile {
        DatasetFile {
            class_names: self.class_names.clone(),
            splits: SplitsFile {
                train: self.train.clone(),
                val: self.val.clone(),
                test: self.test.clone(),
            },
        }
    }
}

fn schema(record: &str, field: &str, reason: impl Into<String>) -> Error {
    Error::Schema {
        record: record.to_string(),
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn validate_roi(roi: &RoiRecord, num_classes: usize, dim: usize) -> Result<()> {
    let id = roi.id.as_str();
    if roi.label >= num_classes {
        return Err(Error::LabelOutOfRange {
            record: roi.id.clone(),
            label: roi.label,
            num_classes,
        });
    }
    if roi.nuclei.is_empty() {
        return Err(schema(id, "nuclei", "RoI has no nuclei"));
    }
    if roi.image_w == 0 || roi.image_h == 0 {
        return Err(schema(id, "w/h", "image size must be positive"));
    }
    for (i, n) in roi.nuclei.iter().enumerate() {
        if !(n.x.is_finite() && n.y.is_finite()) || n.x < 0.0 || n.y < 0.0 {
            return Err(schema(
                id,
                &format!("nuclei[{i}].x/y"),
                "centroid must be finite and non-negative",
            ));
        }
        if n.features.len() != dim {
            return Err(schema(
                id,
                &format!("nuclei[{i}].f"),
                format!("expected {dim} features, found {}", n.features.len()),
            ));
        }
        if n.features.iter().any(|v| !v.is_finite()) {
            return Err(schema(id, &format!("nuclei[{i}].f"), "non-finite feature"));
        }
    }
    if let Some(planted) = &roi.planted_relevant {
        if let Some(&bad) = planted.iter().find(|&&p| p >= roi.nuclei.len()) {
            return Err(schema(id, "planted", format!("index {bad} out of range")));
        }
    }
    Ok(())
}

/// On-disk dataset layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub class_names: Vec<String>,
    pub splits: SplitsFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitsFile {
    pub train: Vec<RoiRecord>,
    pub val: Vec<RoiRecord>,
    pub test: Vec<RoiRecord>,
}

#[derive(Deserialize)]
struct RawDataset {
    class_names: Vec<String>,
    splits: RawSplits,
}

#[derive(Deserialize)]
struct RawSplits {
    train: Vec<serde_json::Value>,
    val: Vec<serde_json::Value>,
    test: Vec<serde_json::Value>,
}

fn decode_rois(split: &str, values: Vec<serde_json::Value>) -> Result<Vec<RoiRecord>> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let id = v
                .get("id")
                .and_then(|x| x.as_str())
                .map_or_else(|| format!("{split}[{i}]"), str::to_string);
            serde_json::from_value::<RoiRecord>(v).map_err(|e| schema(&id, split, e.to_string()))
        })
        .collect()
}

pub fn parse_dataset_bytes(bytes: &[u8]) -> Result<DatasetSplit> {
    let raw: RawDataset =
        serde_json::from_slice(bytes).map_err(|e| schema("dataset", "top-level", e.to_string()))?;
    DatasetSplit::from_parts(
        raw.class_names,
        decode_rois("train", raw.splits.train)?,
        decode_rois("val", raw.splits.val)?,
        decode_rois("test", raw.splits.test)?,
    )
}

/// Reads and validates a dataset file; statistics come from the train split.
pub fn parse_dataset(path: &Path) -> Result<DatasetSplit> {
    parse_dataset_bytes(&std::fs::read(path)?)
}

pub fn write_dataset(path: &Path, dataset: &DatasetSplit) -> Result<()> {
    json::write_file(path, &dataset.to_file())
}

/// Z-scores the hand-crafted features of every split with the train
/// statistics, then recomputes the statistics on the normalized train split.
pub fn normalize_features(dataset: &DatasetSplit) -> Result<DatasetSplit> {
    let mut out = dataset.clone();
    let stats = &dataset.feature_stats;
    stats.apply(&mut out.train)?;
    stats.apply(&mut out.val)?;
    stats.apply(&mut out.test)?;
    let mut recomputed = FeatureStats::compute(&out.train)?;
    recomputed.constant = stats.constant.clone();
    out.feature_stats = recomputed;
    Ok(out)
}

/// Class names for the 2-, 3- and 5-class scenarios.
pub fn scenario_class_names(num_classes: usize) -> Result<Vec<String>> {
    let names: &[&str] = match num_classes {
        2 => &["N+B", "D+I"],
        3 => &["N+B", "A", "D+I"],
        5 => &["N", "B", "A", "D", "I"],
        other => return Err(Error::Config(format!("unsupported class count {other}"))),
    };
    Ok(names.iter().map(|s| s.to_string()).collect())
}

/// Five-class label to merged label; `None` drops the RoI.
fn merge_table(target: usize) -> Result<[Option<usize>; 5]> {
    match target {
        5 => Ok([Some(0), Some(1), Some(2), Some(3), Some(4)]),
        3 => Ok([Some(0), Some(0), Some(1), Some(2), Some(2)]),
        // the binary scenario leaves atypical RoIs out
        2 => Ok([Some(0), Some(0), None, Some(1), Some(1)]),
        other => Err(Error::Config(format!("unsupported class count {other}"))),
    }
}

/// Maps a 5-class dataset onto the 3- or 2-class scenario. A dataset that
/// already has `target` classes is returned unchanged.
pub fn merge_classes(dataset: &DatasetSplit, target: usize) -> Result<DatasetSplit> {
    if dataset.num_classes() == target {
        return Ok(dataset.clone());
    }
    if dataset.num_classes() != 5 {
        return Err(Error::Config(format!(
            "cannot merge {} classes into {target}",
            dataset.num_classes()
        )));
    }
    let table = merge_table(target)?;
    let remap = |rois: &[RoiRecord]| -> Vec<RoiRecord> {
        rois.iter()
            .filter_map(|r| table[r.label].map(|label| RoiRecord { label, ..r.clone() }))
            .collect()
    };
    DatasetSplit::from_parts(
        scenario_class_names(target)?,
        remap(&dataset.train),
        remap(&dataset.val),
        remap(&dataset.test),
    )
}

/// Parameters of the synthetic RoI generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub rois_per_class: usize,
    /// Inclusive range of background nuclei per RoI.
    pub nuclei_per_roi: (usize, usize),
    /// Inclusive range of planted nuclei for class 1; grows with class index.
    pub planted_cluster_size: (usize, usize),
    pub feature_dim: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 3,
            rois_per_class: 140,
            nuclei_per_roi: (40, 70),
            planted_cluster_size: (8, 12),
            feature_dim: 16,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        scenario_class_names(self.num_classes)?;
        let (lo, hi) = self.nuclei_per_roi;
        let (plo, phi) = self.planted_cluster_size;
        if self.rois_per_class == 0 || lo == 0 || plo == 0 || self.feature_dim == 0 {
            return Err(Error::Config("synthetic counts must be at least 1".into()));
        }
        if lo > hi || plo > phi {
            return Err(Error::Config(
                "synthetic ranges must satisfy min <= max".into(),
            ));
        }
        if self.noise_scale.is_nan() || self.noise_scale < 0.0 {
            return Err(Error::Config("noise_scale must be non-negative".into()));
        }
        Ok(())
    }

    /// Per-class (train, val, test) counts.
    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let n = self.rois_per_class;
        let held = if n >= 3 { (n / 7).max(1) } else { 0 };
        (n - 2 * held, held, held)
    }

    /// Feature shift of planted nuclei, in units of the baseline spread.
    /// Finer class distinctions get smaller shifts.
    pub fn planted_shift(&self) -> f64 {
        3.0 * (2.0 / self.num_classes as f64).sqrt()
    }
}

/// Mean spacing between nuclei, in pixels.
const NUCLEUS_SPACING_PX: f64 = 30.0;

fn baseline_mean(j: usize) -> f64 {
    2.0 + 0.5 * j as f64
}

fn baseline_scale(j: usize) -> f64 {
    1.0 + 0.1 * j as f64
}

/// Deterministic synthetic dataset.
///
/// Every RoI scatters background nuclei uniformly; RoIs of class `c >= 1`
/// additionally contain a compact cluster of planted nuclei whose features
/// are shifted along two class-specific dimensions. Cluster size and radius
/// grow with the class index. Node order is shuffled and the planted
/// positions recorded.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let (n_train, n_val, _) = spec.split_sizes();
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for class in 0..spec.num_classes {
        for j in 0..spec.rois_per_class {
            let ordinal = (class * spec.rois_per_class + j) as u64;
            let roi = synth_roi(spec, class, ordinal);
            if j < n_train {
                train.push(roi);
            } else if j < n_train + n_val {
                val.push(roi);
            } else {
                test.push(roi);
            }
        }
    }
    DatasetSplit::from_parts(scenario_class_names(spec.num_classes)?, train, val, test)
}

fn synth_roi(spec: &SynthSpec, class: usize, ordinal: u64) -> RoiRecord {
    let mut rng = rng_from(spec.seed, ordinal);
    let f = spec.feature_dim;
    let n_background = rng.random_range(spec.nuclei_per_roi.0..=spec.nuclei_per_roi.1);
    let n_planted = if class == 0 {
        0
    } else {
        rng.random_range(spec.planted_cluster_size.0..=spec.planted_cluster_size.1)
            + 2 * (class - 1)
    };
    let total = n_background + n_planted;
    let side = ((total as f64).sqrt() * NUCLEUS_SPACING_PX)
        .ceil()
        .max(64.0);

    let features = |rng: &mut rand_chacha::ChaCha8Rng, shift: Option<usize>| -> Vec<f64> {
        (0..f)
            .map(|j| {
                let z: f64 = StandardNormal.sample(rng);
                let mut v = baseline_mean(j) + baseline_scale(j) * spec.noise_scale * z;
                if let Some(c) = shift {
                    if j == (2 * (c - 1)) % f || j == (2 * (c - 1) + 1) % f {
                        v += spec.planted_shift() * baseline_scale(j);
                    }
                }
                v
            })
            .collect()
    };

    let mut nuclei: Vec<(NucleusRecord, bool)> = Vec::with_capacity(total);
    for _ in 0..n_background {
        let x = rng.random_range(0.0..side);
        let y = rng.random_range(0.0..side);
        let feats = features(&mut rng, None);
        nuclei.push((
            NucleusRecord {
                x,
                y,
                features: feats,
            },
            false,
        ));
    }
    if n_planted > 0 {
        let radius = 10.0 * (n_planted as f64).sqrt() * (1.0 + 0.2 * (class - 1) as f64);
        let radius = radius.min(side / 2.0);
        let cx = rng.random_range(radius..=side - radius);
        let cy = rng.random_range(radius..=side - radius);
        for _ in 0..n_planted {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let x = (cx + r * theta.cos()).clamp(0.0, side);
            let y = (cy + r * theta.sin()).clamp(0.0, side);
            let feats = features(&mut rng, Some(class));
            nuclei.push((
                NucleusRecord {
                    x,
                    y,
                    features: feats,
                },
                true,
            ));
        }
    }
    nuclei.shuffle(&mut rng);
    let planted = nuclei
        .iter()
        .enumerate()
        .filter(|(_, (_, p))| *p)
        .map(|(i, _)| i)
        .collect();
    RoiRecord {
        id: format!("synth-c{class}-{ordinal:05}"),
        image_w: side as u32,
        image_h: side as u32,
        label: class,
        nuclei: nuclei.into_iter().map(|(n, _)| n).collect(),
        planted_relevant: Some(planted),
    }
}

/// Why an explanation run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    LabelFlip,
    MaxIters,
}

/// Persisted form of an explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub roi_id: String,
    pub mask_logits: Vec<f64>,
    pub sigmoid: Vec<f64>,
    /// Original-graph numbering.
    pub kept_nodes: Vec<usize>,
    /// Original-graph numbering.
    pub kept_edges: Vec<[usize; 2]>,
    pub stop_reason: StopReason,
    pub loss_trace: Vec<f64>,
    pub predicted_class: usize,
    /// No node reached the threshold and the most active one was kept.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_fallback: bool,
}

impl ExplanationRecord {
    pub fn validate(&self) -> Result<()> {
        let n = self.mask_logits.len();
        let id = self.roi_id.as_str();
        if self.sigmoid.len() != n {
            return Err(schema(
                id,
                "sigmoid",
                format!("length {} != {n}", self.sigmoid.len()),
            ));
        }
        if self.kept_nodes.is_empty() {
            return Err(schema(id, "kept_nodes", "empty explanation"));
        }
        if let Some(&bad) = self.kept_nodes.iter().find(|&&i| i >= n) {
            return Err(schema(
                id,
                "kept_nodes",
                format!("index {bad} out of range for {n} nodes"),
            ));
        }
        let kept: HashSet<usize> = self.kept_nodes.iter().copied().collect();
        if let Some(e) = self
            .kept_edges
            .iter()
            .find(|[u, v]| !kept.contains(u) || !kept.contains(v))
        {
            return Err(schema(
                id,
                "kept_edges",
                format!("edge {e:?} leaves the kept set"),
            ));
        }
        Ok(())
    }
}

pub fn write_explanation(record: &ExplanationRecord, path: &Path) -> Result<()> {
    json::write_file(path, record)
}

/// Reads an explanation file, checking indices against the mask length.
pub fn read_explanation(path: &Path) -> Result<ExplanationRecord> {
    let record: ExplanationRecord = json::read_file(path)?;
    record.validate()?;
    Ok(record)
}
