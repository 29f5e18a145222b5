//! Training-set assembly and preprocessing: grid thinning, mask labeling,
//! outlier elimination, dense/non-dense splitting and the 2:1:1 partition.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::Feature;

/// Mask value marking pixels excluded from training and evaluation.
pub const IGNORE: u8 = 255;

/// Per-pixel terrain classes; values `0..class_count` or [`IGNORE`].
#[derive(Debug, Clone)]
pub struct LabelMask {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Data(format!(
                "mask buffer length {} does not match {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let (width, height, labels) = crate::imaging::pnm::read_pgm_raw(path)?;
        Self::new(width, height, labels)
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }
}

/// Features with terrain-class labels: the training/evaluation corpus.
#[derive(Debug, Clone, Default)]
pub struct LabeledFeatureSet {
    pub features: Vec<Feature>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl LabeledFeatureSet {
    pub fn new(features: Vec<Feature>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} features but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Per-class feature counts n_m.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn descriptor_dims(&self) -> usize {
        self.features
            .first()
            .map_or(0, |f| f.descriptor.values.len())
    }

    fn subset(&self, indices: &[usize]) -> LabeledFeatureSet {
        LabeledFeatureSet {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }
}

/// Parameters of the neighbor-kernel outlier score.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OutlierConfig {
    /// Neighbors summed per score.
    pub k: usize,
    /// Kernel width; `None` resolves to the median nearest-neighbor distance
    /// within each class.
    pub sigma: Option<f64>,
    /// Fraction of each class to drop, within [0.05, 0.20].
    pub drop_fraction: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self {
            k: 5,
            sigma: None,
            drop_fraction: 0.10,
        }
    }
}

impl OutlierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("outlier k must be >= 1".into()));
        }
        if let Some(s) = self.sigma {
            if s <= 0.0 {
                return Err(Error::Config("outlier sigma must be > 0".into()));
            }
        }
        if !(0.05..=0.20).contains(&self.drop_fraction) {
            return Err(Error::Config(
                "drop_fraction must lie in [0.05, 0.20]".into(),
            ));
        }
        Ok(())
    }
}

/// Keep the strongest feature per `box`-sized grid cell; ties go to the
/// lowest (y, x). Output is ordered by cell, row-major.
pub fn grid_thin(features: &[Feature], box_size: usize, dims: (usize, usize)) -> Vec<Feature> {
    assert!(box_size >= 1, "box size must be >= 1");
    let (width, height) = dims;
    let mut cells: HashMap<(usize, usize), &Feature> = HashMap::new();
    for f in features {
        let cx = (f.point.x.max(0.0) as usize).min(width.saturating_sub(1)) / box_size;
        let cy = (f.point.y.max(0.0) as usize).min(height.saturating_sub(1)) / box_size;
        cells
            .entry((cy, cx))
            .and_modify(|best| {
                let better = f.point.strength > best.point.strength
                    || (f.point.strength == best.point.strength
                        && (f.point.y, f.point.x) < (best.point.y, best.point.x));
                if better {
                    *best = f;
                }
            })
            .or_insert(f);
    }
    let mut keys: Vec<(usize, usize)> = cells.keys().copied().collect();
    keys.sort_unstable();
    keys.into_iter().map(|k| cells[&k].clone()).collect()
}

/// Label each feature with the mask class at its rounded position; features
/// on [`IGNORE`] pixels are dropped.
pub fn label_features(
    features: &[Feature],
    mask: &LabelMask,
    class_count: usize,
) -> Result<LabeledFeatureSet> {
    let mut kept = Vec::new();
    let mut labels = Vec::new();
    for f in features {
        let x = (f.point.x.round().max(0.0) as usize).min(mask.width - 1);
        let y = (f.point.y.round().max(0.0) as usize).min(mask.height - 1);
        let value = mask.get(x, y);
        if value == IGNORE {
            continue;
        }
        if usize::from(value) >= class_count {
            return Err(Error::Data(format!(
                "mask value {value} at ({x},{y}) exceeds class count {class_count}"
            )));
        }
        kept.push(f.clone());
        labels.push(usize::from(value));
    }
    LabeledFeatureSet::new(kept, labels, class_count)
}

/// Symmetric Euclidean distance matrix between descriptor vectors.
pub fn distance_matrix(descriptors: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = descriptors.len();
    let mut matrix = vec![vec![0.0; n]; n];
    let rows: Vec<(usize, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            for j in 0..n {
                if i < j {
                    row[j] = euclidean(descriptors[i], descriptors[j]);
                }
            }
            (i, row)
        })
        .collect();
    for (i, row) in rows {
        matrix[i] = row;
    }
    for i in 0..n {
        for j in 0..i {
            matrix[i][j] = matrix[j][i];
        }
    }
    matrix
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per-descriptor neighborhood score: each row of the distance matrix is
/// sorted ascending, the self distance at position 0 is skipped, and the k
/// smallest remaining distances are summed through exp(-d / sigma). Small
/// scores mark isolated descriptors.
pub fn outlier_scores(matrix: &[Vec<f64>], k: usize, sigma: f64) -> Result<Vec<f64>> {
    let n = matrix.len();
    if k >= n {
        return Err(Error::KTooLarge);
    }
    Ok(matrix
        .iter()
        .map(|row| {
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            sorted[1..=k].iter().map(|d| (-d / sigma).exp()).sum()
        })
        .collect())
}

/// Median distance to the nearest non-self neighbor; the data-driven kernel
/// width used when none is configured.
fn median_nn_distance(matrix: &[Vec<f64>]) -> f64 {
    let mut nearest: Vec<f64> = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &d)| d)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nearest.sort_by(f64::total_cmp);
    let median = nearest[nearest.len() / 2];
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Drop the floor(drop_fraction * class size) lowest-scoring features of
/// each class; survivors keep their relative order.
pub fn eliminate_outliers(set: &LabeledFeatureSet, cfg: &OutlierConfig) -> Result<LabeledFeatureSet> {
    cfg.validate()?;
    let mut drop = vec![false; set.len()];
    for class in 0..set.class_count {
        let members: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        let to_drop = (cfg.drop_fraction * members.len() as f64).floor() as usize;
        if to_drop == 0 {
            continue;
        }
        let descriptors: Vec<&[f64]> = members
            .iter()
            .map(|&i| set.features[i].descriptor.values.as_slice())
            .collect();
        let matrix = distance_matrix(&descriptors);
        let sigma = cfg.sigma.unwrap_or_else(|| median_nn_distance(&matrix));
        let scores = outlier_scores(&matrix, cfg.k, sigma)?;
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        for &local in order.iter().take(to_drop) {
            drop[members[local]] = true;
        }
    }
    let keep: Vec<usize> = (0..set.len()).filter(|&i| !drop[i]).collect();
    Ok(set.subset(&keep))
}

/// Per-feature density flags: true iff the feature's N nearest neighbors
/// across the whole set (self excluded) all share its label.
pub fn dense_flags(set: &LabeledFeatureSet, n: usize) -> Result<Vec<bool>> {
    if n < 1 {
        return Err(Error::Config("dense-split N must be >= 1".into()));
    }
    if set.len() <= n {
        return Err(Error::Data(format!(
            "set of {} features is too small for N = {n}",
            set.len()
        )));
    }
    let descriptors: Vec<&[f64]> = set
        .features
        .iter()
        .map(|f| f.descriptor.values.as_slice())
        .collect();
    Ok((0..set.len())
        .into_par_iter()
        .map(|i| {
            let mut dists: Vec<(f64, usize)> = (0..set.len())
                .filter(|&j| j != i)
                .map(|j| (euclidean(descriptors[i], descriptors[j]), j))
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dists[..n].iter().all(|&(_, j)| set.labels[j] == set.labels[i])
        })
        .collect())
}

/// Partition into (dense, non-dense) by [`dense_flags`].
pub fn dense_split(set: &LabeledFeatureSet, n: usize) -> Result<(LabeledFeatureSet, LabeledFeatureSet)> {
    let flags = dense_flags(set, n)?;
    let dense: Vec<usize> = (0..set.len()).filter(|&i| flags[i]).collect();
    let sparse: Vec<usize> = (0..set.len()).filter(|&i| !flags[i]).collect();
    Ok((set.subset(&dense), set.subset(&sparse)))
}

/// Deterministic stratified 2:1:1 split into (train, validation, test).
pub fn split_train_val_test(
    set: &LabeledFeatureSet,
    seed: u64,
) -> Result<(LabeledFeatureSet, LabeledFeatureSet, LabeledFeatureSet)> {
    if set.len() < 4 {
        return Err(Error::Data(format!(
            "set of {} features is too small to split 2:1:1",
            set.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for class in 0..set.class_count {
        let mut members: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = n.div_ceil(2);
        let n_val = (n - n_train).div_ceil(2);
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
        test.extend_from_slice(&members[n_train + n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((set.subset(&train), set.subset(&val), set.subset(&test)))
}

/// Deterministic stratified holdout: per class, `holdout_fraction` of the
/// members (rounded, at least one when the class has two or more) go to the
/// held-out part. Returns (rest, held_out).
pub fn stratified_holdout(
    set: &LabeledFeatureSet,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(LabeledFeatureSet, LabeledFeatureSet)> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::Config(
            "holdout fraction must lie in [0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rest = Vec::new();
    let mut held = Vec::new();
    for class in 0..set.class_count {
        let mut members: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == class).collect();
        members.shuffle(&mut rng);
        let mut n_held = (holdout_fraction * members.len() as f64).round() as usize;
        if holdout_fraction > 0.0 && members.len() >= 2 {
            n_held = n_held.clamp(1, members.len() - 1);
        }
        held.extend_from_slice(&members[..n_held]);
        rest.extend_from_slice(&members[n_held..]);
    }
    rest.sort_unstable();
    held.sort_unstable();
    Ok((set.subset(&rest), set.subset(&held)))
}

/// One training pair from the manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub image: PathBuf,
    pub mask: PathBuf,
}

/// Parse a manifest: one `image_path<TAB>mask_path` line per pair. Relative
/// paths resolve against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<TrainingPair>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((image, mask)) = line.split_once('\t') else {
            return Err(Error::format(
                path,
                format!("line {}: expected image<TAB>mask", lineno + 1),
            ));
        };
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        pairs.push(TrainingPair {
            image: resolve(image),
            mask: resolve(mask),
        });
    }
    if pairs.is_empty() {
        return Err(Error::format(path, "empty manifest"));
    }
    Ok(pairs)
}
