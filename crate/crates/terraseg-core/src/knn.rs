//! Lazy-learning classifier: k-NN voting, Parzen-window density estimation,
//! and the hybrid that applies the Gaussian kernel to the k nearest
//! neighbors only.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{euclidean, LabeledFeatureSet};
use crate::error::{Error, Result};
use crate::features::io as feature_io;

/// Gaussian kernel `(2 pi)^(-p/2) exp(-|z|^2 / 2)`; integrates to one over
/// R^p.
pub fn gaussian_kernel(z: &[f64]) -> f64 {
    let p = z.len() as f64;
    let sq: f64 = z.iter().map(|v| v * v).sum();
    (2.0 * PI).powf(-p / 2.0) * (-sq / 2.0).exp()
}

/// The lazy-learning model: the training set plus the neighbor count and
/// kernel width defaults.
#[derive(Debug, Clone)]
pub struct KnnModel {
    pub set: LabeledFeatureSet,
    pub k: usize,
    pub h: f64,
    pub class_names: Vec<String>,
}

impl KnnModel {
    /// Build a model; when `h` is `None` it defaults to the mean distance to
    /// the k-th nearest neighbor over an evenly spaced 200-point subsample.
    pub fn new(
        set: LabeledFeatureSet,
        k: usize,
        h: Option<f64>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptyModel);
        }
        if k < 1 || k > set.len() {
            return Err(Error::Config(format!(
                "k = {k} outside 1..={}",
                set.len()
            )));
        }
        if class_names.len() != set.class_count {
            return Err(Error::Config(format!(
                "{} class names for {} classes",
                class_names.len(),
                set.class_count
            )));
        }
        let h = match h {
            Some(h) if h > 0.0 => h,
            Some(h) => {
                return Err(Error::Config(format!("kernel width {h} must be > 0")))
            }
            None => default_bandwidth(&set, k),
        };
        Ok(Self {
            set,
            k,
            h,
            class_names,
        })
    }

    /// Class priors n_m / n.
    pub fn priors(&self) -> Vec<f64> {
        let n = self.set.len() as f64;
        self.set
            .class_counts()
            .into_iter()
            .map(|c| c as f64 / n)
            .collect()
    }

    fn descriptor(&self, i: usize) -> &[f64] {
        &self.set.features[i].descriptor.values
    }

    /// Indices of the k nearest training points, closest first; distance
    /// ties resolve by training index.
    fn nearest(&self, x: &[f64], k: usize) -> Result<Vec<(f64, usize)>> {
        if k > self.set.len() {
            return Err(Error::Config(format!(
                "k = {k} exceeds training size {}",
                self.set.len()
            )));
        }
        let mut dists: Vec<(f64, usize)> = (0..self.set.len())
            .map(|i| (euclidean(x, self.descriptor(i)), i))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dists.truncate(k);
        Ok(dists)
    }
}

fn default_bandwidth(set: &LabeledFeatureSet, k: usize) -> f64 {
    let n = set.len();
    let stride = n.div_ceil(200).max(1);
    let sample: Vec<usize> = (0..n).step_by(stride).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for &i in &sample {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| euclidean(&set.features[i].descriptor.values, &set.features[j].descriptor.values))
            .collect();
        if dists.is_empty() {
            continue;
        }
        dists.sort_by(f64::total_cmp);
        total += dists[(k - 1).min(dists.len() - 1)];
        count += 1;
    }
    let mean = if count > 0 { total / count as f64 } else { 1.0 };
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// Majority vote among the k nearest neighbors. The posterior is the vector
/// of neighbor shares; vote ties go to the class whose nearest member is
/// closest, then to the lowest index.
pub fn knn_classify(model: &KnnModel, x: &[f64], k: usize) -> Result<(usize, Vec<f64>)> {
    let neighbors = model.nearest(x, k)?;
    let m = model.set.class_count;
    let mut counts = vec![0usize; m];
    let mut closest = vec![f64::INFINITY; m];
    for &(d, i) in &neighbors {
        let label = model.set.labels[i];
        counts[label] += 1;
        if d < closest[label] {
            closest[label] = d;
        }
    }
    let top = *counts.iter().max().expect("non-empty classes");
    let class = (0..m)
        .filter(|&c| counts[c] == top)
        .min_by(|&a, &b| closest[a].total_cmp(&closest[b]).then(a.cmp(&b)))
        .expect("at least one class");
    let posterior = counts.iter().map(|&c| c as f64 / k as f64).collect();
    Ok((class, posterior))
}

/// Parzen-window density of class `m` at `x`:
/// `(1 / (n_m h^p)) sum_i K((x - x_i) / h)` over the class members.
pub fn parzen_density(model: &KnnModel, x: &[f64], class: usize) -> Result<f64> {
    if class >= model.set.class_count {
        return Err(Error::EmptyClass(class));
    }
    let n_m = model.set.class_counts()[class];
    if n_m == 0 {
        return Err(Error::EmptyClass(class));
    }
    let p = x.len() as f64;
    let h = model.h;
    let mut sum = 0.0;
    for i in 0..model.set.len() {
        if model.set.labels[i] != class {
            continue;
        }
        let z: Vec<f64> = x
            .iter()
            .zip(model.descriptor(i))
            .map(|(a, b)| (a - b) / h)
            .collect();
        sum += gaussian_kernel(&z);
    }
    Ok(sum / (n_m as f64 * h.powf(p)))
}

/// Local Parzen estimate over the k nearest neighbors only: per class the
/// kernel sum runs over that class's members among the k global nearest,
/// scaled by `1 / (n_m h^p)`. The class is the argmax; scores are
/// normalized into a posterior (uniform if every score is zero).
pub fn hybrid_classify(model: &KnnModel, x: &[f64], k: usize) -> Result<(usize, Vec<f64>)> {
    let neighbors = model.nearest(x, k)?;
    let mut in_neighborhood = vec![false; model.set.len()];
    for &(_, i) in &neighbors {
        in_neighborhood[i] = true;
    }
    let counts = model.set.class_counts();
    let p = x.len() as f64;
    let h = model.h;
    let m = model.set.class_count;
    let mut scores = vec![0.0; m];
    // Summation runs in training-index order so that k = n reproduces the
    // full Parzen estimate bit for bit.
    for class in 0..m {
        if counts[class] == 0 {
            continue;
        }
        let mut sum = 0.0;
        for i in 0..model.set.len() {
            if !in_neighborhood[i] || model.set.labels[i] != class {
                continue;
            }
            let z: Vec<f64> = x
                .iter()
                .zip(model.descriptor(i))
                .map(|(a, b)| (a - b) / h)
                .collect();
            sum += gaussian_kernel(&z);
        }
        scores[class] = sum / (counts[class] as f64 * h.powf(p));
    }
    let total: f64 = scores.iter().sum();
    let posterior: Vec<f64> = if total > 0.0 {
        scores.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / m as f64; m]
    };
    let mut closest = vec![f64::INFINITY; m];
    for &(d, i) in &neighbors {
        let label = model.set.labels[i];
        if d < closest[label] {
            closest[label] = d;
        }
    }
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let class = (0..m)
        .filter(|&c| scores[c] == best)
        .min_by(|&a, &b| closest[a].total_cmp(&closest[b]).then(a.cmp(&b)))
        .expect("at least one class");
    Ok((class, posterior))
}

pub const MAGIC: &str = "terraseg-knn v1";

impl KnnModel {
    /// Persist as a small header plus the feature-set CSV next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_name = format!(
            "{}.features.csv",
            path.file_name().unwrap_or_default().to_string_lossy()
        );
        let variant = self
            .set
            .features
            .first()
            .map_or(crate::features::DescriptorVariant::USurf36, |f| {
                f.descriptor.variant
            });
        let mut header = String::new();
        header.push_str(MAGIC);
        header.push('\n');
        writeln!(header, "k {}", self.k).expect("string write");
        writeln!(header, "h {:.16e}", self.h).expect("string write");
        writeln!(header, "classes {}", self.set.class_count).expect("string write");
        writeln!(header, "class_names {}", self.class_names.join(" ")).expect("string write");
        writeln!(header, "variant {variant}").expect("string write");
        writeln!(header, "features {csv_name}").expect("string write");
        fs::write(path, header).map_err(|e| Error::io(path, e))?;
        let csv_path = path.with_file_name(&csv_name);
        feature_io::write_csv(&csv_path, &self.set.features, Some(&self.set.labels))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::format(path, m);
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("not a knn model file"));
        }
        let mut k = None;
        let mut h = None;
        let mut classes = None;
        let mut class_names: Vec<String> = Vec::new();
        let mut variant = None;
        let mut csv: Option<PathBuf> = None;
        for line in lines {
            let Some((key, value)) = line.split_once(' ') else {
                continue;
            };
            match key {
                "k" => k = value.parse().ok(),
                "h" => h = value.parse().ok(),
                "classes" => classes = value.parse().ok(),
                "class_names" => {
                    class_names = value.split_whitespace().map(String::from).collect()
                }
                "variant" => variant = crate::features::DescriptorVariant::parse(value).ok(),
                "features" => {
                    csv = Some(path.with_file_name(value));
                }
                _ => {}
            }
        }
        let k: usize = k.ok_or_else(|| bad("missing k"))?;
        let h: f64 = h.ok_or_else(|| bad("missing h"))?;
        let classes: usize = classes.ok_or_else(|| bad("missing class count"))?;
        let variant = variant.ok_or_else(|| bad("missing variant"))?;
        let csv = csv.ok_or_else(|| bad("missing features path"))?;
        let (features, raw_labels) = feature_io::read_csv_tagged(&csv, variant)?;
        let labels: Vec<usize> = raw_labels
            .iter()
            .map(|&l| {
                usize::try_from(l).map_err(|_| Error::format(&csv, "unlabeled feature in model"))
            })
            .collect::<Result<_>>()?;
        let set = LabeledFeatureSet::new(features, labels, classes)?;
        KnnModel::new(set, k, Some(h), class_names)
    }
}
