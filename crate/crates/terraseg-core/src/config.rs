//! Pipeline configuration: one TOML file covering every stage, with
//! command-line overrides layered on top by the CLI.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::OutlierConfig;
use crate::error::{Error, Result};
use crate::features::{DescriptorVariant, DetectorConfig};

/// The five default terrain classes.
pub const DEFAULT_CLASS_NAMES: [&str; 5] = ["grass", "gravel", "trees", "dirt", "sky"];

fn default_class_names() -> Vec<String> {
    DEFAULT_CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThinningConfig {
    /// Grid box side in pixels; 20 caps a 640x480 frame at 768 features.
    pub box_size: usize,
}

impl Default for ThinningConfig {
    fn default() -> Self {
        Self { box_size: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    /// Neighbor count; 3 is the best-performing default.
    pub k: usize,
    /// Kernel width; omitted means the data-driven default.
    pub h: Option<f64>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 3, h: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Hidden layer widths; input and output sizes come from the data.
    pub hidden: Vec<usize>,
    /// "rprop" or "lma".
    pub algorithm: String,
    pub epochs: usize,
    pub val_fraction: f64,
    pub patience: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![60, 60],
            algorithm: "rprop".into(),
            epochs: 500,
            val_fraction: 0.25,
            patience: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// RBF width; the shipped grid-search optimum.
    pub gamma: f64,
    /// Soft-margin upper bound, picked by the same grid search.
    pub cost: f64,
    pub tol: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            gamma: 8.0,
            cost: 4.0,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplatConfig {
    /// Gaussian sigma per unit of feature scale.
    pub radius_factor: f64,
    /// Pixels below this accumulated weight stay UNKNOWN.
    pub min_weight: f64,
}

impl Default for SplatConfig {
    fn default() -> Self {
        Self {
            radius_factor: 1.0,
            min_weight: 1e-3,
        }
    }
}

/// Everything the pipeline needs, serializable to a single TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub variant: String,
    #[serde(rename = "class_names")]
    pub class_names: Vec<String>,
    pub detector: DetectorConfig,
    pub thinning: ThinningConfig,
    pub outliers: OutlierConfig,
    pub knn: KnnConfig,
    pub mlp: MlpConfig,
    pub svm: SvmConfig,
    pub splat: SplatConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            variant: "usurf36".into(),
            class_names: default_class_names(),
            detector: DetectorConfig::default(),
            thinning: ThinningConfig::default(),
            outliers: OutlierConfig::default(),
            knn: KnnConfig::default(),
            mlp: MlpConfig::default(),
            svm: SvmConfig::default(),
            splat: SplatConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn variant(&self) -> Result<DescriptorVariant> {
        DescriptorVariant::parse(&self.variant)
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.variant()?;
        self.detector.validate()?;
        self.outliers.validate()?;
        if self.class_names.is_empty() {
            return Err(Error::Config("class_names must not be empty".into()));
        }
        if self.thinning.box_size == 0 {
            return Err(Error::Config("thinning box size must be >= 1".into()));
        }
        if self.svm.gamma <= 0.0 || self.svm.cost <= 0.0 || self.svm.tol <= 0.0 {
            return Err(Error::Config("svm gamma, cost and tol must be > 0".into()));
        }
        if self.splat.radius_factor <= 0.0 {
            return Err(Error::Config("splat radius_factor must be > 0".into()));
        }
        crate::mlp::TrainAlgorithm::parse(&self.mlp.algorithm)?;
        Ok(())
    }
}
