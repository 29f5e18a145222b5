//! Unified handle over the three trained classifiers, with file-format
//! dispatch on the model header.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::knn::{hybrid_classify, KnnModel};
use crate::mlp::MlpModel;
use crate::svm::OvoModel;

/// Any trained classifier: classify a descriptor into (class, score
/// vector). Scores are non-negative and ready for likelihood splatting.
pub enum TrainedModel {
    Knn(KnnModel),
    Mlp(MlpModel),
    Svm(OvoModel),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Knn(_) => "knn",
            TrainedModel::Mlp(_) => "mlp",
            TrainedModel::Svm(_) => "svm",
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            TrainedModel::Knn(m) => m.set.class_count,
            TrainedModel::Mlp(m) => m.output_dims(),
            TrainedModel::Svm(m) => m.class_count,
        }
    }

    /// Classify one descriptor. The k-NN path uses the kernel-over-
    /// k-nearest-neighbors rule with the model's stored k.
    pub fn classify(&self, descriptor: &[f64]) -> Result<(usize, Vec<f64>)> {
        match self {
            TrainedModel::Knn(m) => hybrid_classify(m, descriptor, m.k),
            TrainedModel::Mlp(m) => m.classify(descriptor),
            TrainedModel::Svm(m) => {
                let (class, _, soft) = m.classify(descriptor)?;
                Ok((class, soft))
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            TrainedModel::Knn(m) => m.save(path),
            TrainedModel::Mlp(m) => m.save(path),
            TrainedModel::Svm(m) => m.save(path),
        }
    }

    /// Load any model file; the first line identifies the classifier.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let header = text.lines().next().unwrap_or_default();
        match header {
            h if h == crate::knn::MAGIC => Ok(TrainedModel::Knn(KnnModel::load(path)?)),
            h if h == crate::mlp::io::MAGIC => {
                Ok(TrainedModel::Mlp(MlpModel::from_text(&text, path)?))
            }
            h if h == crate::svm::io::MAGIC => {
                Ok(TrainedModel::Svm(OvoModel::from_text(&text, path)?))
            }
            other => Err(Error::format(
                path,
                format!("unrecognized model header {other:?}"),
            )),
        }
    }
}
