//! Texture-based terrain segmentation library.
//!
//! The pipeline detects SURF interest points in grayscale images, describes
//! them with one of five descriptor variants, reduces and cleans the labeled
//! training set, classifies features with one of three independent
//! classifiers (kernel k-NN, multi-layer perceptron, RBF SVM), and finally
//! turns sparse classified features into a dense per-pixel segmentation.

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod knn;
pub mod mlp;
pub mod model;
pub mod pipeline;
pub mod reduce;
pub mod segmentation;
pub mod svm;
pub mod synth;

pub use config::PipelineConfig;
pub use dataset::{LabelMask, LabeledFeatureSet, OutlierConfig};
pub use error::{Error, Result};
pub use features::{Descriptor, DescriptorVariant, DetectorConfig, Feature, InterestPoint};
pub use imaging::{box_sum, build_integral, to_grayscale, GrayImage, IntegralImage, Rect, RgbImage};
pub use knn::KnnModel;
pub use mlp::MlpModel;
pub use model::TrainedModel;
pub use segmentation::{LikelihoodMap, SegmentationMap};
pub use svm::OvoModel;
