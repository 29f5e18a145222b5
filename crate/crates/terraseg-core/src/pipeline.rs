//! End-to-end glue: extract-thin-label per image, train-set assembly,
//! segmentation and per-image evaluation.

use std::path::Path;

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::dataset::{self, LabelMask, LabeledFeatureSet, TrainingPair};
use crate::error::{Error, Result};
use crate::evaluation::{feature_error_rate, EvalReport};
use crate::features::{self, Feature};
use crate::imaging::{self, GrayImage, RgbImage};
use crate::model::TrainedModel;
use crate::segmentation::{self, ScoredFeature, SegmentationMap};

/// Detect, describe and grid-thin one image.
pub fn extract_thinned(img: &GrayImage, cfg: &PipelineConfig) -> Result<Vec<Feature>> {
    let variant = cfg.variant()?;
    let features = features::extract_from_image(img, &cfg.detector, variant)?;
    Ok(dataset::grid_thin(
        &features,
        cfg.thinning.box_size,
        (img.width, img.height),
    ))
}

/// Extract and label the features of one training pair.
pub fn labeled_features_for_pair(pair: &TrainingPair, cfg: &PipelineConfig) -> Result<LabeledFeatureSet> {
    let img = imaging::pnm::read_gray(&pair.image)?;
    let mask = LabelMask::read_pgm(&pair.mask)?;
    if mask.width != img.width || mask.height != img.height {
        return Err(Error::Data(format!(
            "{}: mask dimensions {}x{} do not match image {}x{}",
            pair.mask.display(),
            mask.width,
            mask.height,
            img.width,
            img.height
        )));
    }
    let features = extract_thinned(&img, cfg)?;
    dataset::label_features(&features, &mask, cfg.class_count())
}

/// Pool the labeled features of every pair, in manifest order.
pub fn build_labeled_set(pairs: &[TrainingPair], cfg: &PipelineConfig) -> Result<LabeledFeatureSet> {
    let per_pair: Vec<LabeledFeatureSet> = pairs
        .par_iter()
        .map(|pair| labeled_features_for_pair(pair, cfg))
        .collect::<Result<_>>()?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for set in per_pair {
        features.extend(set.features);
        labels.extend(set.labels);
    }
    LabeledFeatureSet::new(features, labels, cfg.class_count())
}

/// Classify every thinned feature of an image and splat the scores into a
/// dense label map.
pub fn segment_image(
    img: &GrayImage,
    model: &TrainedModel,
    cfg: &PipelineConfig,
) -> Result<SegmentationMap> {
    let features = extract_thinned(img, cfg)?;
    let m = model.class_count();
    let scored: Vec<ScoredFeature> = features
        .par_iter()
        .map(|f| {
            let (_, scores) = model.classify(&f.descriptor.values)?;
            Ok(ScoredFeature {
                x: f.point.x,
                y: f.point.y,
                scale: f.point.scale,
                scores,
            })
        })
        .collect::<Result<_>>()?;
    let map = segmentation::splat(
        &scored,
        (img.width, img.height),
        m,
        cfg.splat.radius_factor,
    );
    Ok(segmentation::to_labels(&map, cfg.splat.min_weight))
}

/// Render the overlay for an already computed segmentation.
pub fn overlay_for(image: &RgbImage, seg: &SegmentationMap) -> Result<RgbImage> {
    segmentation::render_overlay(image, seg, &segmentation::DEFAULT_PALETTE)
}

/// Per-image feature error rates of a trained model over test pairs:
/// extract, thin, label from the mask, classify, compare.
pub fn per_image_report(
    model: &TrainedModel,
    pairs: &[TrainingPair],
    cfg: &PipelineConfig,
    row_label: &str,
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Data("evaluation needs at least one pair".into()));
    }
    let rates: Vec<f64> = pairs
        .par_iter()
        .map(|pair| {
            let set = labeled_features_for_pair(pair, cfg)?;
            if set.is_empty() {
                return Err(Error::Data(format!(
                    "{}: no labeled features to evaluate",
                    pair.image.display()
                )));
            }
            let predictions: Vec<usize> = set
                .features
                .iter()
                .map(|f| model.classify(&f.descriptor.values).map(|(c, _)| c))
                .collect::<Result<_>>()?;
            feature_error_rate(&predictions, &set.labels)
        })
        .collect::<Result<_>>()?;
    EvalReport::new(row_label, rates)
}

/// Write a PGM label map; UNKNOWN stays 255.
pub fn write_label_map(path: impl AsRef<Path>, seg: &SegmentationMap) -> Result<()> {
    imaging::pnm::write_pgm(path, seg.width, seg.height, &seg.labels)
}
