//! Error-rate computation and report generation.

use std::fmt::Write as _;

use crate::dataset::{LabelMask, IGNORE};
use crate::error::{Error, Result};
use crate::segmentation::{SegmentationMap, UNKNOWN};

/// Classification accuracy in percent: correctly predicted / total * 100.
pub fn accuracy_percent(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != truth.len() {
        return Err(Error::Data(format!(
            "accuracy needs matching non-empty inputs ({} vs {})",
            predictions.len(),
            truth.len()
        )));
    }
    let correct = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(100.0 * correct as f64 / predictions.len() as f64)
}

/// Feature-level error rate in percent: `100 - accuracy`.
pub fn feature_error_rate(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(100.0 - accuracy_percent(predictions, truth)?)
}

/// One row of the evaluation tables: per-image error rates with their mean
/// and sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub row_label: String,
    pub rates: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl EvalReport {
    pub fn new(row_label: impl Into<String>, rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Data("report needs at least one image".into()));
        }
        let (mean, std) = mean_and_sample_std(&rates);
        Ok(Self {
            row_label: row_label.into(),
            rates,
            mean,
            std,
        })
    }

    /// CSV rows mirroring the result tables: label, per-image rates, mean,
    /// std; values at full precision.
    pub fn csv_header(images: usize) -> String {
        let mut out = String::from("label");
        for i in 1..=images {
            write!(out, ",img{i:02}").expect("string write");
        }
        out.push_str(",mean,std\n");
        out
    }

    pub fn csv_row(&self) -> String {
        let mut out = self.row_label.clone();
        for r in &self.rates {
            write!(out, ",{r}").expect("string write");
        }
        write!(out, ",{},{}", self.mean, self.std).expect("string write");
        out.push('\n');
        out
    }

    /// Aligned text row, two decimals, `mean +- std` at the end.
    pub fn text_row(&self, label_width: usize) -> String {
        let mut out = format!("{:<label_width$}", self.row_label);
        for r in &self.rates {
            write!(out, " {r:>6.2}").expect("string write");
        }
        write!(out, "  {:.2}+-{:.2}", self.mean, self.std).expect("string write");
        out
    }
}

/// Mean and sample (n-1) standard deviation; a single value has std 0 by
/// convention.
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pixel-level counterpart: error rate over pixels where both the mask is
/// labeled and the segmentation committed, plus the coverage (fraction of
/// labeled pixels that are not UNKNOWN).
pub fn pixel_error_rate(seg: &SegmentationMap, mask: &LabelMask) -> Result<(f64, f64)> {
    if seg.width != mask.width || seg.height != mask.height {
        return Err(Error::DimensionMismatch {
            expected: mask.width * mask.height,
            got: seg.width * seg.height,
        });
    }
    let mut labeled = 0usize;
    let mut overlap = 0usize;
    let mut wrong = 0usize;
    for (s, m) in seg.labels.iter().zip(&mask.labels) {
        if *m == IGNORE {
            continue;
        }
        labeled += 1;
        if *s == UNKNOWN {
            continue;
        }
        overlap += 1;
        if s != m {
            wrong += 1;
        }
    }
    if overlap == 0 {
        return Err(Error::NoValidOverlap);
    }
    let error = 100.0 * wrong as f64 / overlap as f64;
    let coverage = overlap as f64 / labeled as f64;
    Ok((error, coverage))
}
