//! Dimensionality reduction for feature-space visualization: PCA and a
//! bottleneck autoencoder built on the perceptron machinery.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mlp::{rprop_epoch, MlpModel, RpropState};

/// Principal components of a sample cloud.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Top-q orthonormal basis vectors, strongest first.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the sample covariance, sorted descending.
    pub explained_variance: Vec<f64>,
}

/// Fit the top-q principal components of the sample covariance.
pub fn pca_fit(samples: &[Vec<f64>], q: usize) -> Result<PcaModel> {
    let n = samples.len();
    if n < q + 1 {
        return Err(Error::Data(format!(
            "PCA needs at least {} samples for q = {q}, got {n}",
            q + 1
        )));
    }
    let d = samples[0].len();
    if d < q {
        return Err(Error::Data(format!(
            "cannot extract {q} components from {d}-dimensional data"
        )));
    }
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::Data("samples have mixed dimensions".into()));
    }

    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for s in samples {
        let centered = DVector::from_iterator(d, s.iter().zip(&mean).map(|(v, m)| v - m));
        cov.syger(1.0, &centered, &centered, 1.0);
    }
    cov /= (n - 1) as f64;
    // syger fills the lower triangle; mirror it.
    for i in 0..d {
        for j in i + 1..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }

    let eigen = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let mut components = Vec::with_capacity(q);
    let mut explained = Vec::with_capacity(q);
    for &idx in order.iter().take(q) {
        let mut component: Vec<f64> = eigen.eigenvectors.column(idx).iter().copied().collect();
        // Canonical sign: the entry of largest magnitude is positive.
        let lead = component
            .iter()
            .cloned()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if lead < 0.0 {
            component.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(component);
        explained.push(eigen.eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: explained,
    })
}

/// Centered projection onto the fitted components.
pub fn pca_transform(model: &PcaModel, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = model.mean.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    Ok(samples
        .par_iter()
        .map(|s| {
            model
                .components
                .iter()
                .map(|c| {
                    c.iter()
                        .zip(s.iter().zip(&model.mean))
                        .map(|(ci, (v, m))| ci * (v - m))
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Reconstruct from the projection: mean + sum of coordinate * component.
pub fn pca_reconstruct(model: &PcaModel, projected: &[Vec<f64>]) -> Vec<Vec<f64>> {
    projected
        .iter()
        .map(|p| {
            let mut out = model.mean.clone();
            for (coord, component) in p.iter().zip(&model.components) {
                for (o, c) in out.iter_mut().zip(component) {
                    *o += coord * c;
                }
            }
            out
        })
        .collect()
}

/// Autoencoding perceptron d-hidden-d; the hidden activations are the
/// reduced coordinates.
#[derive(Debug, Clone)]
pub struct BottleneckModel {
    pub mlp: MlpModel,
}

impl BottleneckModel {
    /// Hidden-layer activations for one input.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mlp.input_dims() {
            return Err(Error::DimensionMismatch {
                expected: self.mlp.input_dims(),
                got: x.len(),
            });
        }
        let mut trace = self.mlp.forward_trace(x);
        Ok(trace.swap_remove(1))
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.mlp.forward(x)
    }

    /// Mean squared reconstruction error per sample.
    pub fn reconstruction_error(&self, samples: &[Vec<f64>]) -> f64 {
        self.mlp.batch_error(samples, samples) / samples.len().max(1) as f64
    }
}

/// Train a d-hidden-d autoencoder with resilient propagation, inputs as
/// targets. The best weights seen during training are returned, so the
/// reported reconstruction error never exceeds the initial one.
pub fn bottleneck_fit(
    samples: &[Vec<f64>],
    hidden: usize,
    epochs: usize,
    seed: u64,
) -> Result<BottleneckModel> {
    let d = samples.first().map(Vec::len).ok_or_else(|| {
        Error::Data("bottleneck training needs at least one sample".into())
    })?;
    if hidden > d.max(1) {
        return Err(Error::Config(format!(
            "hidden width {hidden} exceeds input dimension {d}"
        )));
    }
    if hidden == 0 {
        return Err(Error::Config("hidden width must be >= 1".into()));
    }
    let mut model = MlpModel::random(&[d, hidden, d], seed)?;
    let mut state = RpropState::new(&model);
    let inputs = samples.to_vec();
    let mut best = model.clone();
    let mut best_error = model.batch_error(&inputs, &inputs);
    for _ in 0..epochs {
        rprop_epoch(&mut model, &mut state, &inputs, &inputs)?;
        let error = model.batch_error(&inputs, &inputs);
        if error < best_error {
            best_error = error;
            best = model.clone();
        }
    }
    Ok(BottleneckModel { mlp: best })
}
