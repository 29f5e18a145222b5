//! Multi-layer perceptron with sigmoid hidden layers and linear outputs,
//! trained by resilient propagation or Levenberg-Marquardt.

mod gradient;
pub mod io;
mod lma;
mod rprop;
mod train;

pub use gradient::gradient;
pub use lma::{lma_step, LmaState, LmaStep};
pub use rprop::{rprop_epoch, RpropState};
pub use train::{train, TrainAlgorithm, TrainConfig, TrainingTrace};

use crate::error::{Error, Result};

/// Eq-style hyperbolic sigmoid `2 / (1 + e^(-2x)) - 1`; algebraically equal
/// to tanh(x).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    2.0 / (1.0 + (-2.0 * x).exp()) - 1.0
}

/// Trainable parameter count (weights plus biases) of a layer structure.
pub fn param_count(structure: &[usize]) -> usize {
    structure
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

/// Training provenance stored alongside the weights.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelMeta {
    pub algorithm: String,
    pub seed: u64,
    pub epochs: usize,
}

/// Feed-forward network: `weights[l]` is row-major
/// `structure[l+1] x (structure[l] + 1)` with the bias in the last column.
/// Hidden activations are sigmoid, outputs linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub structure: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub meta: ModelMeta,
}

impl MlpModel {
    /// All-zero weights for the given structure.
    pub fn zeroed(structure: &[usize]) -> Result<Self> {
        if structure.len() < 2 || structure.contains(&0) {
            return Err(Error::Config(format!(
                "invalid layer structure {structure:?}"
            )));
        }
        let weights = structure
            .windows(2)
            .map(|w| vec![0.0; w[1] * (w[0] + 1)])
            .collect();
        Ok(Self {
            structure: structure.to_vec(),
            weights,
            meta: ModelMeta::default(),
        })
    }

    /// Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; keeps
    /// initial activations in the sigmoid's linear regime.
    pub fn random(structure: &[usize], seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        let mut model = Self::zeroed(structure)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for (l, layer) in model.weights.iter_mut().enumerate() {
            let bound = 1.0 / ((structure[l] + 1) as f64).sqrt();
            for w in layer.iter_mut() {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Ok(model)
    }

    pub fn input_dims(&self) -> usize {
        self.structure[0]
    }

    pub fn output_dims(&self) -> usize {
        *self.structure.last().expect("structure is non-empty")
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.structure)
    }

    /// Network output for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dims() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dims(),
                got: x.len(),
            });
        }
        Ok(self.forward_trace(x).pop().expect("at least one layer"))
    }

    /// Activations of every layer, input first, output last.
    pub(crate) fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut activations = Vec::with_capacity(self.structure.len());
        activations.push(x.to_vec());
        for (l, layer) in self.weights.iter().enumerate() {
            let fan_in = self.structure[l];
            let fan_out = self.structure[l + 1];
            let prev = &activations[l];
            let last_layer = l + 1 == self.structure.len() - 1;
            let mut out = vec![0.0; fan_out];
            for (row, o) in out.iter_mut().enumerate() {
                let w = &layer[row * (fan_in + 1)..(row + 1) * (fan_in + 1)];
                let mut u = w[fan_in]; // bias input fixed at 1
                for (wi, ai) in w[..fan_in].iter().zip(prev) {
                    u += wi * ai;
                }
                *o = if last_layer { u } else { sigmoid(u) };
            }
            activations.push(out);
        }
        activations
    }

    /// Predicted class (argmax of the outputs, ties to the lowest index) and
    /// the output vector with negatives clamped to zero, ready for
    /// likelihood splatting.
    pub fn classify(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let y = self.forward(x)?;
        let class = argmax(&y);
        let scores = y.into_iter().map(|v| v.max(0.0)).collect();
        Ok((class, scores))
    }

    /// Sum-of-squares error over a batch of (input, target) pairs.
    pub fn batch_error(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let y = self.forward_trace(x).pop().expect("output layer");
                y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum()
    }
}

/// Index of the largest component; ties resolve to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Class targets as m-dimensional vectors: 1 at the class index, -1
/// elsewhere.
pub fn encode_target(class: usize, class_count: usize) -> Vec<f64> {
    let mut t = vec![-1.0; class_count];
    t[class] = 1.0;
    t
}
