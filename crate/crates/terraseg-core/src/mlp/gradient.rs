//! Backpropagation of the sum-of-squares error.

use super::{MlpModel, Result};
use crate::error::Error;

/// Exact gradient of `sum_i sum_l (y_l(x_i) - t_il)^2` over the batch, one
/// row-major block per weight matrix, plus the batch error itself.
pub fn gradient(
    model: &MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, f64)> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Data("gradient needs a non-empty batch".into()));
    }
    let mut grads: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut error = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        if x.len() != model.input_dims() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dims(),
                got: x.len(),
            });
        }
        if t.len() != model.output_dims() {
            return Err(Error::DimensionMismatch {
                expected: model.output_dims(),
                got: t.len(),
            });
        }
        let activations = model.forward_trace(x);
        let output = activations.last().expect("output layer");
        error += output
            .iter()
            .zip(t)
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>();
        // d(error)/d(output) for the squared loss; outputs are linear.
        let delta: Vec<f64> = output.iter().zip(t).map(|(y, t)| 2.0 * (y - t)).collect();
        accumulate(model, &activations, delta, &mut grads);
    }
    Ok((grads, error))
}

/// Backpropagate `delta` (gradient at the linear output) through the network
/// and add the per-weight contributions to `grads`. Shared with the LMA
/// Jacobian builder, which passes per-output selector deltas instead.
pub(crate) fn accumulate(
    model: &MlpModel,
    activations: &[Vec<f64>],
    mut delta: Vec<f64>,
    grads: &mut [Vec<f64>],
) {
    for l in (0..model.weights.len()).rev() {
        let fan_in = model.structure[l];
        let prev = &activations[l];
        let grad = &mut grads[l];
        for (row, d) in delta.iter().enumerate() {
            let base = row * (fan_in + 1);
            for (col, a) in prev.iter().enumerate() {
                grad[base + col] += d * a;
            }
            grad[base + fan_in] += d; // bias input is 1
        }
        if l == 0 {
            break;
        }
        // delta for the previous (sigmoid) layer.
        let mut next = vec![0.0; fan_in];
        let layer = &model.weights[l];
        for (row, d) in delta.iter().enumerate() {
            let base = row * (fan_in + 1);
            for (col, n) in next.iter_mut().enumerate() {
                *n += layer[base + col] * d;
            }
        }
        for (n, a) in next.iter_mut().zip(prev) {
            *n *= 1.0 - a * a; // derivative of the hyperbolic sigmoid
        }
        delta = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(
        rng: &mut ChaCha8Rng,
        n: usize,
        d: usize,
        m: usize,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let inputs = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets = (0..n)
            .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        (inputs, targets)
    }

    /// Central finite differences of the batch error, the independent
    /// oracle for the analytic gradient.
    fn finite_difference(
        model: &MlpModel,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        step: f64,
    ) -> Vec<Vec<f64>> {
        let mut grads = Vec::new();
        for l in 0..model.weights.len() {
            let mut layer = vec![0.0; model.weights[l].len()];
            for i in 0..layer.len() {
                let mut plus = model.clone();
                plus.weights[l][i] += step;
                let mut minus = model.clone();
                minus.weights[l][i] -= step;
                layer[i] = (plus.batch_error(inputs, targets)
                    - minus.batch_error(inputs, targets))
                    / (2.0 * step);
            }
            grads.push(layer);
        }
        grads
    }

    #[test]
    fn zero_error_batch_has_zero_gradient() {
        let model = MlpModel::random(&[3, 4, 4, 2], 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (inputs, _) = random_batch(&mut rng, 5, 3, 2);
        // Targets equal to the outputs: residuals vanish identically.
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| model.forward(x).unwrap()).collect();
        let (grads, error) = gradient(&model, &inputs, &targets).unwrap();
        assert_eq!(error, 0.0);
        for layer in grads {
            assert!(layer.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for structure in [vec![2, 3, 1], vec![6, 5, 5, 3], vec![3, 2]] {
            let model = MlpModel::random(&structure, rng.gen()).unwrap();
            let (inputs, targets) =
                random_batch(&mut rng, 4, structure[0], *structure.last().unwrap());
            let (analytic, _) = gradient(&model, &inputs, &targets).unwrap();
            let numeric = finite_difference(&model, &inputs, &targets, 1e-5);
            for (a_layer, n_layer) in analytic.iter().zip(&numeric) {
                for (&a, &n) in a_layer.iter().zip(n_layer) {
                    // Components near zero are compared absolutely; the
                    // floor matches the finite-difference noise level.
                    let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
                    assert!(rel <= 1e-6, "structure {structure:?}: {a} vs {n}");
                }
            }
        }
    }

    #[test]
    fn duplicated_batch_doubles_the_gradient() {
        let model = MlpModel::random(&[4, 3, 2], 31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let (inputs, targets) = random_batch(&mut rng, 6, 4, 2);
        let (g1, e1) = gradient(&model, &inputs, &targets).unwrap();
        let doubled_inputs: Vec<Vec<f64>> =
            inputs.iter().chain(inputs.iter()).cloned().collect();
        let doubled_targets: Vec<Vec<f64>> =
            targets.iter().chain(targets.iter()).cloned().collect();
        let (g2, e2) = gradient(&model, &doubled_inputs, &doubled_targets).unwrap();
        assert!((e2 - 2.0 * e1).abs() <= 1e-12 * e1.abs().max(1.0));
        for (l1, l2) in g1.iter().zip(&g2) {
            for (&a, &b) in l1.iter().zip(l2) {
                assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gradient_rejects_empty_batch() {
        let model = MlpModel::zeroed(&[2, 2]).unwrap();
        assert!(gradient(&model, &[], &[]).is_err());
    }
}
