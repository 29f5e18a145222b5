//! Resilient propagation: per-weight adaptive step sizes driven by gradient
//! signs only.

use super::gradient::gradient;
use super::MlpModel;
use crate::error::Result;

/// Per-weight update values and the previous gradient signs.
#[derive(Debug, Clone)]
pub struct RpropState {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    deltas: Vec<Vec<f64>>,
    prev_grad: Vec<Vec<f64>>,
}

impl RpropState {
    /// Riedmiller's published defaults: eta+ 1.2, eta- 0.5, delta0 0.1,
    /// bounds [1e-6, 50].
    pub fn new(model: &MlpModel) -> Self {
        Self::with_params(model, 1.2, 0.5, 0.1, 1e-6, 50.0)
    }

    pub fn with_params(
        model: &MlpModel,
        eta_plus: f64,
        eta_minus: f64,
        delta0: f64,
        delta_min: f64,
        delta_max: f64,
    ) -> Self {
        assert!(eta_minus > 0.0 && eta_minus < 1.0 && eta_plus > 1.0);
        assert!(delta_min <= delta0 && delta0 <= delta_max);
        Self {
            eta_plus,
            eta_minus,
            delta_min,
            delta_max,
            deltas: model.weights.iter().map(|w| vec![delta0; w.len()]).collect(),
            prev_grad: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
        }
    }

    pub fn deltas(&self) -> &[Vec<f64>] {
        &self.deltas
    }
}

/// One full-batch epoch. Per weight: a gradient sign flip shrinks the update
/// value by eta- and clears the gradient memory (so the weight rests this
/// epoch); a retained sign grows it by eta+; the weight then moves against
/// the current gradient sign by the update value. Returns the batch error
/// measured before the update.
pub fn rprop_epoch(
    model: &mut MlpModel,
    state: &mut RpropState,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<f64> {
    let (grads, error) = gradient(model, inputs, targets)?;
    for l in 0..model.weights.len() {
        let weights = &mut model.weights[l];
        let deltas = &mut state.deltas[l];
        let prev = &mut state.prev_grad[l];
        for i in 0..weights.len() {
            let mut g = grads[l][i];
            let sign_product = g * prev[i];
            if sign_product > 0.0 {
                deltas[i] = (deltas[i] * state.eta_plus).min(state.delta_max);
            } else if sign_product < 0.0 {
                deltas[i] = (deltas[i] * state.eta_minus).max(state.delta_min);
                g = 0.0;
            }
            if g > 0.0 {
                weights[i] -= deltas[i];
            } else if g < 0.0 {
                weights[i] += deltas[i];
            }
            prev[i] = g;
        }
    }
    Ok(error)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// XOR-style task with +-1 coding; the shared reference problem for the
    /// two trainers.
    pub(crate) fn xor_batch() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let inputs = vec![
            vec![-1.0, -1.0],
            vec![-1.0, 1.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
        ];
        let targets = vec![vec![-1.0], vec![1.0], vec![1.0], vec![-1.0]];
        (inputs, targets)
    }

    #[test]
    fn same_sign_grows_update_value() {
        // Quadratic error in a single linear weight: the gradient keeps its
        // sign while the weight is far from the optimum.
        let mut model = MlpModel::zeroed(&[1, 1]).unwrap();
        model.weights[0] = vec![10.0, 0.0];
        let inputs = vec![vec![1.0]];
        let targets = vec![vec![0.0]];
        let mut state = RpropState::new(&model);
        let d0 = state.deltas[0][0];
        rprop_epoch(&mut model, &mut state, &inputs, &targets).unwrap();
        // First epoch has no sign history: delta unchanged.
        assert_eq!(state.deltas[0][0], d0);
        rprop_epoch(&mut model, &mut state, &inputs, &targets).unwrap();
        assert!((state.deltas[0][0] - d0 * 1.2).abs() <= 1e-12);
    }

    #[test]
    fn sign_flip_shrinks_update_value() {
        // Start close to the optimum so one step overshoots.
        let mut model = MlpModel::zeroed(&[1, 1]).unwrap();
        model.weights[0] = vec![0.05, 0.0];
        let inputs = vec![vec![1.0]];
        let targets = vec![vec![0.0]];
        let mut state = RpropState::new(&model);
        rprop_epoch(&mut model, &mut state, &inputs, &targets).unwrap();
        // Weight jumped from 0.05 to -0.05: gradient flips next epoch.
        let d_before = state.deltas[0][0];
        rprop_epoch(&mut model, &mut state, &inputs, &targets).unwrap();
        assert!((state.deltas[0][0] - d_before * 0.5).abs() <= 1e-12);
    }

    #[test]
    fn update_values_stay_within_bounds() {
        let (inputs, targets) = xor_batch();
        let mut model = MlpModel::random(&[2, 4, 4, 1], 7).unwrap();
        let mut state = RpropState::new(&model);
        for _ in 0..200 {
            rprop_epoch(&mut model, &mut state, &inputs, &targets).unwrap();
            for layer in state.deltas() {
                for &d in layer {
                    assert!((state.delta_min..=state.delta_max).contains(&d));
                }
            }
        }
    }

    #[test]
    fn rprop_learns_xor() {
        // Reference run: seed 7 reaches error ratio ~3e-11 by epoch 500; the
        // 0.05 factor is the frozen acceptance bound.
        let (inputs, targets) = xor_batch();
        let mut model = MlpModel::random(&[2, 4, 4, 1], 7).unwrap();
        let mut state = RpropState::new(&model);
        let initial = model.batch_error(&inputs, &targets);
        for _ in 0..500 {
            rprop_epoch(&mut model, &mut state, &inputs, &targets).unwrap();
        }
        let final_error = model.batch_error(&inputs, &targets);
        assert!(
            final_error < 0.05 * initial,
            "error {final_error} vs initial {initial}"
        );
    }
}
