//! Levenberg-Marquardt training step: Gauss-Newton with an adaptive
//! isotropic damping term.

use nalgebra::{DMatrix, DVector};

use super::gradient::accumulate;
use super::MlpModel;
use crate::error::{Error, Result};

/// Damping schedule. The damping parameter grows by `increase_factor` on a
/// rejected step and shrinks by `decrease_factor` on an accepted one.
#[derive(Debug, Clone)]
pub struct LmaState {
    pub nu: f64,
    pub increase_factor: f64,
    pub decrease_factor: f64,
    pub nu_max: f64,
    pub nu_min: f64,
}

impl Default for LmaState {
    fn default() -> Self {
        Self {
            nu: 1e-2,
            increase_factor: 10.0,
            decrease_factor: 10.0,
            nu_max: 1e10,
            nu_min: 1e-12,
        }
    }
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct LmaStep {
    pub error_before: f64,
    pub error_after: f64,
    pub rejected_candidates: usize,
}

/// Flatten per-layer gradient blocks into one parameter vector.
fn flatten(blocks: &[Vec<f64>], out: &mut [f64]) {
    let mut offset = 0;
    for block in blocks {
        out[offset..offset + block.len()].copy_from_slice(block);
        offset += block.len();
    }
}

/// Residual vector (one entry per sample and output), its squared norm, and
/// the Gauss-Newton system pieces JtJ and Jte, built row by row with
/// per-output backpropagation.
fn build_normal_system(
    model: &MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    let n = model.param_count();
    let m = model.output_dims();
    let mut jtj = DMatrix::<f64>::zeros(n, n);
    let mut jte = DVector::<f64>::zeros(n);
    let mut error = 0.0;
    let mut row = vec![0.0; n];
    let mut blocks: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();

    for (x, t) in inputs.iter().zip(targets) {
        if x.len() != model.input_dims() || t.len() != m {
            return Err(Error::DimensionMismatch {
                expected: model.input_dims(),
                got: x.len(),
            });
        }
        let activations = model.forward_trace(x);
        let output = activations.last().expect("output layer");
        for l in 0..m {
            let residual = output[l] - t[l];
            error += residual * residual;
            for block in &mut blocks {
                block.iter_mut().for_each(|v| *v = 0.0);
            }
            // Jacobian row: derivative of this output w.r.t. every weight.
            let mut selector = vec![0.0; m];
            selector[l] = 1.0;
            accumulate(model, &activations, selector, &mut blocks);
            flatten(&blocks, &mut row);
            for (i, &ri) in row.iter().enumerate() {
                if ri == 0.0 {
                    continue;
                }
                jte[i] += ri * residual;
                for (j, &rj) in row.iter().enumerate().skip(i) {
                    jtj[(i, j)] += ri * rj;
                }
            }
        }
    }
    // Mirror the upper triangle.
    for i in 0..n {
        for j in 0..i {
            jtj[(i, j)] = jtj[(j, i)];
        }
    }
    Ok((jtj, jte, error))
}

fn apply_step(model: &MlpModel, step: &DVector<f64>) -> MlpModel {
    let mut next = model.clone();
    let mut offset = 0;
    for layer in &mut next.weights {
        for w in layer.iter_mut() {
            *w += step[offset];
            offset += 1;
        }
    }
    next
}

/// One Levenberg-Marquardt iteration: solve (JtJ + nu I) p = -Jte and accept
/// the first candidate that lowers the batch error, raising nu after each
/// rejection. Fails with [`Error::LmaDampingExhausted`] when no damping up
/// to `nu_max` produces a decrease.
pub fn lma_step(
    model: &mut MlpModel,
    state: &mut LmaState,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<LmaStep> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Data("LMA needs a non-empty batch".into()));
    }
    let n = model.param_count();
    let (jtj, jte, error_before) = build_normal_system(model, inputs, targets)?;
    let mut rejected = 0;
    loop {
        let mut system = jtj.clone();
        for i in 0..n {
            system[(i, i)] += state.nu;
        }
        let solved = nalgebra::linalg::Cholesky::new(system).map(|c| c.solve(&(-&jte)));
        if let Some(step) = solved {
            let candidate = apply_step(model, &step);
            let error_after = candidate.batch_error(inputs, targets);
            if error_after.is_finite() && error_after < error_before {
                *model = candidate;
                state.nu = (state.nu / state.decrease_factor).max(state.nu_min);
                return Ok(LmaStep {
                    error_before,
                    error_after,
                    rejected_candidates: rejected,
                });
            }
        }
        rejected += 1;
        state.nu *= state.increase_factor;
        if state.nu > state.nu_max {
            return Err(Error::LmaDampingExhausted);
        }
    }
}
