//! Two-coordinate working-set solver (maximal violating pair) for the soft
//! margin kernel SVM dual.
//!
//! Internally the multipliers are the non-negative `a_i` with constraints
//! `0 <= a_i <= C` and `sum a_i y_i = 0`; the stored model coefficients are
//! the signed `a_i y_i`. Every pairwise update transfers an amount that is
//! quantized to a dyadic grid, so all multipliers stay exact multiples of
//! the grid and the equality constraint holds exactly, not just to rounding.

use std::collections::HashMap;

use super::{rbf_kernel, BinarySvm};
use crate::error::{Error, Result};

/// Update quantum. With C <= 2^7 and n <= 10^5 every multiplier and every
/// partial sum stays an exact integer multiple of GRID in f64.
const GRID: f64 = 1.0 / (1u64 << 30) as f64;

#[derive(Debug, Clone)]
pub struct SmoConfig {
    pub tol: f64,
    pub max_iterations: usize,
    /// Kernel cache budget in bytes; the full Gram matrix is precomputed
    /// when it fits, otherwise rows are cached with LRU eviction.
    pub cache_bytes: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iterations: 10_000_000,
            cache_bytes: 256 << 20,
        }
    }
}

/// Diagnostics for tests and reporting; `alpha` holds the non-negative
/// multipliers for every training point.
#[derive(Debug, Clone)]
pub struct SmoReport {
    pub alpha: Vec<f64>,
    pub iterations: usize,
    /// Final maximal-violating-pair gap.
    pub gap: f64,
    /// Dual objective value at the solution.
    pub dual_objective: f64,
}

struct KernelCache<'a> {
    xs: &'a [Vec<f64>],
    gamma: f64,
    full: Option<Vec<f64>>,
    rows: HashMap<usize, (u64, Vec<f64>)>,
    capacity: usize,
    tick: u64,
}

impl<'a> KernelCache<'a> {
    fn new(xs: &'a [Vec<f64>], gamma: f64, budget: usize) -> Self {
        let n = xs.len();
        let full = if n * n * 8 <= budget {
            let mut gram = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let k = rbf_kernel(&xs[i], &xs[j], gamma).expect("uniform dims");
                    gram[i * n + j] = k;
                    gram[j * n + i] = k;
                }
            }
            Some(gram)
        } else {
            None
        };
        let capacity = (budget / (n.max(1) * 8)).max(2);
        Self {
            xs,
            gamma,
            full,
            rows: HashMap::new(),
            capacity,
            tick: 0,
        }
    }

    fn row_into(&mut self, i: usize, out: &mut Vec<f64>) {
        let n = self.xs.len();
        if let Some(gram) = &self.full {
            out.clear();
            out.extend_from_slice(&gram[i * n..(i + 1) * n]);
            return;
        }
        self.tick += 1;
        if let Some((t, row)) = self.rows.get_mut(&i) {
            *t = self.tick;
            out.clear();
            out.extend_from_slice(row);
            return;
        }
        let row: Vec<f64> = (0..n)
            .map(|j| rbf_kernel(&self.xs[i], &self.xs[j], self.gamma).expect("uniform dims"))
            .collect();
        out.clear();
        out.extend_from_slice(&row);
        if self.rows.len() >= self.capacity {
            if let Some((&oldest, _)) = self.rows.iter().min_by_key(|(_, (t, _))| *t) {
                self.rows.remove(&oldest);
            }
        }
        self.rows.insert(i, (self.tick, row));
    }
}

fn snap_down(value: f64) -> f64 {
    (value / GRID).floor() * GRID
}

fn quantize(value: f64) -> f64 {
    (value / GRID).round() * GRID
}

/// Train a binary machine on labels in {-1, +1}. Returns both the model and
/// solver diagnostics.
pub fn smo_train_detailed(
    xs: &[Vec<f64>],
    ys: &[f64],
    gamma: f64,
    c: f64,
    cfg: &SmoConfig,
) -> Result<(BinarySvm, SmoReport)> {
    let n = xs.len();
    if n == 0 || ys.len() != n {
        return Err(Error::Data("SMO needs matching inputs and labels".into()));
    }
    if ys.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Data("SMO labels must be +1 or -1".into()));
    }
    if !ys.contains(&1.0) || !ys.iter().any(|&y| y == -1.0) {
        return Err(Error::DegenerateBinaryProblem);
    }
    if gamma <= 0.0 || c <= 0.0 || cfg.tol <= 0.0 {
        return Err(Error::Config("gamma, C and tol must be positive".into()));
    }
    let dims = xs[0].len();
    if xs.iter().any(|x| x.len() != dims) {
        return Err(Error::Data("descriptors have mixed dimensions".into()));
    }

    // Effective box bound on the dyadic grid.
    let c_grid = snap_down(c).max(GRID);
    let mut cache = KernelCache::new(xs, gamma, cfg.cache_bytes);
    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective; -1 at alpha = 0.
    let mut grad = vec![-1.0; n];
    let mut row_i = Vec::with_capacity(n);
    let mut row_j = Vec::with_capacity(n);

    let mut iterations = 0;
    let gap = loop {
        // Maximal violating pair.
        let mut up_value = f64::NEG_INFINITY;
        let mut up_index = None;
        let mut low_value = f64::INFINITY;
        let mut low_index = None;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            let movable_up = (ys[t] > 0.0 && alpha[t] < c_grid) || (ys[t] < 0.0 && alpha[t] > 0.0);
            let movable_down =
                (ys[t] < 0.0 && alpha[t] < c_grid) || (ys[t] > 0.0 && alpha[t] > 0.0);
            if movable_up && v > up_value {
                up_value = v;
                up_index = Some(t);
            }
            if movable_down && v < low_value {
                low_value = v;
                low_index = Some(t);
            }
        }
        let (Some(i), Some(j)) = (up_index, low_index) else {
            break 0.0; // every multiplier pinned: optimal within the box
        };
        let gap = up_value - low_value;
        if gap <= cfg.tol {
            break gap;
        }
        if iterations >= cfg.max_iterations {
            return Err(Error::SmoNoConvergence {
                iterations,
                violation: gap,
                tol: cfg.tol,
            });
        }
        iterations += 1;

        cache.row_into(i, &mut row_i);
        cache.row_into(j, &mut row_j);
        let eta = (row_i[i] + row_j[j] - 2.0 * row_i[j]).max(1e-12);

        // Transfer t >= 0 moves a_i along +y_i and a_j along -y_j, keeping
        // sum(a y) constant exactly.
        let upper_i = if ys[i] > 0.0 { c_grid - alpha[i] } else { alpha[i] };
        let upper_j = if ys[j] > 0.0 { alpha[j] } else { c_grid - alpha[j] };
        let t_max = upper_i.min(upper_j);
        let t = quantize((gap / eta).min(t_max)).min(t_max).max(0.0);
        if t == 0.0 {
            // Quantization floor reached; the residual violation is far
            // below any meaningful tolerance.
            break gap;
        }
        alpha[i] += ys[i] * t;
        alpha[j] -= ys[j] * t;
        for p in 0..n {
            grad[p] += ys[p] * t * (row_i[p] - row_j[p]);
        }
    };

    // Bias from the free support vectors, else from the bound midpoint.
    let mut b_sum = 0.0;
    let mut b_count = 0usize;
    for t in 0..n {
        if alpha[t] > 0.0 && alpha[t] < c_grid {
            b_sum += -ys[t] * grad[t];
            b_count += 1;
        }
    }
    let bias = if b_count > 0 {
        b_sum / b_count as f64
    } else {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if (ys[t] > 0.0 && alpha[t] < c_grid) || (ys[t] < 0.0 && alpha[t] > 0.0) {
                hi = hi.max(v);
            }
            if (ys[t] < 0.0 && alpha[t] < c_grid) || (ys[t] > 0.0 && alpha[t] > 0.0) {
                lo = lo.min(v);
            }
        }
        if hi.is_finite() && lo.is_finite() {
            (hi + lo) / 2.0
        } else {
            0.0
        }
    };

    // D(a) = 1/2 a'Qa - sum a = 1/2 sum a (grad - 1).
    let dual_objective = 0.5
        * alpha
            .iter()
            .zip(&grad)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>();

    let mut vectors = Vec::new();
    let mut coefficients = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            vectors.push(xs[t].clone());
            coefficients.push(alpha[t] * ys[t]);
        }
    }
    let svm = BinarySvm {
        gamma,
        c,
        bias,
        vectors,
        coefficients,
    };
    Ok((
        svm,
        SmoReport {
            alpha,
            iterations,
            gap,
            dual_objective,
        },
    ))
}

/// KKT-approximate solution of the dual for labels in {-1, +1}.
pub fn smo_train(xs: &[Vec<f64>], ys: &[f64], gamma: f64, c: f64, tol: f64) -> Result<BinarySvm> {
    let cfg = SmoConfig {
        tol,
        ..SmoConfig::default()
    };
    smo_train_detailed(xs, ys, gamma, c, &cfg).map(|(svm, _)| svm)
}

/// Largest per-point KKT violation of a trained machine against its
/// training data.
pub fn kkt_violation(svm: &BinarySvm, xs: &[Vec<f64>], ys: &[f64], alpha: &[f64]) -> f64 {
    let c_grid = snap_down(svm.c).max(GRID);
    let mut worst = 0.0f64;
    for ((x, &y), &a) in xs.iter().zip(ys).zip(alpha) {
        let margin = y * svm.decision(x).expect("uniform dims");
        let violation = if a == 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= c_grid {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(violation);
    }
    worst
}
