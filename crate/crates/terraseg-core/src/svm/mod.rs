//! Soft-margin RBF kernel SVM with one-vs-one multiclass voting.

mod grid;
pub mod io;
mod smo;

pub use grid::{grid_search, GridEval, GridSearchConfig, GridSearchReport};
pub use smo::{kkt_violation, smo_train, smo_train_detailed, SmoConfig, SmoReport};

use rayon::prelude::*;

use crate::dataset::LabeledFeatureSet;
use crate::error::{Error, Result};

/// RBF kernel `exp(-gamma |x - x'|^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * sq).exp())
}

/// One trained binary machine: support vectors with signed coefficients
/// `a_i y_i` and the bias, so the decision reads
/// `f(x) = sum_i coef_i K(v_i, x) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub gamma: f64,
    pub c: f64,
    pub bias: f64,
    pub vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
}

impl BinarySvm {
    /// Signed decision value; the sign picks the class.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        let mut f = self.bias;
        for (v, coef) in self.vectors.iter().zip(&self.coefficients) {
            f += coef * rbf_kernel(v, x, self.gamma)?;
        }
        Ok(f)
    }
}

/// One-vs-one multiclass model: one binary machine per unordered class
/// pair, trained on just those two classes.
#[derive(Debug, Clone)]
pub struct OvoModel {
    pub class_count: usize,
    pub gamma: f64,
    pub c: f64,
    /// Machines keyed by (low, high) class pair; the low class plays +1.
    pub machines: Vec<((usize, usize), BinarySvm)>,
    pub class_names: Vec<String>,
}

/// Train the k(k-1)/2 pairwise machines.
pub fn ovo_train(
    set: &LabeledFeatureSet,
    gamma: f64,
    c: f64,
    smo: &SmoConfig,
    class_names: Vec<String>,
) -> Result<OvoModel> {
    let k = set.class_count;
    if k < 2 {
        return Err(Error::Config("one-vs-one needs at least 2 classes".into()));
    }
    let counts = set.class_counts();
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(empty));
    }
    if class_names.len() != k {
        return Err(Error::Config(format!(
            "{} class names for {k} classes",
            class_names.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| ((a + 1)..k).map(move |b| (a, b)))
        .collect();
    let machines: Vec<((usize, usize), BinarySvm)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (f, &label) in set.features.iter().zip(&set.labels) {
                if label == a {
                    xs.push(f.descriptor.values.clone());
                    ys.push(1.0);
                } else if label == b {
                    xs.push(f.descriptor.values.clone());
                    ys.push(-1.0);
                }
            }
            let (svm, _) = smo_train_detailed(&xs, &ys, gamma, c, smo)?;
            Ok(((a, b), svm))
        })
        .collect::<Result<_>>()?;
    Ok(OvoModel {
        class_count: k,
        gamma,
        c,
        machines,
        class_names,
    })
}

/// Logistic squashing of a decision value into (0, 1).
fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl OvoModel {
    /// Vote among all machines. Returns the winning class, the raw vote
    /// counts, and normalized soft scores. Vote ties break on the summed
    /// absolute decision values over the tied classes' machines, then on
    /// the lowest class index.
    ///
    /// Soft scores blend the vote count with the mean logistic-squashed
    /// decision value of each class's machines; the vote term dominates so
    /// the soft argmax always agrees with an untied vote.
    pub fn classify(&self, x: &[f64]) -> Result<(usize, Vec<usize>, Vec<f64>)> {
        let k = self.class_count;
        let mut votes = vec![0usize; k];
        let mut abs_sum = vec![0.0; k];
        let mut logistic_sum = vec![0.0; k];
        for ((a, b), svm) in &self.machines {
            let f = svm.decision(x)?;
            let winner = if f > 0.0 { *a } else { *b };
            votes[winner] += 1;
            abs_sum[*a] += f.abs();
            abs_sum[*b] += f.abs();
            logistic_sum[*a] += logistic(f);
            logistic_sum[*b] += logistic(-f);
        }
        let top = *votes.iter().max().expect("k >= 2");
        let class = (0..k)
            .filter(|&c| votes[c] == top)
            .max_by(|&p, &q| abs_sum[p].total_cmp(&abs_sum[q]).then(q.cmp(&p)))
            .expect("at least one class");

        let per_class_machines = (k - 1) as f64;
        let raw: Vec<f64> = (0..k)
            .map(|c| votes[c] as f64 + logistic_sum[c] / per_class_machines)
            .collect();
        let total: f64 = raw.iter().sum();
        let soft = raw.iter().map(|v| v / total).collect();
        Ok((class, votes, soft))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Descriptor, DescriptorVariant, Feature, InterestPoint};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set_from(descriptors: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> LabeledFeatureSet {
        let features = descriptors
            .into_iter()
            .map(|values| Feature {
                point: InterestPoint {
                    x: 0.0,
                    y: 0.0,
                    scale: 1.0,
                    strength: 1.0,
                    orientation: 0.0,
                },
                descriptor: Descriptor {
                    variant: DescriptorVariant::USurf36,
                    values,
                },
            })
            .collect();
        LabeledFeatureSet::new(features, labels, classes).unwrap()
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("class{i}")).collect()
    }

    /// Three tight, well-separated 2-D clusters.
    fn three_cluster_set(per_class: usize, seed: u64) -> LabeledFeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]];
        let mut descriptors = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                descriptors.push(vec![
                    center[0] + rng.gen_range(-0.4..0.4),
                    center[1] + rng.gen_range(-0.4..0.4),
                ]);
                labels.push(c);
            }
        }
        set_from(descriptors, labels, 3)
    }

    #[test]
    fn rbf_kernel_basics() {
        let x = vec![0.3, -0.7, 1.1];
        assert_eq!(rbf_kernel(&x, &x, 2.0).unwrap(), 1.0);
        let y = vec![0.0, 0.0, 1.1];
        assert_eq!(
            rbf_kernel(&x, &y, 0.7).unwrap(),
            rbf_kernel(&y, &x, 0.7).unwrap()
        );
        // gamma 1, squared distance 1 -> e^-1.
        let a = vec![0.0];
        let b = vec![1.0];
        assert!((rbf_kernel(&a, &b, 1.0).unwrap() - (-1.0f64).exp()).abs() <= 1e-12);
        assert!((rbf_kernel(&a, &b, 1.0).unwrap() - 0.36788).abs() <= 1e-5);
    }

    #[test]
    fn rbf_kernel_rejects_dimension_mismatch() {
        assert!(rbf_kernel(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn margin_support_vector_sits_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(96);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..15 {
            xs.push(vec![rng.gen_range(-1.0..0.0)]);
            ys.push(1.0);
            xs.push(vec![rng.gen_range(1.0..2.0)]);
            ys.push(-1.0);
        }
        let tol = 1e-4;
        let cfg = SmoConfig {
            tol,
            ..SmoConfig::default()
        };
        let (svm, report) = smo_train_detailed(&xs, &ys, 1.0, 1e6, &cfg).unwrap();
        // Every unbounded support vector lies on its margin.
        let mut checked = 0;
        for (i, &a) in report.alpha.iter().enumerate() {
            if a > 0.0 {
                let margin = ys[i] * svm.decision(&xs[i]).unwrap();
                assert!((margin - 1.0).abs() <= 10.0 * tol, "margin {margin}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn decision_respects_lipschitz_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let gamma = 1.3;
        let svm = smo_train(&xs, &ys, gamma, 5.0, 1e-3).unwrap();
        // |grad K| <= sqrt(2 gamma / e) for the RBF kernel.
        let lipschitz = svm.coefficients.iter().map(|c| c.abs()).sum::<f64>()
            * (2.0 * gamma / std::f64::consts::E).sqrt();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let delta: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.01..0.01)).collect();
            let moved: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
            let df = (svm.decision(&moved).unwrap() - svm.decision(&x).unwrap()).abs();
            let dn = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            assert!(df <= lipschitz * dn + 1e-12, "df {df} vs bound {}", lipschitz * dn);
        }
    }

    #[test]
    fn ovo_machine_count_is_k_choose_2() {
        for k in 2..=10usize {
            let mut descriptors = Vec::new();
            let mut labels = Vec::new();
            for c in 0..k {
                for i in 0..3 {
                    descriptors.push(vec![c as f64 * 3.0, i as f64 * 0.1]);
                    labels.push(c);
                }
            }
            let set = set_from(descriptors, labels, k);
            let model = ovo_train(&set, 1.0, 10.0, &SmoConfig::default(), names(k)).unwrap();
            assert_eq!(model.machines.len(), k * (k - 1) / 2);
        }
    }

    #[test]
    fn two_class_ovo_equals_plain_smo() {
        let mut rng = ChaCha8Rng::seed_from_u64(98);
        let descriptors: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let set = set_from(descriptors.clone(), labels.clone(), 2);
        let model = ovo_train(&set, 1.0, 2.0, &SmoConfig::default(), names(2)).unwrap();
        assert_eq!(model.machines.len(), 1);
        let ys: Vec<f64> = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
        let direct = smo_train(&descriptors, &ys, 1.0, 2.0, 1e-3).unwrap();
        assert_eq!(model.machines[0].1, direct);
        for _ in 0..20 {
            let q: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (class, _, _) = model.classify(&q).unwrap();
            let expected = usize::from(direct.decision(&q).unwrap() <= 0.0);
            assert_eq!(class, expected);
        }
    }

    #[test]
    fn pairwise_machines_separate_their_own_pairs() {
        let set = three_cluster_set(10, 99);
        let model = ovo_train(&set, 1.0, 50.0, &SmoConfig::default(), names(3)).unwrap();
        for ((a, b), svm) in &model.machines {
            for (f, &label) in set.features.iter().zip(&set.labels) {
                if label == *a {
                    assert!(svm.decision(&f.descriptor.values).unwrap() > 0.0);
                } else if label == *b {
                    assert!(svm.decision(&f.descriptor.values).unwrap() < 0.0);
                }
            }
        }
    }

    #[test]
    fn deep_interior_point_collects_all_votes() {
        let set = three_cluster_set(10, 100);
        let model = ovo_train(&set, 1.0, 50.0, &SmoConfig::default(), names(3)).unwrap();
        let (class, votes, soft) = model.classify(&[0.0, 0.0]).unwrap();
        assert_eq!(class, 0);
        assert_eq!(votes[0], 2); // k - 1 machines involve class 0
        assert!(soft[0] > soft[1] && soft[0] > soft[2]);
    }

    #[test]
    fn vote_recount_matches_brute_force_oracle() {
        let set = three_cluster_set(8, 101);
        let model = ovo_train(&set, 0.7, 20.0, &SmoConfig::default(), names(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        for _ in 0..100 {
            let q = vec![rng.gen_range(-2.0..7.0), rng.gen_range(-2.0..7.0)];
            let (_, votes, _) = model.classify(&q).unwrap();
            // Independent tally.
            let mut expected = vec![0usize; 3];
            for ((a, b), svm) in &model.machines {
                if svm.decision(&q).unwrap() > 0.0 {
                    expected[*a] += 1;
                } else {
                    expected[*b] += 1;
                }
            }
            assert_eq!(votes, expected);
        }
    }

    #[test]
    fn soft_scores_are_normalized_and_follow_votes() {
        let set = three_cluster_set(8, 103);
        let model = ovo_train(&set, 0.7, 20.0, &SmoConfig::default(), names(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        for _ in 0..100 {
            let q = vec![rng.gen_range(-2.0..7.0), rng.gen_range(-2.0..7.0)];
            let (class, votes, soft) = model.classify(&q).unwrap();
            assert!(soft.iter().all(|&s| s >= 0.0));
            assert!((soft.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            let top = *votes.iter().max().unwrap();
            if votes.iter().filter(|&&v| v == top).count() == 1 {
                let soft_best = (0..3)
                    .max_by(|&a, &b| soft[a].total_cmp(&soft[b]))
                    .unwrap();
                assert_eq!(soft_best, class);
            }
        }
    }

    #[test]
    fn empty_class_is_rejected() {
        let set = set_from(vec![vec![0.0], vec![1.0]], vec![0, 2], 3);
        assert!(matches!(
            ovo_train(&set, 1.0, 1.0, &SmoConfig::default(), names(3)),
            Err(Error::EmptyClass(1))
        ));
    }

    #[test]
    fn kernel_gram_matrices_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        for &gamma in &[0.25, 1.0, 8.0] {
            let points: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let gram = DMatrix::from_fn(50, 50, |i, j| {
                rbf_kernel(&points[i], &points[j], gamma).unwrap()
            });
            let eigenvalues = gram.symmetric_eigen().eigenvalues;
            let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8, "gamma {gamma}: min eigenvalue {min}");
        }
    }
}
