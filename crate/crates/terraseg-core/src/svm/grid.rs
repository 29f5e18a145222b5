//! (gamma, C) grid search scored by held-out classification accuracy.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{ovo_train, SmoConfig};
use crate::dataset::{stratified_holdout, LabeledFeatureSet};
use crate::error::{Error, Result};
use crate::evaluation::accuracy_percent;

#[derive(Debug, Clone, PartialEq)]
pub enum GridEval {
    /// Stratified single split; the fraction is held out for scoring.
    Holdout { fraction: f64 },
    /// Stratified k-fold cross validation; accuracy pools all held-out
    /// predictions.
    KFold { folds: usize },
}

#[derive(Debug, Clone)]
pub struct GridSearchConfig {
    pub gammas: Vec<f64>,
    pub costs: Vec<f64>,
    pub eval: GridEval,
    pub seed: u64,
    /// (gamma index, cost index) cells to leave unevaluated.
    pub skip: Vec<(usize, usize)>,
    pub smo: SmoConfig,
}

impl GridSearchConfig {
    /// Grid of powers of two: gamma 2^-4..2^5, C 2^-1..2^7.
    pub fn default_grid() -> (Vec<f64>, Vec<f64>) {
        let gammas = (-4..=5).map(|e| 2f64.powi(e)).collect();
        let costs = (-1..=7).map(|e| 2f64.powi(e)).collect();
        (gammas, costs)
    }
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        let (gammas, costs) = Self::default_grid();
        Self {
            gammas,
            costs,
            eval: GridEval::Holdout { fraction: 0.3 },
            seed: 0,
            skip: Vec::new(),
            smo: SmoConfig::default(),
        }
    }
}

/// Accuracy matrix over the grid; `None` marks skipped cells.
#[derive(Debug, Clone)]
pub struct GridSearchReport {
    pub gammas: Vec<f64>,
    pub costs: Vec<f64>,
    pub accuracy: Vec<Vec<Option<f64>>>,
    /// (gamma index, cost index, accuracy) of the best evaluated cell.
    pub best: (usize, usize, f64),
}

fn power_of_two_label(value: f64) -> String {
    let exp = value.log2();
    if exp.fract() == 0.0 && exp.abs() <= 64.0 {
        format!("2^{}", exp as i64)
    } else {
        format!("{value}")
    }
}

impl GridSearchReport {
    /// CSV with gamma rows and C columns; `*` marks skipped cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma\\C");
        for c in &self.costs {
            write!(out, ",{}", power_of_two_label(*c)).expect("string write");
        }
        out.push('\n');
        for (gi, gamma) in self.gammas.iter().enumerate() {
            out.push_str(&power_of_two_label(*gamma));
            for cell in &self.accuracy[gi] {
                match cell {
                    Some(acc) => write!(out, ",{acc:.2}").expect("string write"),
                    None => out.push_str(",*"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn best_gamma(&self) -> f64 {
        self.gammas[self.best.0]
    }

    pub fn best_cost(&self) -> f64 {
        self.costs[self.best.1]
    }
}

/// Stratified fold assignment: per class, shuffled members deal round-robin
/// into `folds` bins.
fn stratified_folds(set: &LabeledFeatureSet, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; set.len()];
    for class in 0..set.class_count {
        let mut members: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    assignment
}

fn subset(set: &LabeledFeatureSet, keep: impl Fn(usize) -> bool) -> LabeledFeatureSet {
    let indices: Vec<usize> = (0..set.len()).filter(|&i| keep(i)).collect();
    LabeledFeatureSet {
        features: indices.iter().map(|&i| set.features[i].clone()).collect(),
        labels: indices.iter().map(|&i| set.labels[i]).collect(),
        class_count: set.class_count,
    }
}

/// Evaluate every non-skipped (gamma, C) cell and report the accuracy
/// matrix with its argmax. Deterministic for a fixed seed; cells evaluate
/// independently and in parallel.
pub fn grid_search(set: &LabeledFeatureSet, cfg: &GridSearchConfig) -> Result<GridSearchReport> {
    if cfg.gammas.is_empty() || cfg.costs.is_empty() {
        return Err(Error::Config("empty parameter grid".into()));
    }
    let names: Vec<String> = (0..set.class_count).map(|c| format!("class{c}")).collect();

    // The data partition is fixed once, shared by all cells.
    enum Partition {
        Holdout(Box<(LabeledFeatureSet, LabeledFeatureSet)>),
        Folds(Vec<usize>, usize),
    }
    let partition = match cfg.eval {
        GridEval::Holdout { fraction } => {
            Partition::Holdout(Box::new(stratified_holdout(set, fraction, cfg.seed)?))
        }
        GridEval::KFold { folds } => {
            if folds < 2 {
                return Err(Error::Config("k-fold needs at least 2 folds".into()));
            }
            Partition::Folds(stratified_folds(set, folds, cfg.seed), folds)
        }
    };

    let evaluate_cell = |gamma: f64, cost: f64| -> Result<f64> {
        match &partition {
            Partition::Holdout(parts) => {
                let (train, held) = parts.as_ref();
                let model = ovo_train(train, gamma, cost, &cfg.smo, names.clone())?;
                let predictions: Vec<usize> = held
                    .features
                    .iter()
                    .map(|f| model.classify(&f.descriptor.values).map(|(c, _, _)| c))
                    .collect::<Result<_>>()?;
                accuracy_percent(&predictions, &held.labels)
            }
            Partition::Folds(assignment, folds) => {
                let mut predictions = Vec::with_capacity(set.len());
                let mut truth = Vec::with_capacity(set.len());
                for fold in 0..*folds {
                    let train = subset(set, |i| assignment[i] != fold);
                    let held = subset(set, |i| assignment[i] == fold);
                    if held.is_empty() {
                        continue;
                    }
                    let model = ovo_train(&train, gamma, cost, &cfg.smo, names.clone())?;
                    for (f, &label) in held.features.iter().zip(&held.labels) {
                        predictions.push(model.classify(&f.descriptor.values)?.0);
                        truth.push(label);
                    }
                }
                accuracy_percent(&predictions, &truth)
            }
        }
    };

    let cells: Vec<(usize, usize)> = (0..cfg.gammas.len())
        .flat_map(|gi| (0..cfg.costs.len()).map(move |ci| (gi, ci)))
        .filter(|cell| !cfg.skip.contains(cell))
        .collect();
    let results: Vec<((usize, usize), f64)> = cells
        .par_iter()
        .map(|&(gi, ci)| evaluate_cell(cfg.gammas[gi], cfg.costs[ci]).map(|a| ((gi, ci), a)))
        .collect::<Result<_>>()?;

    let mut accuracy = vec![vec![None; cfg.costs.len()]; cfg.gammas.len()];
    let mut best = (0, 0, f64::NEG_INFINITY);
    for ((gi, ci), acc) in results {
        accuracy[gi][ci] = Some(acc);
        if acc > best.2 {
            best = (gi, ci, acc);
        }
    }
    if !best.2.is_finite() {
        return Err(Error::Config("every grid cell was skipped".into()));
    }
    Ok(GridSearchReport {
        gammas: cfg.gammas.clone(),
        costs: cfg.costs.clone(),
        accuracy,
        best,
    })
}
