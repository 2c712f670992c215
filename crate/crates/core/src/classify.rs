//! Template-distance features and a one-vs-one linear classifier.
//!
//! Each trial is described by its RMS distance to one template per class.
//! Templates come from training trials only. Pairwise linear classifiers
//! are trained by Pegasos-style subgradient descent on the L2-regularized
//! hinge loss and combined by majority vote.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accum;
use crate::error::{Error, Result};
use crate::metrics::rms_to_average;
use crate::pipeline::{kfold_indices, scheme_average, CutoffMode};
use crate::rng::{sub_seed, SplitMix64};
use crate::signal::{AverageSignal, Scheme, TrialSet};

pub const DEFAULT_LAMBDA: f64 = 1e-2;
pub const DEFAULT_EPOCHS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl SvmParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            epochs: DEFAULT_EPOCHS,
            seed,
        }
    }
}

/// One template per class, in class-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTemplates {
    pub labels: Vec<String>,
    pub templates: Vec<AverageSignal>,
}

/// Averages the trials of each class under `scheme`. For the warped schemes
/// each class is aligned to its own conventional average.
pub fn build_class_templates(
    train: &TrialSet,
    labels: &[String],
    scheme: Scheme,
    mode: CutoffMode,
) -> Result<ClassTemplates> {
    let templates = labels
        .par_iter()
        .map(|label| {
            let members: Vec<usize> = train
                .trials
                .iter()
                .enumerate()
                .filter(|(_, t)| t.label.as_deref() == Some(label.as_str()))
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                return Err(Error::DegenerateClass(label.clone()));
            }
            scheme_average(&train.select(&members), scheme, mode)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassTemplates {
        labels: labels.to_vec(),
        templates,
    })
}

/// RMS distance from `trial` to each template.
pub fn template_features(trial: &[f64], templates: &ClassTemplates) -> Result<Vec<f64>> {
    templates
        .templates
        .iter()
        .map(|t| rms_to_average(trial, &t.samples))
        .collect()
}

/// Per-dimension z-score fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &[Vec<f64>]) -> Result<Self> {
        let dim = features.first().ok_or(Error::Empty("features"))?.len();
        let n = features.len() as f64;
        let mean = accum::columnwise_mean(features.iter().map(Vec::as_slice), dim);
        let scale = (0..dim)
            .map(|d| {
                let var = accum::sum(features.iter().map(|f| (f[d] - mean[d]).powi(2))) / n;
                // a constant dimension carries no information; leave it centred
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Linear decision function for classes `positive` (score > 0) against
/// `negative`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLinear {
    pub positive: usize,
    pub negative: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BinaryLinear {
    pub fn score(&self, x: &[f64]) -> f64 {
        accum::sum(self.weights.iter().zip(x).map(|(w, v)| w * v)) + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoLinearModel {
    pub n_classes: usize,
    pub standardizer: Standardizer,
    pub pairs: Vec<BinaryLinear>,
}

impl OvoLinearModel {
    /// Majority vote over all pairs; ties go to the lowest class index.
    pub fn predict(&self, features: &[f64]) -> usize {
        let x = self.standardizer.apply(features);
        let mut votes = vec![0usize; self.n_classes];
        for p in &self.pairs {
            let winner = if p.score(&x) > 0.0 { p.positive } else { p.negative };
            votes[winner] += 1;
        }
        let best = votes.iter().copied().max().unwrap_or(0);
        votes.iter().position(|&v| v == best).unwrap_or(0)
    }
}

fn pegasos(x: &[Vec<f64>], y: &[f64], params: &SvmParams, seed: u64) -> (Vec<f64>, f64) {
    let dim = x[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut t = 0usize;
    for epoch in 0..params.epochs {
        SplitMix64::new(sub_seed(seed, epoch as u64)).shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let margin = y[i] * (accum::sum(w.iter().zip(&x[i]).map(|(a, v)| a * v)) + b);
            let shrink = 1.0 - eta * params.lambda;
            w.iter_mut().for_each(|a| *a *= shrink);
            if margin < 1.0 {
                for (a, v) in w.iter_mut().zip(&x[i]) {
                    *a += eta * y[i] * v;
                }
                b += eta * y[i];
            }
        }
    }
    (w, b)
}

/// Trains one linear classifier per class pair. `labels` are class indices
/// below `n_classes`.
pub fn train_ovo_linear(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    params: &SvmParams,
) -> Result<OvoLinearModel> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::DegenerateClass(format!("{n_classes} class(es)")));
    }
    if let Some(c) = (0..n_classes).find(|c| !labels.contains(c)) {
        return Err(Error::DegenerateClass(format!("class {c} has no training data")));
    }
    if let Some(&c) = labels.iter().find(|&&c| c >= n_classes) {
        return Err(Error::IndexOutOfRange(format!("label {c} with {n_classes} classes")));
    }
    let standardizer = Standardizer::fit(features)?;
    let z: Vec<Vec<f64>> = features.iter().map(|f| standardizer.apply(f)).collect();
    let pair_list: Vec<(usize, usize)> = (0..n_classes)
        .flat_map(|a| (a + 1..n_classes).map(move |b| (a, b)))
        .collect();
    let pairs = pair_list
        .par_iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = z
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == a || l == b)
                .map(|(x, &l)| (x.clone(), if l == a { 1.0 } else { -1.0 }))
                .unzip();
            let (weights, bias) = pegasos(&xs, &ys, params, sub_seed(params.seed, k as u64));
            BinaryLinear {
                positive: a,
                negative: b,
                weights,
                bias,
            }
        })
        .collect();
    Ok(OvoLinearModel {
        n_classes,
        standardizer,
        pairs,
    })
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            for (c, v) in row.iter_mut().zip(o) {
                *c += v;
            }
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    /// Mean of the per-fold accuracies.
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub scheme: Scheme,
}

fn class_index(ts: &TrialSet, labels: &[String]) -> Result<Vec<usize>> {
    ts.trials
        .iter()
        .map(|t| {
            let l = t
                .label
                .as_deref()
                .ok_or_else(|| Error::DegenerateClass(format!("trial {} has no label", t.id)))?;
            Ok(labels.iter().position(|x| x == l).expect("label from the same set"))
        })
        .collect()
}

/// Templates for each fold, built from that fold's training trials only.
pub fn fold_templates(
    ts: &TrialSet,
    held_out: &[Vec<usize>],
    scheme: Scheme,
    mode: CutoffMode,
) -> Result<Vec<ClassTemplates>> {
    let labels = ts.labels();
    held_out
        .par_iter()
        .map(|test| {
            let train: Vec<usize> = (0..ts.len()).filter(|p| !test.contains(p)).collect();
            build_class_templates(&ts.select(&train), &labels, scheme, mode)
        })
        .collect()
}

/// Cross-validation over explicit held-out position lists.
pub fn crossvalidate_with_folds(
    ts: &TrialSet,
    held_out: &[Vec<usize>],
    scheme: Scheme,
    mode: CutoffMode,
    params: &SvmParams,
) -> Result<CrossValidation> {
    let labels = ts.labels();
    if labels.len() < 2 {
        return Err(Error::DegenerateClass(format!("{} label(s) in set", labels.len())));
    }
    let truth = class_index(ts, &labels)?;
    let templates = fold_templates(ts, held_out, scheme, mode)?;
    let per_fold = held_out
        .par_iter()
        .zip(&templates)
        .enumerate()
        .map(|(f, (test, tpl))| {
            let train: Vec<usize> = (0..ts.len()).filter(|p| !test.contains(p)).collect();
            let feats = |positions: &[usize]| -> Result<Vec<Vec<f64>>> {
                positions
                    .iter()
                    .map(|&p| template_features(&ts.trials[p].samples, tpl))
                    .collect()
            };
            let train_x = feats(&train)?;
            let train_y: Vec<usize> = train.iter().map(|&p| truth[p]).collect();
            let fold_params = SvmParams {
                seed: sub_seed(params.seed, f as u64),
                ..*params
            };
            let model = train_ovo_linear(&train_x, &train_y, labels.len(), &fold_params)?;
            let mut cm = ConfusionMatrix::new(labels.clone());
            for (x, &p) in feats(test)?.iter().zip(test) {
                cm.record(truth[p], model.predict(x));
            }
            Ok(cm)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = ConfusionMatrix::new(labels);
    per_fold.iter().for_each(|cm| confusion.merge(cm));
    let fold_accuracies: Vec<f64> = per_fold.iter().map(ConfusionMatrix::accuracy).collect();
    Ok(CrossValidation {
        accuracy: accum::mean(&fold_accuracies),
        fold_accuracies,
        confusion,
        scheme,
    })
}

/// Stratified k-fold cross-validation.
pub fn crossvalidate(
    ts: &TrialSet,
    k: usize,
    scheme: Scheme,
    mode: CutoffMode,
    params: &SvmParams,
) -> Result<CrossValidation> {
    let folds = kfold_indices(ts, k, params.seed)?;
    crossvalidate_with_folds(ts, &folds, scheme, mode, params)
}
