//! The five classification methods behind one train/predict interface.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Characteristics;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seeding;

pub mod forest;
pub mod logistic;
pub mod mlp;
pub mod naive_bayes;
pub mod svm;

pub use forest::{FeatureRule, ForestConfig};
pub use logistic::LogisticConfig;
pub use mlp::{MlpConfig, WidthBasis};
pub use naive_bayes::NaiveBayesConfig;
pub use svm::{GammaRule, Kernel, SvmConfig};

/// Enumeration order doubles as the tie-break order in [`best_accuracy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MethodId {
    Logistic,
    NaiveBayes,
    Mlp,
    RandomForest,
    Svm,
}

pub const ALL_METHODS: [MethodId; 5] = [
    MethodId::Logistic,
    MethodId::NaiveBayes,
    MethodId::Mlp,
    MethodId::RandomForest,
    MethodId::Svm,
];

impl MethodId {
    pub fn name(self) -> &'static str {
        match self {
            MethodId::Logistic => "LOGISTIC",
            MethodId::NaiveBayes => "NAIVE_BAYES",
            MethodId::Mlp => "MLP",
            MethodId::RandomForest => "RANDOM_FOREST",
            MethodId::Svm => "SVM",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_METHODS
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub logistic: LogisticConfig,
    pub naive_bayes: NaiveBayesConfig,
    pub mlp: MlpConfig,
    pub random_forest: ForestConfig,
    pub svm: SvmConfig,
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        self.logistic.validate()?;
        self.naive_bayes.validate()?;
        self.mlp.validate()?;
        self.random_forest.validate()?;
        self.svm.validate()
    }
}

/// Borrowed training data.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub x: &'a Matrix,
    pub y: &'a [usize],
    /// Class count of the full dataset; labels are in `0..n_classes`.
    pub n_classes: usize,
    /// Pre-encoding feature count, used to size the MLP hidden layer.
    pub source_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub method: MethodId,
    /// Sorted class indices present in the training labels.
    pub classes: Vec<usize>,
    n_features: usize,
    kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ModelKind {
    Constant(usize),
    Logistic(logistic::LogisticModel),
    NaiveBayes(naive_bayes::GaussianNb),
    Mlp(mlp::MlpNetwork),
    Forest(forest::RandomForest),
    Svm(svm::SvmModel),
}

/// Trains `method`; deterministic for fixed inputs, config and seed.
///
/// A training set holding a single class yields a constant model.
pub fn train(method: MethodId, problem: Problem<'_>, config: &MethodConfig, seed: u64) -> Result<Model> {
    let x = problem.x;
    if x.rows() == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if x.rows() != problem.y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: problem.y.len(),
        });
    }
    if let Some((row, col)) = x.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    if let Some(&bad) = problem.y.iter().find(|&&c| c >= problem.n_classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {} classes",
            problem.n_classes
        )));
    }

    let classes: Vec<usize> = problem.y.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let local: Vec<usize> = problem
        .y
        .iter()
        .map(|c| classes.binary_search(c).expect("class collected above"))
        .collect();
    let n_local = classes.len();

    let kind = if n_local == 1 {
        ModelKind::Constant(0)
    } else {
        match method {
            MethodId::Logistic => {
                ModelKind::Logistic(logistic::LogisticModel::fit(x, &local, n_local, &config.logistic)?)
            }
            MethodId::NaiveBayes => {
                ModelKind::NaiveBayes(naive_bayes::GaussianNb::fit(x, &local, n_local, &config.naive_bayes)?)
            }
            MethodId::Mlp => {
                let basis = match config.mlp.width_basis {
                    WidthBasis::SourceFeatures => problem.source_features.max(1),
                    WidthBasis::EncodedColumns => x.cols(),
                };
                let hidden = config.mlp.hidden_multiplier * basis;
                ModelKind::Mlp(mlp::MlpNetwork::fit(x, &local, n_local, hidden, &config.mlp, seed)?)
            }
            MethodId::RandomForest => {
                ModelKind::Forest(forest::RandomForest::fit(x, &local, n_local, &config.random_forest, seed)?)
            }
            MethodId::Svm => {
                if n_local != 2 {
                    return Err(Error::invalid(format!(
                        "SVM supports two classes, training set has {n_local}"
                    )));
                }
                ModelKind::Svm(svm::SvmModel::fit(x, &local, &config.svm)?)
            }
        }
    };

    Ok(Model {
        method,
        classes,
        n_features: x.cols(),
        kind,
    })
}

impl Model {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Class probabilities ordered as `classes`, for naive Bayes, logistic
    /// regression (one-vs-rest scores normalized) and the MLP.
    pub fn probabilities(&self, row: &[f64]) -> Option<Vec<f64>> {
        fn softmax(z: Vec<f64>) -> Vec<f64> {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        }
        match &self.kind {
            ModelKind::Constant(_) => Some(vec![1.0]),
            ModelKind::NaiveBayes(m) => Some(softmax(m.log_joint(row))),
            ModelKind::Mlp(m) => Some(softmax(m.forward(row))),
            ModelKind::Logistic(m) => {
                let s = m.scores(row);
                let t: f64 = s.iter().sum();
                Some(s.into_iter().map(|v| v / t).collect())
            }
            ModelKind::Forest(_) | ModelKind::Svm(_) => None,
        }
    }

    fn predict_row(&self, row: &[f64]) -> usize {
        let local = match &self.kind {
            ModelKind::Constant(c) => *c,
            ModelKind::Logistic(m) => argmax(&m.scores(row)),
            ModelKind::NaiveBayes(m) => argmax(&m.log_joint(row)),
            ModelKind::Mlp(m) => argmax(&m.forward(row)),
            ModelKind::Forest(m) => argmax(&m.votes(row)),
            ModelKind::Svm(m) => usize::from(m.decision(row) > 0.0),
        };
        self.classes[local]
    }
}

/// One class index per row.
pub fn predict(model: &Model, x: &Matrix) -> Result<Vec<usize>> {
    if x.cols() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            found: x.cols(),
        });
    }
    Ok(x.iter_rows().map(|r| model.predict_row(r)).collect())
}

/// Index of the largest score; the first one wins ties.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Fraction of positions where `predicted` equals `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("accuracy of an empty prediction"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// SVMs are only built for two-class datasets of at most this many points.
pub const SVM_MAX_POINTS: usize = 10_000;

/// Drops SVM for multi-class or large datasets; everything else passes through.
pub fn applicable_methods(chars: &Characteristics, requested: &[MethodId]) -> Vec<MethodId> {
    requested
        .iter()
        .copied()
        .filter(|&m| m != MethodId::Svm || (chars.N_C <= 2 && chars.N_P <= SVM_MAX_POINTS))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResult {
    pub accuracy: f64,
    pub winning_method: MethodId,
    pub per_method: Vec<(MethodId, f64)>,
}

/// Picks the highest accuracy from `(method, accuracy)` pairs. Ties go to the
/// method earliest in [`ALL_METHODS`] order.
pub fn select_best(per_method: &[(MethodId, f64)]) -> Option<(MethodId, f64)> {
    let mut sorted = per_method.to_vec();
    sorted.sort_by_key(|(m, _)| *m);
    let mut best: Option<(MethodId, f64)> = None;
    for (m, a) in sorted {
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((m, a));
        }
    }
    best
}

/// Seed handed to `method` when training under a task seed.
pub fn method_seed(task_seed: u64, method: MethodId) -> u64 {
    seeding::derive(task_seed, &[0x6d65_7468_6f64, method.index()])
}

/// Trains every method on the same training set, scores each on the same
/// test set and keeps the best.
pub fn best_accuracy(
    train_set: Problem<'_>,
    test_x: &Matrix,
    test_y: &[usize],
    methods: &[MethodId],
    config: &MethodConfig,
    seed: u64,
) -> Result<BestResult> {
    if methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    let mut per_method = Vec::with_capacity(methods.len());
    for &m in methods.iter().collect::<BTreeSet<_>>() {
        let model = train(m, train_set, config, method_seed(seed, m))?;
        let pred = predict(&model, test_x)?;
        per_method.push((m, accuracy(&pred, test_y)?));
    }
    let (winning_method, accuracy) = select_best(&per_method).expect("non-empty");
    Ok(BestResult {
        accuracy,
        winning_method,
        per_method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(n_p: usize, n_c: usize) -> Characteristics {
        Characteristics {
            N_P: n_p,
            N_F: 16,
            N_CAT: 0,
            N_CONT: 16,
            R_CAT: 0.0,
            N_C: n_c,
            C_MIN: 0.037,
            I_C: 0.0,
        }
    }

    #[test]
    fn accuracy_counts_matches() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
        assert_eq!(accuracy(&[2, 1], &[2, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 1], &[0, 0]).unwrap(), 0.0);
        assert!(accuracy(&[1], &[0, 0]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn svm_dropped_for_letter_recognition() {
        let got = applicable_methods(&chars(20_000, 26), &ALL_METHODS);
        assert_eq!(got.len(), 4);
        assert!(!got.contains(&MethodId::Svm));
    }

    #[test]
    fn svm_kept_for_small_binary() {
        assert_eq!(applicable_methods(&chars(683, 2), &ALL_METHODS), ALL_METHODS.to_vec());
        assert_eq!(applicable_methods(&chars(10_000, 2), &ALL_METHODS).len(), 5);
        assert_eq!(applicable_methods(&chars(10_001, 2), &ALL_METHODS).len(), 4);
    }

    #[test]
    fn single_request_passes_through() {
        assert_eq!(
            applicable_methods(&chars(683, 2), &[MethodId::RandomForest]),
            vec![MethodId::RandomForest]
        );
    }

    #[test]
    fn best_of_methods_max_and_ties() {
        let accs = [0.91, 0.85, 0.93, 0.95, 0.94];
        let pm: Vec<_> = ALL_METHODS.iter().copied().zip(accs).collect();
        assert_eq!(select_best(&pm), Some((MethodId::RandomForest, 0.95)));

        let ties: Vec<_> = ALL_METHODS.iter().rev().map(|&m| (m, 0.9)).collect();
        assert_eq!(select_best(&ties), Some((MethodId::Logistic, 0.9)));

        assert_eq!(
            select_best(&[(MethodId::NaiveBayes, 0.7)]),
            Some((MethodId::NaiveBayes, 0.7))
        );
    }

    #[test]
    fn argmax_tie_goes_to_lowest() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }

    #[test]
    fn method_names_round_trip() {
        for m in ALL_METHODS {
            assert_eq!(m.name().parse::<MethodId>().unwrap(), m);
        }
        assert_eq!(serde_json::to_string(&MethodId::RandomForest).unwrap(), "\"RANDOM_FOREST\"");
    }

    #[test]
    fn constant_label_model() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![-1.0, 0.5]]).unwrap();
        let y = [0, 0, 0];
        let p = Problem {
            x: &x,
            y: &y,
            n_classes: 2,
            source_features: 2,
        };
        for m in ALL_METHODS {
            let model = train(m, p, &MethodConfig::default(), 7).unwrap();
            assert_eq!(model.classes, vec![0]);
            let q = Matrix::from_rows(&[vec![100.0, -3.0], vec![0.0, 0.0]]).unwrap();
            assert_eq!(predict(&model, &q).unwrap(), vec![0, 0], "{m}");
        }
    }

    #[test]
    fn non_finite_and_mismatch_errors() {
        let x = Matrix::from_rows(&[vec![1.0], vec![f64::INFINITY]]).unwrap();
        let y = [0, 1];
        let p = Problem {
            x: &x,
            y: &y,
            n_classes: 2,
            source_features: 1,
        };
        assert!(matches!(
            train(MethodId::Logistic, p, &MethodConfig::default(), 0),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));

        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let p = Problem { x: &x, ..p };
        let model = train(MethodId::NaiveBayes, p, &MethodConfig::default(), 0).unwrap();
        let wide = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(predict(&model, &wide), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn predictions_stay_in_trained_classes() {
        // Classes 1 and 3 of 4.
        let x = Matrix::from_rows(&[vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]]).unwrap();
        let y = [1, 1, 3, 3];
        let p = Problem {
            x: &x,
            y: &y,
            n_classes: 4,
            source_features: 1,
        };
        let q = Matrix::from_rows(&[vec![-5.0], vec![0.1], vec![5.0]]).unwrap();
        for m in ALL_METHODS {
            let model = train(m, p, &MethodConfig::default(), 3).unwrap();
            for c in predict(&model, &q).unwrap() {
                assert!(c == 1 || c == 3, "{m} predicted {c}");
            }
        }
    }
}
