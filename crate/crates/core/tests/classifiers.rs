mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stss_core::classifiers::mlp::MlpNetwork;
use stss_core::classifiers::{accuracy, predict, train, MethodConfig, MethodId, Problem, ALL_METHODS};
use stss_core::Matrix;

#[test]
fn naive_bayes_matches_hand_posterior() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let config = MethodConfig::default();
    for case in 0..100 {
        let n = rng.random_range(2..=5);
        let d = rng.random_range(1..=2);
        let n_classes = if n >= 3 { rng.random_range(2..=3) } else { 2 };
        // every class appears at least once
        let mut labels: Vec<usize> = (0..n).map(|i| if i < n_classes { i } else { rng.random_range(0..n_classes) }).collect();
        labels.sort_unstable();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let problem = Problem { x: &x, y: &labels, n_classes, source_features: d };
        let model = train(MethodId::NaiveBayes, problem, &config, 0).unwrap();
        let query: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
        let got = model.probabilities(&query).unwrap();
        let want = common::nb_posterior(&rows, &labels, n_classes, &query);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "case {case}: {got:?} vs {want:?}");
        }
        let q = Matrix::from_rows(&[query.clone()]).unwrap();
        assert_eq!(predict(&model, &q).unwrap()[0], common::argmax(&want), "case {case}");
    }
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = vec![0, 1, 0, 1, 1];
    let x = Matrix::from_rows(&rows).unwrap();
    let idx: Vec<usize> = (0..5).collect();
    let alpha = 1e-2;
    let net = MlpNetwork::init(2, 6, 2, 99);
    let (_, grad) = net.loss_and_gradient(&x, &y, &idx, alpha);
    let h = 1e-6;
    for p in 0..net.params.len() {
        let mut plus = net.clone();
        plus.params[p] += h;
        let mut minus = net.clone();
        minus.params[p] -= h;
        let fd = (plus.loss_and_gradient(&x, &y, &idx, alpha).0 - minus.loss_and_gradient(&x, &y, &idx, alpha).0)
            / (2.0 * h);
        let scale = grad[p].abs().max(fd.abs()).max(1e-6);
        assert!((grad[p] - fd).abs() / scale < 1e-4, "param {p}: {} vs {fd}", grad[p]);
    }
}

#[test]
fn every_method_separates_two_blobs() {
    let (x, y, xt, yt) = common::separable_split(3);
    let config = MethodConfig::default();
    for m in ALL_METHODS {
        let problem = Problem { x: &x, y: &y, n_classes: 2, source_features: 2 };
        let model = train(m, problem, &config, 5).unwrap();
        let acc = accuracy(&predict(&model, &xt).unwrap(), &yt).unwrap();
        assert_eq!(acc, 1.0, "{m}");
    }
}

#[test]
fn multiclass_methods_separate_three_blobs() {
    let (x, y) = common::blobs(50, 3, 3, 4);
    let mut config = MethodConfig::default();
    config.mlp.max_iterations = 2000;
    for m in ALL_METHODS.into_iter().filter(|&m| m != MethodId::Svm) {
        let problem = Problem { x: &x, y: &y, n_classes: 3, source_features: 3 };
        let model = train(m, problem, &config, 5).unwrap();
        let acc = accuracy(&predict(&model, &x).unwrap(), &y).unwrap();
        assert_eq!(acc, 1.0, "{m}");
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let (x, y) = common::blobs(30, 2, 3, 8);
    let config = MethodConfig::default();
    for m in ALL_METHODS {
        let problem = Problem { x: &x, y: &y, n_classes: 2, source_features: 3 };
        let a = train(m, problem, &config, 42).unwrap();
        let b = train(m, problem, &config, 42).unwrap();
        assert_eq!(a, b, "{m}");
    }
}

#[test]
fn single_class_training_gives_constant_model() {
    let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
    let y = vec![1, 1, 1];
    let problem = Problem { x: &x, y: &y, n_classes: 3, source_features: 1 };
    for m in ALL_METHODS {
        let model = train(m, problem, &MethodConfig::default(), 0).unwrap();
        assert_eq!(predict(&model, &x).unwrap(), vec![1, 1, 1]);
    }
}
