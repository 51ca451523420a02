mod common;

use std::collections::BTreeSet;

use stss_core::analysis::reference_corpus;
use stss_core::classifiers::ALL_METHODS;
use stss_core::sampling::{draw_subset, plan_experiment, size_grid, stratified_kfold, subset_for};

#[test]
fn grids_for_reference_sizes() {
    for row in reference_corpus() {
        let n = row.characteristics.N_P;
        let g = size_grid(n).unwrap();
        let cap = (0.9 * n as f64).round() as usize;
        assert!((11..=20).contains(&g.len()), "{}: {} sizes", row.id, g.len());
        assert!(*g.sizes.last().unwrap() <= cap, "{}", row.id);
        assert!(g.sizes.windows(2).all(|w| w[0] < w[1]), "{}", row.id);
    }
}

#[test]
fn reference_grids() {
    assert_eq!(
        size_grid(683).unwrap().sizes,
        vec![34, 50, 68, 100, 102, 137, 200, 273, 410, 500, 546, 615]
    );
    assert_eq!(size_grid(245_057).unwrap().len(), 20);
    assert_eq!(size_grid(351).unwrap().sizes, vec![18, 35, 50, 53, 70, 100, 140, 200, 211, 281, 316]);
}

#[test]
fn folds_are_balanced_per_class() {
    let labels: Vec<usize> = (0..683).map(|i| usize::from(i % 20 < 7)).collect();
    let f = stratified_kfold(&labels, 10, 99).unwrap();
    let sizes = f.fold_sizes();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    for c in 0..2 {
        let per: Vec<usize> = (0..10)
            .map(|k| f.test_rows(k).iter().filter(|&&r| labels[r] == c).count())
            .collect();
        assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1, "class {c}: {per:?}");
    }
    let mut all: Vec<usize> = (0..10).flat_map(|k| f.test_rows(k)).collect();
    all.sort_unstable();
    assert_eq!(all, (0..683).collect::<Vec<_>>());
}

#[test]
fn subsets_stay_inside_training_fold() {
    let labels: Vec<usize> = (0..200).map(|i| i % 3).collect();
    let plan = plan_experiment("toy", 200, 5, 2, &ALL_METHODS, 7).unwrap();
    let folds = stratified_kfold(&labels, 5, plan.fold_seed).unwrap();
    assert_eq!(plan.tasks.len(), plan.grid.len() * 5 * 2);
    for task in &plan.tasks {
        let s = subset_for(&plan, &folds, task).unwrap();
        let train: BTreeSet<usize> = folds.train_rows(task.fold).into_iter().collect();
        let uniq: BTreeSet<usize> = s.indices.iter().copied().collect();
        assert_eq!(uniq.len(), s.indices.len());
        assert_eq!(s.indices.len(), task.size.min(train.len()));
        assert!(uniq.is_subset(&train));
    }
}

#[test]
fn seeds_do_not_depend_on_plan_shape() {
    let a = plan_experiment("toy", 200, 5, 2, &ALL_METHODS, 7).unwrap();
    let b = plan_experiment("toy", 200, 5, 4, &ALL_METHODS, 7).unwrap();
    for t in &a.tasks {
        assert!(b.tasks.contains(t));
    }
    let rows: Vec<usize> = (0..150).collect();
    assert_eq!(draw_subset(&rows, 40, 5).unwrap(), draw_subset(&rows, 40, 5).unwrap());
    assert_ne!(draw_subset(&rows, 40, 5).unwrap(), draw_subset(&rows, 40, 6).unwrap());
}
