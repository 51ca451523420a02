//! Training-set-size grid, stratified folds and Monte Carlo training subsets.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::MethodId;
use crate::error::{Error, Result};
use crate::seeding;

/// Fractions of the dataset size, in percent.
const FRACTIONS_PCT: [u64; 8] = [5, 10, 15, 20, 40, 60, 80, 90];

/// Smallest dataset size accepted by [`size_grid`].
pub const MIN_DATASET_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeGrid {
    pub sizes: Vec<usize>,
    pub n: usize,
}

impl SizeGrid {
    pub fn x_min(&self) -> usize {
        self.sizes[0]
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }
}

/// `round(pct * n / 100)` with halves rounded up, in exact integer arithmetic.
fn fraction_of(n: usize, pct: u64) -> usize {
    ((2 * pct * n as u64 + 100) / 200) as usize
}

/// Union of the fractional sizes {5,10,15,20,40,60,80,90}% of `n` and the
/// lattice sizes 5*10^j, 10^(j+1), 2*10^(j+1) (j >= 1), capped at round(0.9 n).
pub fn size_grid(n: usize) -> Result<SizeGrid> {
    if n < MIN_DATASET_SIZE {
        return Err(Error::invalid(format!(
            "dataset size {n} is below the minimum of {MIN_DATASET_SIZE}"
        )));
    }
    let cap = fraction_of(n, 90);
    let mut sizes: Vec<usize> = FRACTIONS_PCT.iter().map(|&p| fraction_of(n, p)).collect();
    let mut p: usize = 10;
    while 5 * p <= cap {
        sizes.push(5 * p);
        if 10 * p <= cap {
            sizes.push(10 * p);
        }
        if 20 * p <= cap {
            sizes.push(20 * p);
        }
        p *= 10;
    }
    sizes.retain(|&s| s >= 1 && s <= cap);
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() {
        return Err(Error::invalid(format!("no training sizes for n = {n}")));
    }
    Ok(SizeGrid { sizes, n })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }
}

/// Stratified k-fold assignment.
///
/// Rows are shuffled within each class, the classes are laid end to end and
/// positions are dealt round-robin over the folds. Per class and overall,
/// fold counts then differ by at most one.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::invalid("fold count must be at least 2"));
    }
    if k > labels.len() {
        return Err(Error::invalid(format!(
            "fold count {k} exceeds row count {}",
            labels.len()
        )));
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut pos = 0;
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = pos % k;
            pos += 1;
        }
    }
    Ok(FoldAssignment { fold_of, k })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetPlan {
    pub dataset: String,
    pub size: usize,
    pub fold: usize,
    pub rep: usize,
    pub indices: Vec<usize>,
}

/// Simple random sample without replacement of `min(size, len)` rows, in
/// sampling order.
pub fn draw_subset(training_rows: &[usize], size: usize, task_seed: u64) -> Result<Vec<usize>> {
    if training_rows.is_empty() {
        return Err(Error::invalid("no training rows to sample from"));
    }
    if size == 0 {
        return Err(Error::invalid("subset size must be at least 1"));
    }
    if size >= training_rows.len() {
        return Ok(training_rows.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(task_seed);
    Ok(index::sample(&mut rng, training_rows.len(), size)
        .into_iter()
        .map(|i| training_rows[i])
        .collect())
}

/// One (size, fold, rep) unit of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Task {
    pub size: usize,
    pub fold: usize,
    pub rep: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: String,
    pub grid: SizeGrid,
    pub folds: usize,
    pub reps: usize,
    pub fold_seed: u64,
    pub methods: Vec<MethodId>,
    pub tasks: Vec<Task>,
}

impl ExperimentPlan {
    pub fn trainings(&self) -> usize {
        self.tasks.len() * self.methods.len()
    }
}

/// Seed for fold assignment of a dataset.
pub fn fold_seed(base_seed: u64, dataset: &str) -> u64 {
    seeding::derive(base_seed, &[seeding::hash_str(dataset), 0x666f_6c64])
}

/// Seed of one task; independent of execution order.
pub fn task_seed(base_seed: u64, dataset: &str, size: usize, fold: usize, rep: usize) -> u64 {
    seeding::derive(
        base_seed,
        &[seeding::hash_str(dataset), size as u64, fold as u64, rep as u64],
    )
}

/// Enumerates `|grid| * folds * reps` tasks, ordered by size, fold, rep.
pub fn plan_experiment(
    dataset: &str,
    n: usize,
    folds: usize,
    reps: usize,
    methods: &[MethodId],
    base_seed: u64,
) -> Result<ExperimentPlan> {
    if folds < 2 || reps < 1 {
        return Err(Error::invalid("need folds >= 2 and reps >= 1"));
    }
    let grid = size_grid(n)?;
    let mut tasks = Vec::with_capacity(grid.len() * folds * reps);
    for &size in &grid.sizes {
        for fold in 0..folds {
            for rep in 0..reps {
                tasks.push(Task {
                    size,
                    fold,
                    rep,
                    seed: task_seed(base_seed, dataset, size, fold, rep),
                });
            }
        }
    }
    Ok(ExperimentPlan {
        dataset: dataset.to_string(),
        grid,
        folds,
        reps,
        fold_seed: fold_seed(base_seed, dataset),
        methods: methods.to_vec(),
        tasks,
    })
}

/// Materializes the subset of a task given the fold assignment.
pub fn subset_for(plan: &ExperimentPlan, folds: &FoldAssignment, task: &Task) -> Result<SubsetPlan> {
    let train = folds.train_rows(task.fold);
    Ok(SubsetPlan {
        dataset: plan.dataset.clone(),
        size: task.size,
        fold: task.fold,
        rep: task.rep,
        indices: draw_subset(&train, task.size, task.seed)?,
    })
}
