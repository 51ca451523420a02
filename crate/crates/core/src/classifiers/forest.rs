//! Random forest of Gini-impurity CART trees, majority vote.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seeding;

/// Number of candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRule {
    Sqrt,
    Log2,
    All,
    Count(usize),
}

impl FeatureRule {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            FeatureRule::Sqrt => (n_features as f64).sqrt() as usize,
            FeatureRule::Log2 => (n_features as f64).log2() as usize,
            FeatureRule::All => n_features,
            FeatureRule::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_tree_depth: Option<usize>,
    pub features_per_split: FeatureRule,
    /// Train each tree on a bootstrap resample; otherwise on the full set.
    pub bootstrap: bool,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_tree_depth: None,
            features_per_split: FeatureRule::Sqrt,
            bootstrap: true,
            min_samples_split: 2,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("random_forest: n_trees must be >= 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("random_forest: min_samples_split must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(c) => return c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    mtry: usize,
    max_depth: Option<usize>,
    min_split: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Best threshold on one feature, or `None` if it is constant on `idx`.
    fn best_on_feature(&self, idx: &[usize], feature: usize, total: &[usize]) -> Option<Candidate> {
        let mut pairs: Vec<(f64, usize)> = idx.iter().map(|&i| (self.x.get(i, feature), self.y[i])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            return None;
        }
        let n = pairs.len() as f64;
        let mut left = vec![0usize; self.n_classes];
        let mut left_sq = 0.0f64;
        let mut right_sq: f64 = total.iter().map(|&c| (c * c) as f64).sum();
        let mut best: Option<Candidate> = None;
        for k in 0..pairs.len() - 1 {
            let c = pairs[k].1;
            // Update sum of squared counts incrementally.
            left_sq += (2 * left[c] + 1) as f64;
            right_sq -= (2 * (total[c] - left[c]) - 1) as f64;
            left[c] += 1;
            if pairs[k].0 == pairs[k + 1].0 {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            // Weighted Gini = 1 - (sum l^2 / nl + sum r^2 / nr) / n.
            let impurity = 1.0 - (left_sq / nl + right_sq / nr) / n;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mut threshold = 0.5 * (pairs[k].0 + pairs[k + 1].0);
                if threshold >= pairs[k + 1].0 {
                    threshold = pairs[k].0;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(0));
        let counts = self.counts(&idx);
        let label = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || idx.len() < self.min_split {
            self.nodes[slot] = Node::Leaf(label);
            return slot;
        }

        let mut features: Vec<usize> = (0..self.x.cols()).collect();
        features.shuffle(&mut self.rng);
        let mut best: Option<Candidate> = None;
        let mut examined = 0;
        for f in features {
            if examined >= self.mtry {
                break;
            }
            if let Some(c) = self.best_on_feature(&idx, f, &counts) {
                examined += 1;
                if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else {
            self.nodes[slot] = Node::Leaf(label);
            return slot;
        };

        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl RandomForest {
    pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize, cfg: &ForestConfig, seed: u64) -> Result<Self> {
        let n = x.rows();
        let mtry = cfg.features_per_split.resolve(x.cols());
        let trees = (0..cfg.n_trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, &[t as u64]));
                let idx: Vec<usize> = if cfg.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut b = TreeBuilder {
                    x,
                    y,
                    n_classes,
                    mtry,
                    max_depth: cfg.max_tree_depth,
                    min_split: cfg.min_samples_split,
                    rng,
                    nodes: Vec::new(),
                };
                b.build(idx, 0);
                DecisionTree { nodes: b.nodes }
            })
            .collect();
        Ok(RandomForest { trees, n_classes })
    }

    /// Vote counts per class.
    pub fn votes(&self, row: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.n_classes];
        for t in &self.trees {
            v[t.predict(row)] += 1.0;
        }
        v
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::argmax;

    #[test]
    fn feature_rules() {
        assert_eq!(FeatureRule::Sqrt.resolve(9), 3);
        assert_eq!(FeatureRule::Sqrt.resolve(2), 1);
        assert_eq!(FeatureRule::Log2.resolve(16), 4);
        assert_eq!(FeatureRule::Count(50).resolve(7), 7);
        assert_eq!(FeatureRule::All.resolve(5), 5);
    }

    #[test]
    fn unanimous_vote() {
        let forest = RandomForest {
            trees: vec![
                DecisionTree {
                    nodes: vec![Node::Leaf(2)]
                };
                5
            ],
            n_classes: 3,
        };
        assert_eq!(argmax(&forest.votes(&[0.0])), 2);
    }

    #[test]
    fn single_tree_fits_xor_exactly() {
        let x = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let y = [0, 1, 1, 0];
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, 2, &cfg, 9).unwrap();
        for (row, &c) in x.iter_rows().zip(&y) {
            assert_eq!(argmax(&f.votes(row)), c);
        }
    }

    #[test]
    fn depth_limit_respected() {
        let rows: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..32).map(|i| i % 2).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = ForestConfig {
            n_trees: 3,
            max_tree_depth: Some(2),
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, 2, &cfg, 1).unwrap();
        assert!(f.trees().iter().all(|t| t.depth() <= 2));
    }
}
