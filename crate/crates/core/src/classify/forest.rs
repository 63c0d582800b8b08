use super::dataset::Dataset;
use super::rng::{stream, TAG_TREE};
use super::tree::{build_tree, Node, TreeParams};
use super::{Classifier, ClassifyError};
use crate::scalar::Real;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Split candidates per node; `None` = floor(sqrt(p)).
    pub features_per_split: Option<usize>,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 65,
            features_per_split: None,
            min_leaf: 1,
        }
    }
}

impl ForestConfig {
    pub fn importance() -> Self {
        Self {
            n_trees: 75,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.n_trees == 0 || self.min_leaf == 0 || self.features_per_split == Some(0) {
            return Err(ClassifyError::InvalidConfig(
                "forest needs n_trees, min_leaf and features_per_split >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn mtry(&self, p: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (p as f64).sqrt().floor() as usize)
            .clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForestModel<T: Real> {
    pub trees: Vec<Node<T>>,
    /// Training rows left out of each tree's bootstrap sample, ascending.
    #[serde(skip)]
    pub oob: Vec<Vec<usize>>,
    #[serde(skip)]
    pub n_train: usize,
}

/// Bagged Gini trees with random feature subsets. Each tree draws its own
/// seed stream, so the ensemble is identical for any thread count.
pub fn train_forest<T: Real>(
    data: &Dataset<T>,
    cfg: &ForestConfig,
    seed: u64,
) -> Result<ForestModel<T>, ClassifyError> {
    cfg.validate()?;
    data.require_both_classes()?;
    let n = data.n_rows();
    let params = TreeParams {
        min_parent: 2,
        min_leaf: cfg.min_leaf,
        max_depth: None,
        max_features: Some(cfg.mtry(data.n_cols())),
    };
    let weights = vec![1.0; n];
    let grown: Vec<(Node<T>, Vec<usize>)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, &[TAG_TREE, t as u64]);
            let mut in_bag = vec![false; n];
            let rows: Vec<usize> = (0..n)
                .map(|_| {
                    let i = rng.gen_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            let tree = build_tree(data, &rows, &weights, params, &mut rng);
            let oob = (0..n).filter(|&i| !in_bag[i]).collect();
            (tree, oob)
        })
        .collect();
    let (trees, oob) = grown.into_iter().unzip();
    Ok(ForestModel {
        trees,
        oob,
        n_train: n,
    })
}

impl<T: Real> ForestModel<T> {
    pub fn vote_fraction(&self, row: &[T]) -> T {
        let votes = self.trees.iter().filter(|t| t.predict(row)).count();
        T::from_usize_lossy(votes) / T::from_usize_lossy(self.trees.len())
    }

    /// Mean fraction of training rows left out of each bootstrap sample.
    pub fn mean_oob_fraction(&self) -> f64 {
        if self.oob.is_empty() || self.n_train == 0 {
            return 0.0;
        }
        let total: usize = self.oob.iter().map(Vec::len).sum();
        total as f64 / (self.oob.len() * self.n_train) as f64
    }

    /// Out-of-bag majority vote per training row; `None` when a row was in
    /// every bootstrap sample.
    pub fn oob_predictions(&self, data: &Dataset<T>) -> Vec<Option<bool>> {
        let mut votes = vec![(0usize, 0usize); data.n_rows()];
        for (tree, oob) in self.trees.iter().zip(&self.oob) {
            for &i in oob {
                votes[i].1 += 1;
                if tree.predict(data.row(i)) {
                    votes[i].0 += 1;
                }
            }
        }
        votes
            .into_iter()
            .map(|(pos, total)| (total > 0).then_some(2 * pos > total))
            .collect()
    }
}

impl<T: Real> Classifier<T> for ForestModel<T> {
    fn score(&self, row: &[T]) -> T {
        self.vote_fraction(row)
    }

    fn predict(&self, row: &[T]) -> bool {
        self.vote_fraction(row) > T::lit(0.5)
    }
}
