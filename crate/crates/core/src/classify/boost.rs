use super::dataset::Dataset;
use super::tree::{build_tree, Node, TreeParams};
use super::{Classifier, ClassifyError};
use crate::scalar::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_trees: usize,
    pub min_parent: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_trees: 70,
            min_parent: 10,
            min_leaf: 5,
            max_depth: None,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.n_trees == 0 || self.min_leaf == 0 || self.min_leaf > self.min_parent {
            return Err(ClassifyError::InvalidConfig(
                "boosting needs n_trees >= 1 and 1 <= min_leaf <= min_parent".into(),
            ));
        }
        Ok(())
    }
}

/// Learner weight used when a round fits the weighted data perfectly.
const PERFECT_ERR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoostModel<T: Real> {
    pub trees: Vec<Node<T>>,
    pub alphas: Vec<T>,
}

/// Discrete AdaBoost over Gini trees. Stops when a round's weighted error
/// reaches 0.5 (that round is dropped unless it is the first) or hits zero.
pub fn train_boost<T: Real>(data: &Dataset<T>, cfg: &BoostConfig) -> Result<BoostModel<T>, ClassifyError> {
    cfg.validate()?;
    data.require_both_classes()?;
    let n = data.n_rows();
    let rows: Vec<usize> = (0..n).collect();
    let params = TreeParams {
        min_parent: cfg.min_parent,
        min_leaf: cfg.min_leaf,
        max_depth: cfg.max_depth,
        max_features: None,
    };
    // no feature sampling, so the rng is never consulted
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut w = vec![1.0 / n as f64; n];
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    for _ in 0..cfg.n_trees {
        let tree = build_tree(data, &rows, &w, params, &mut rng);
        let miss: Vec<bool> = (0..n).map(|i| tree.predict(data.row(i)) != data.label(i)).collect();
        let total: f64 = w.iter().sum();
        let err = w.iter().zip(&miss).filter(|(_, &m)| m).map(|(w, _)| w).sum::<f64>() / total;
        if err >= 0.5 {
            if trees.is_empty() {
                trees.push(tree);
                alphas.push(T::one());
            }
            break;
        }
        let e = err.max(PERFECT_ERR);
        let alpha = 0.5 * ((1.0 - e) / e).ln();
        trees.push(tree);
        alphas.push(T::lit(alpha));
        if err <= 0.0 {
            break;
        }
        for (wi, &m) in w.iter_mut().zip(&miss) {
            *wi *= if m { alpha.exp() } else { (-alpha).exp() };
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= s);
    }
    Ok(BoostModel { trees, alphas })
}

impl<T: Real> BoostModel<T> {
    /// Weighted vote in `[-1, 1]`.
    pub fn margin(&self, row: &[T]) -> T {
        let total: T = self.alphas.iter().copied().sum();
        let votes: T = self
            .trees
            .iter()
            .zip(&self.alphas)
            .map(|(t, &a)| if t.predict(row) { a } else { -a })
            .sum();
        votes / total
    }
}

impl<T: Real> Classifier<T> for BoostModel<T> {
    fn score(&self, row: &[T]) -> T {
        self.margin(row)
    }

    fn predict(&self, row: &[T]) -> bool {
        self.margin(row) > T::zero()
    }
}
