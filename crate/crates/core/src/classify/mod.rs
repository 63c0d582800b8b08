//! Binary classifiers (RBF SVM, Gaussian naive Bayes, random forest, boosted
//! trees), repeated stratified cross-validation, and out-of-bag permutation
//! importance.

mod boost;
mod cv;
mod dataset;
mod forest;
mod gnb;
mod importance;
mod metrics;
mod model;
pub mod rng;
mod svm;
mod tree;

pub use boost::{train_boost, BoostConfig, BoostModel};
pub use cv::{cross_validate, fold_assignment, CvConfig, CvReport, MetricSummary};
pub use dataset::{Dataset, Standardizer};
pub use forest::{train_forest, ForestConfig, ForestModel};
pub use gnb::{train_gnb, GnbModel};
pub use importance::{oob_importance, ImportanceReport};
pub use metrics::{auc, evaluate, Evaluation};
pub use model::{train, ClassifierConfig, ModelDocument, TrainedModel, MODEL_FORMAT_VERSION};
pub use svm::{train_svm, SvmConfig, SvmModel};
pub use tree::{build_tree, Node, TreeParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("solver did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("test set is empty")]
    EmptyTest,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {class} has {count} members, fewer than k = {k}")]
    TooFewPerClass { class: String, count: usize, k: usize },
    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Anything that scores a feature row; positive class = deficit.
pub trait Classifier<T> {
    /// Continuous score, larger meaning more likely deficit.
    fn score(&self, row: &[T]) -> T;
    fn predict(&self, row: &[T]) -> bool;
}
