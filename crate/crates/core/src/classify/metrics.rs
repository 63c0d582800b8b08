use super::dataset::Dataset;
use super::{Classifier, ClassifyError};
use crate::scalar::Real;
use crate::stats::midranks;
use serde::{Deserialize, Serialize};

/// Test-set performance in percent. Sensitivity is recall on deficit rows,
/// specificity recall on the rest; each is `None` when that class is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub scores: Vec<f64>,
    pub predictions: Vec<bool>,
}

pub fn confusion(predictions: &[bool], labels: &[bool]) -> (f64, Option<f64>, Option<f64>) {
    let (mut tp, mut tn, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &l) in predictions.iter().zip(labels) {
        if l {
            pos += 1;
            tp += usize::from(p);
        } else {
            neg += 1;
            tn += usize::from(!p);
        }
    }
    let pct = |a: usize, b: usize| (b > 0).then(|| 100.0 * a as f64 / b as f64);
    (
        pct(tp + tn, pos + neg).unwrap_or(0.0),
        pct(tp, pos),
        pct(tn, neg),
    )
}

pub fn evaluate<T: Real, M: Classifier<T> + ?Sized>(
    model: &M,
    test: &Dataset<T>,
) -> Result<Evaluation, ClassifyError> {
    if test.n_rows() == 0 {
        return Err(ClassifyError::EmptyTest);
    }
    let scores: Vec<f64> = (0..test.n_rows()).map(|i| model.score(test.row(i)).as_f64()).collect();
    let predictions: Vec<bool> = (0..test.n_rows()).map(|i| model.predict(test.row(i))).collect();
    let (accuracy, sensitivity, specificity) = confusion(&predictions, test.labels());
    Ok(Evaluation {
        accuracy,
        sensitivity,
        specificity,
        scores,
        predictions,
    })
}

/// Area under the ROC curve as `P(s+ > s-) + P(s+ = s-) / 2`, via midranks.
pub fn auc<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64, ClassifyError> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(ClassifyError::SingleClass);
    }
    let (ranks, _) = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}
