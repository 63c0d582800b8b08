use super::cv::pool;
use super::dataset::Dataset;
use super::forest::{train_forest, ForestConfig};
use super::metrics::confusion;
use super::rng::{stream, TAG_PERMUTE};
use super::ClassifyError;
use crate::scalar::{mean, sample_sd, Real};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub column_ids: Vec<String>,
    /// Mean error increase over trees divided by its sd over trees.
    pub scores: Vec<f64>,
    pub mean_increase: Vec<f64>,
    pub sd_increase: Vec<f64>,
    pub n_trees: usize,
    /// Trees with a nonempty out-of-bag set.
    pub trees_scored: usize,
    pub seed: u64,
    pub mean_oob_fraction: f64,
    pub oob_accuracy: f64,
    pub oob_sensitivity: Option<f64>,
    pub oob_specificity: Option<f64>,
}

impl ImportanceReport {
    /// Column indices ordered by descending score; ties keep column order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        idx
    }
}

fn error_rate<T: Real>(tree: &super::Node<T>, rows: &[Vec<T>], labels: &[bool]) -> f64 {
    let wrong = rows
        .iter()
        .zip(labels)
        .filter(|(r, &l)| tree.predict(r) != l)
        .count();
    wrong as f64 / rows.len() as f64
}

/// Out-of-bag permutation importance: per tree, the misclassification rate
/// on its out-of-bag rows after shuffling one feature among those rows, minus
/// the unshuffled rate. A feature whose increase never varies across trees
/// reports the raw mean.
pub fn oob_importance<T: Real>(
    data: &Dataset<T>,
    cfg: &ForestConfig,
    seed: u64,
    workers: usize,
) -> Result<ImportanceReport, ClassifyError> {
    let p = data.n_cols();
    let pool = pool(workers);
    let forest = pool.install(|| train_forest(data, cfg, seed))?;

    let per_tree: Vec<Option<Vec<f64>>> = pool.install(|| {
        (0..forest.trees.len())
            .into_par_iter()
            .map(|t| {
                let oob = &forest.oob[t];
                if oob.is_empty() {
                    return None;
                }
                let tree = &forest.trees[t];
                let rows: Vec<Vec<T>> = oob.iter().map(|&i| data.row(i).to_vec()).collect();
                let labels: Vec<bool> = oob.iter().map(|&i| data.label(i)).collect();
                let base = error_rate(tree, &rows, &labels);
                let deltas = (0..p)
                    .map(|j| {
                        let mut rng = stream(seed, &[TAG_PERMUTE, t as u64, j as u64]);
                        let mut column: Vec<T> = rows.iter().map(|r| r[j]).collect();
                        column.shuffle(&mut rng);
                        let permuted: Vec<Vec<T>> = rows
                            .iter()
                            .zip(&column)
                            .map(|(r, &v)| {
                                let mut r = r.clone();
                                r[j] = v;
                                r
                            })
                            .collect();
                        error_rate(tree, &permuted, &labels) - base
                    })
                    .collect();
                Some(deltas)
            })
            .collect()
    });
    let scored: Vec<Vec<f64>> = per_tree.into_iter().flatten().collect();
    let mut scores = Vec::with_capacity(p);
    let mut mean_increase = Vec::with_capacity(p);
    let mut sd_increase = Vec::with_capacity(p);
    for j in 0..p {
        let d: Vec<f64> = scored.iter().map(|v| v[j]).collect();
        let m = mean(&d).unwrap_or(0.0);
        let s = sample_sd(&d);
        mean_increase.push(m);
        sd_increase.push(s);
        scores.push(if s > 0.0 { m / s } else { m });
    }

    let votes = forest.oob_predictions(data);
    let (preds, labels): (Vec<bool>, Vec<bool>) = votes
        .iter()
        .zip(data.labels())
        .filter_map(|(v, &l)| v.map(|v| (v, l)))
        .unzip();
    let (oob_accuracy, oob_sensitivity, oob_specificity) = confusion(&preds, &labels);
    Ok(ImportanceReport {
        column_ids: data.column_ids().to_vec(),
        scores,
        mean_increase,
        sd_increase,
        n_trees: forest.trees.len(),
        trees_scored: scored.len(),
        seed,
        mean_oob_fraction: forest.mean_oob_fraction(),
        oob_accuracy,
        oob_sensitivity,
        oob_specificity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn informative_plus_noise(seed: u64, dup: bool) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..150 {
            let l = i % 2 == 0;
            let x = if l { 1.0 } else { -1.0 } + rng.gen_range(-1.2..1.2);
            let mut r = vec![x];
            if dup {
                r.push(x);
            }
            r.push(rng.gen_range(-2.0..2.0));
            rows.push(r);
            labels.push(l);
        }
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn noise_ranks_last() {
        let d = informative_plus_noise(1, false);
        let r = oob_importance(&d, &ForestConfig::importance(), 7, 0).unwrap();
        assert!(r.scores[0] > r.scores[1], "{:?}", r.scores);
        assert_eq!(r.ranking(), vec![0, 1]);
        assert!(r.oob_accuracy > 75.0);
        assert!((0.33..=0.41).contains(&r.mean_oob_fraction));
    }

    #[test]
    fn duplicated_feature_both_positive() {
        let d = informative_plus_noise(2, true);
        let r = oob_importance(&d, &ForestConfig::importance(), 3, 0).unwrap();
        assert!(r.scores[0] > 0.0 && r.scores[1] > 0.0, "{:?}", r.scores);
    }

    #[test]
    fn single_feature() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_rows(&rows, (0..40).map(|i| i >= 20).collect()).unwrap();
        let r = oob_importance(&d, &ForestConfig::importance(), 1, 1).unwrap();
        assert_eq!(r.scores.len(), 1);
        assert_eq!(r.ranking(), vec![0]);
    }

    #[test]
    fn same_seed_same_report_any_workers() {
        let d = informative_plus_noise(3, false);
        let a = oob_importance(&d, &ForestConfig::importance(), 5, 1).unwrap();
        let b = oob_importance(&d, &ForestConfig::importance(), 5, 4).unwrap();
        assert_eq!(a, b);
    }
}
