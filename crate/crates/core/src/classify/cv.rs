use super::dataset::Dataset;
use super::metrics::{auc, confusion};
use super::model::{train, ClassifierConfig};
use super::rng::{derive, stream, TAG_CV_MODEL, TAG_CV_SPLIT};
use super::{Classifier, ClassifyError};
use crate::scalar::{mean, sample_sd, Real};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Worker threads; 0 = rayon default.
    pub workers: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 10,
            repeats: 100,
            seed: 0,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values).unwrap_or(f64::NAN),
            sd: sample_sd(values),
        }
    }
}

/// Repeated stratified k-fold results. Accuracy, sensitivity and specificity
/// are percentages; AUC is a fraction. Each sd is taken over the per-repeat
/// values, which pool the out-of-fold predictions of that repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub classifier: String,
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub n_rows: usize,
    pub n_positive: usize,
    pub sd_over: String,
    pub accuracy: MetricSummary,
    pub sensitivity: MetricSummary,
    pub specificity: MetricSummary,
    pub auc: MetricSummary,
    pub per_repeat_accuracy: Vec<f64>,
}

/// Fold index of every row for one shuffle: each class is shuffled, the
/// positive list is followed by the negative list, and position `i` of that
/// sequence goes to fold `i mod k`.
pub fn fold_assignment<R: rand::Rng>(labels: &[bool], k: usize, rng: &mut R) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let mut fold = vec![0; labels.len()];
    for (slot, &i) in pos.iter().chain(&neg).enumerate() {
        fold[i] = slot % k;
    }
    fold
}

fn check(data: &Dataset<impl Real>, cv: &CvConfig) -> Result<(), ClassifyError> {
    if cv.k < 2 || cv.repeats == 0 {
        return Err(ClassifyError::InvalidConfig("need k >= 2 and repeats >= 1".into()));
    }
    let pos = data.n_positive();
    for (class, count) in [("deficit", pos), ("no_deficit", data.n_rows() - pos)] {
        if count < cv.k {
            return Err(ClassifyError::TooFewPerClass {
                class: class.into(),
                count,
                k: cv.k,
            });
        }
    }
    Ok(())
}

pub(crate) fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
}

pub fn cross_validate<T: Real>(
    data: &Dataset<T>,
    classifier: &ClassifierConfig,
    cv: &CvConfig,
) -> Result<CvReport, ClassifyError> {
    check(data, cv)?;
    let n = data.n_rows();
    let folds: Vec<Vec<usize>> = (0..cv.repeats)
        .map(|r| fold_assignment(data.labels(), cv.k, &mut stream(cv.seed, &[TAG_CV_SPLIT, r as u64])))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cv.repeats)
        .flat_map(|r| (0..cv.k).map(move |f| (r, f)))
        .collect();

    let run = |&(r, f): &(usize, usize)| -> Result<Vec<(usize, f64, bool)>, ClassifyError> {
        let assign = &folds[r];
        let train_idx: Vec<usize> = (0..n).filter(|&i| assign[i] != f).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| assign[i] == f).collect();
        let seed = derive(cv.seed, &[TAG_CV_MODEL, r as u64, f as u64]);
        let model = train(classifier, &data.subset(&train_idx), seed)?;
        Ok(test_idx
            .into_iter()
            .map(|i| {
                let row = data.row(i);
                (i, model.score(row).as_f64(), model.predict(row))
            })
            .collect())
    };
    let results: Vec<Result<Vec<(usize, f64, bool)>, ClassifyError>> =
        pool(cv.workers).install(|| jobs.par_iter().map(run).collect());

    let mut acc = Vec::with_capacity(cv.repeats);
    let mut sens = Vec::with_capacity(cv.repeats);
    let mut spec = Vec::with_capacity(cv.repeats);
    let mut aucs = Vec::with_capacity(cv.repeats);
    let mut results = results.into_iter();
    for _ in 0..cv.repeats {
        let mut scores = vec![0.0; n];
        let mut preds = vec![false; n];
        for _ in 0..cv.k {
            for (i, s, p) in results.next().expect("one result per job")? {
                scores[i] = s;
                preds[i] = p;
            }
        }
        let (a, se, sp) = confusion(&preds, data.labels());
        acc.push(a);
        sens.push(se.expect("both classes present"));
        spec.push(sp.expect("both classes present"));
        aucs.push(auc(&scores, data.labels())?);
    }
    Ok(CvReport {
        classifier: classifier.name().into(),
        k: cv.k,
        repeats: cv.repeats,
        seed: cv.seed,
        n_rows: n,
        n_positive: data.n_positive(),
        sd_over: "repeats".into(),
        accuracy: MetricSummary::of(&acc),
        sensitivity: MetricSummary::of(&sens),
        specificity: MetricSummary::of(&spec),
        auc: MetricSummary::of(&aucs),
        per_repeat_accuracy: acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::SvmConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fold_sizes_and_stratification() {
        let labels: Vec<bool> = (0..103).map(|i| i < 37).collect();
        let fold = fold_assignment(&labels, 10, &mut ChaCha8Rng::seed_from_u64(0));
        let mut sizes = [0usize; 10];
        let mut pos = [0usize; 10];
        for (i, &f) in fold.iter().enumerate() {
            sizes[f] += 1;
            pos[f] += usize::from(labels[i]);
        }
        let mut sorted = sizes.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, [10, 10, 10, 10, 10, 10, 10, 11, 11, 11]);
        assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
    }

    fn separable(n: usize) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![if i % 3 == 0 { 3.0 } else { -3.0 } + rng.gen_range(-0.5..0.5)])
            .collect();
        Dataset::from_rows(&rows, (0..n).map(|i| i % 3 == 0).collect()).unwrap()
    }

    #[test]
    fn separable_is_perfect() {
        let cv = CvConfig {
            repeats: 3,
            ..Default::default()
        };
        for cfg in ClassifierConfig::all() {
            let r = cross_validate(&separable(60), &cfg, &cv).unwrap();
            assert_eq!(r.accuracy, MetricSummary { mean: 100.0, sd: 0.0 }, "{}", r.classifier);
            assert_eq!(r.auc.mean, 1.0);
        }
    }

    #[test]
    fn too_few_per_class() {
        let d = separable(20);
        let cv = CvConfig {
            k: 10,
            repeats: 1,
            ..Default::default()
        };
        assert!(matches!(
            cross_validate(&d, &ClassifierConfig::NaiveBayes, &cv),
            Err(ClassifyError::TooFewPerClass { count: 7, .. })
        ));
    }

    #[test]
    fn single_repeat_has_zero_sd() {
        let cv = CvConfig {
            k: 5,
            repeats: 1,
            seed: 9,
            workers: 2,
        };
        let r = cross_validate(&separable(40), &ClassifierConfig::Svm(SvmConfig::default()), &cv).unwrap();
        assert_eq!(r.accuracy.sd, 0.0);
        assert_eq!(r.auc.sd, 0.0);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let labels = rows.iter().map(|r| r[0] + 0.3 * rng.gen::<f64>() > 0.6).collect();
        let d = Dataset::from_rows(&rows, labels).unwrap();
        let run = |workers| {
            let cv = CvConfig {
                k: 5,
                repeats: 4,
                seed: 1,
                workers,
            };
            cross_validate(&d, &ClassifierConfig::Forest(Default::default()), &cv).unwrap()
        };
        assert_eq!(run(1), run(3));
    }
}
