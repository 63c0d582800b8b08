use super::dataset::{Dataset, Standardizer};
use super::{Classifier, ClassifyError};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Relative variance floor, scaled by each feature's pooled variance.
pub const VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GnbModel<T: Real> {
    pub standardizer: Standardizer<T>,
    /// Index 0 = no deficit, 1 = deficit.
    pub log_prior: [T; 2],
    pub mean: [Vec<T>; 2],
    pub var: [Vec<T>; 2],
}

pub fn train_gnb<T: Real>(data: &Dataset<T>) -> Result<GnbModel<T>, ClassifyError> {
    data.require_both_classes()?;
    let standardizer = Standardizer::fit(data);
    let x = standardizer.transform(data);
    let p = x.n_cols();
    let n = x.n_rows();

    let mut count = [0usize; 2];
    let mut mean = [vec![T::zero(); p], vec![T::zero(); p]];
    for i in 0..n {
        let c = usize::from(x.label(i));
        count[c] += 1;
        for (m, &v) in mean[c].iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for c in 0..2 {
        let k = T::from_usize_lossy(count[c]);
        mean[c].iter_mut().for_each(|m| *m /= k);
    }
    let mut var = [vec![T::zero(); p], vec![T::zero(); p]];
    let mut global_mean = vec![T::zero(); p];
    for i in 0..n {
        let c = usize::from(x.label(i));
        for j in 0..p {
            let d = x.value(i, j) - mean[c][j];
            var[c][j] += d * d;
            global_mean[j] += x.value(i, j);
        }
    }
    let nt = T::from_usize_lossy(n);
    global_mean.iter_mut().for_each(|m| *m /= nt);
    let mut global_var = vec![T::zero(); p];
    for i in 0..n {
        for j in 0..p {
            let d = x.value(i, j) - global_mean[j];
            global_var[j] += d * d;
        }
    }
    for c in 0..2 {
        let k = T::from_usize_lossy(count[c]);
        for j in 0..p {
            let floor = T::lit(VAR_FLOOR) * (global_var[j] / nt + T::lit(1e-12));
            var[c][j] = (var[c][j] / k).max(floor);
        }
    }
    let log_prior = [
        (T::from_usize_lossy(count[0]) / nt).ln(),
        (T::from_usize_lossy(count[1]) / nt).ln(),
    ];
    Ok(GnbModel {
        standardizer,
        log_prior,
        mean,
        var,
    })
}

impl<T: Real> GnbModel<T> {
    fn log_joint(&self, z: &[T], c: usize) -> T {
        let two_pi = T::lit(std::f64::consts::TAU);
        let half = T::lit(0.5);
        self.log_prior[c]
            + z.iter()
                .zip(self.mean[c].iter().zip(&self.var[c]))
                .map(|(&v, (&m, &s2))| -half * ((two_pi * s2).ln() + (v - m) * (v - m) / s2))
                .sum::<T>()
    }

    /// `log P(deficit | x) - log P(no deficit | x)`.
    pub fn log_odds(&self, row: &[T]) -> T {
        let z = self.standardizer.transform_row(row);
        self.log_joint(&z, 1) - self.log_joint(&z, 0)
    }
}

impl<T: Real> Classifier<T> for GnbModel<T> {
    fn score(&self, row: &[T]) -> T {
        self.log_odds(row)
    }

    fn predict(&self, row: &[T]) -> bool {
        self.log_odds(row) > T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn clusters(seed: u64, n: usize, sep: f64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 1;
            let c = if pos { sep } else { -sep };
            rows.push(vec![c + noise.sample(&mut rng)]);
            labels.push(pos);
        }
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn separated_clusters_holdout() {
        let train = clusters(1, 200, 5.0);
        let test = clusters(2, 2000, 5.0);
        let m = train_gnb(&train).unwrap();
        let correct = (0..test.n_rows())
            .filter(|&i| m.predict(test.row(i)) == test.label(i))
            .count();
        assert!(correct as f64 / 2000.0 > 0.99);
    }

    #[test]
    fn symmetric_boundary_at_midpoint() {
        let rows: Vec<Vec<f64>> = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0].iter().map(|&v| vec![v + 10.0]).collect();
        let d = Dataset::from_rows(&rows, vec![false, false, false, true, true, true]).unwrap();
        let m = train_gnb(&d).unwrap();
        assert!(m.log_odds(&[10.0]).abs() < 1e-12);
        assert!(!m.predict(&[10.0 - 1e-6]));
        assert!(m.predict(&[10.0 + 1e-6]));
    }

    #[test]
    fn constant_feature_is_harmless() {
        let rows: Vec<Vec<f64>> = vec![vec![0.0, 4.0], vec![1.0, 4.0], vec![5.0, 4.0], vec![6.0, 4.0]];
        let d = Dataset::from_rows(&rows, vec![false, false, true, true]).unwrap();
        let m = train_gnb(&d).unwrap();
        assert!(m.var[0].iter().chain(&m.var[1]).all(|&v| v > 0.0));
        assert!(m.log_odds(&[0.5, 4.0]).is_finite());
        assert!(!m.predict(&[0.5, 4.0]) && m.predict(&[5.5, 4.0]));
    }

    #[test]
    fn affine_rescaling_keeps_predictions() {
        let train = clusters(3, 100, 0.7);
        let test = clusters(4, 300, 0.7);
        let scale = |d: &Dataset<f64>| {
            let rows: Vec<Vec<f64>> = (0..d.n_rows()).map(|i| vec![d.value(i, 0) * 37.0 - 5.0]).collect();
            Dataset::from_rows(&rows, d.labels().to_vec()).unwrap()
        };
        let (m1, m2) = (train_gnb(&train).unwrap(), train_gnb(&scale(&train)).unwrap());
        let st = scale(&test);
        for i in 0..test.n_rows() {
            assert_eq!(m1.predict(test.row(i)), m2.predict(st.row(i)));
        }
    }

    #[test]
    fn priors_follow_frequencies() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_rows(&rows, vec![false, true, true, true]).unwrap();
        let m = train_gnb(&d).unwrap();
        assert!((m.log_prior[1] - 0.75f64.ln()).abs() < 1e-12);
        assert!(train_gnb(&d.with_labels(vec![true; 4])).is_err());
    }
}
