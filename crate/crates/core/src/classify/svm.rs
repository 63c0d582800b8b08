use super::dataset::{Dataset, Standardizer};
use super::{Classifier, ClassifyError};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: f64,
    /// Stop once the maximal KKT violation falls below this.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 0.0625,
            tolerance: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.c > 0.0) || !(self.gamma > 0.0) || !(self.tolerance > 0.0) {
            return Err(ClassifyError::InvalidConfig(
                "svm c, gamma and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SvmModel<T: Real> {
    pub gamma: T,
    pub standardizer: Standardizer<T>,
    pub support_vectors: Vec<Vec<T>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<T>,
    pub bias: T,
    pub iterations: usize,
}

fn rbf<T: Real>(gamma: T, a: &[T], b: &[T]) -> T {
    let d2: T = a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum();
    (-gamma * d2).exp()
}

/// Trains a C-SVM with an RBF kernel on z-scored features using SMO with
/// second-order working-set selection. Pivot ties go to the lowest index.
pub fn train_svm<T: Real>(data: &Dataset<T>, cfg: &SvmConfig) -> Result<SvmModel<T>, ClassifyError> {
    cfg.validate()?;
    data.require_both_classes()?;
    let standardizer = Standardizer::fit(data);
    let x = standardizer.transform(data);
    let n = x.n_rows();
    let gamma = T::lit(cfg.gamma);
    let c = T::lit(cfg.c);
    let eps = T::lit(cfg.tolerance);
    let tau = T::lit(1e-12);

    let mut k = vec![T::zero(); n * n];
    for i in 0..n {
        k[i * n + i] = T::one();
        for j in 0..i {
            let v = rbf(gamma, x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let y: Vec<T> = x
        .labels()
        .iter()
        .map(|&l| if l { T::one() } else { -T::one() })
        .collect();
    let mut alpha = vec![T::zero(); n];
    // gradient of 0.5 a'Qa - e'a
    let mut g = vec![-T::one(); n];

    let in_up = |a: T, yt: T| (yt > T::zero() && a < c) || (yt < T::zero() && a > T::zero());
    let in_low = |a: T, yt: T| (yt > T::zero() && a > T::zero()) || (yt < T::zero() && a < c);

    let mut iter = 0;
    loop {
        let mut gmax = T::neg_infinity();
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * g[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmin = T::infinity();
        let mut j_sel = None;
        let mut obj_min = T::infinity();
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * g[t];
                if v < gmin {
                    gmin = v;
                }
                let b = gmax - v;
                if b > T::zero() {
                    let mut a = k[i * n + i] + k[t * n + t] - T::lit(2.0) * k[i * n + t];
                    if a <= T::zero() {
                        a = tau;
                    }
                    let obj = -(b * b) / a;
                    if obj < obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            break;
        };
        if gmax - gmin < eps {
            break;
        }
        if iter >= cfg.max_iter {
            return Err(ClassifyError::NonConvergence(cfg.max_iter));
        }
        iter += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let mut quad = k[i * n + i] + k[j * n + j] - T::lit(2.0) * k[i * n + j];
        if quad <= T::zero() {
            quad = tau;
        }
        let (mut ai, mut aj) = (ai_old, aj_old);
        if y[i] != y[j] {
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > T::zero() {
                if aj < T::zero() {
                    aj = T::zero();
                    ai = diff;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = -diff;
            }
            if diff > T::zero() {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < T::zero() {
                aj = T::zero();
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (dai, daj) = (ai - ai_old, aj - aj_old);
        for t in 0..n {
            g[t] += y[t] * (y[i] * k[t * n + i] * dai + y[j] * k[t * n + j] * daj);
        }
    }

    // bias: average over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (T::infinity(), T::neg_infinity());
    let (mut sum_free, mut n_free) = (T::zero(), 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= T::zero();
        if at_upper {
            if y[t] < T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / T::from_usize_lossy(n_free)
    } else {
        (ub + lb) / T::lit(2.0)
    };

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..n {
        if alpha[t] > T::zero() {
            support_vectors.push(x.row(t).to_vec());
            dual_coef.push(alpha[t] * y[t]);
        }
    }
    Ok(SvmModel {
        gamma,
        standardizer,
        support_vectors,
        dual_coef,
        bias: -rho,
        iterations: iter,
    })
}

impl<T: Real> SvmModel<T> {
    pub fn decision_value(&self, row: &[T]) -> T {
        let z = self.standardizer.transform_row(row);
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, &a)| a * rbf(self.gamma, sv, &z))
            .sum::<T>()
            + self.bias
    }
}

impl<T: Real> Classifier<T> for SvmModel<T> {
    fn score(&self, row: &[T]) -> T {
        self.decision_value(row)
    }

    fn predict(&self, row: &[T]) -> bool {
        self.decision_value(row) > T::zero()
    }
}
