use super::ClassifyError;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Row-major feature matrix with binary labels (`true` = deficit).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    n_rows: usize,
    n_cols: usize,
    values: Vec<T>,
    labels: Vec<bool>,
    column_ids: Vec<String>,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        rows: &[Vec<T>],
        labels: Vec<bool>,
        column_ids: Vec<String>,
    ) -> Result<Self, ClassifyError> {
        if rows.is_empty() {
            return Err(ClassifyError::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(ClassifyError::InvalidConfig(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let n_cols = column_ids.len();
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(ClassifyError::RaggedRow {
                    row: i,
                    expected: n_cols,
                    found: r.len(),
                });
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(ClassifyError::NonFinite { row: i, col: j });
            }
            values.extend_from_slice(r);
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            values,
            labels,
            column_ids,
        })
    }

    /// Builds a dataset with generated column ids `f0, f1, ...`.
    pub fn from_rows(rows: &[Vec<T>], labels: Vec<bool>) -> Result<Self, ClassifyError> {
        let p = rows.first().map_or(0, Vec::len);
        Self::new(rows, labels, (0..p).map(|j| format!("f{j}")).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn value(&self, i: usize, j: usize) -> T {
        self.values[i * self.n_cols + j]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn column_ids(&self) -> &[String] {
        &self.column_ids
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.n_positive();
        pos > 0 && pos < self.n_rows
    }

    /// Rows `idx` (duplicates allowed) as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            values,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            column_ids: self.column_ids.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let r = self.row(i);
            values.extend(cols.iter().map(|&j| r[j]));
        }
        Self {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            values,
            labels: self.labels.clone(),
            column_ids: cols.iter().map(|&j| self.column_ids[j].clone()).collect(),
        }
    }

    pub fn with_labels(&self, labels: Vec<bool>) -> Self {
        assert_eq!(labels.len(), self.n_rows);
        Self {
            labels,
            ..self.clone()
        }
    }

    pub(crate) fn require_both_classes(&self) -> Result<(), ClassifyError> {
        if self.has_both_classes() {
            Ok(())
        } else {
            Err(ClassifyError::SingleClass)
        }
    }
}

/// Per-column z-scoring fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<T: Real> {
    pub mean: Vec<T>,
    pub sd: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    /// Population mean/sd per column; zero-variance columns get sd 1.
    pub fn fit(data: &Dataset<T>) -> Self {
        let n = T::from_usize_lossy(data.n_rows());
        let p = data.n_cols();
        let mut mean = vec![T::zero(); p];
        for i in 0..data.n_rows() {
            for (m, &v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); p];
        for i in 0..data.n_rows() {
            for ((s, &v), &m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > T::zero() {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Self { mean, sd }
    }

    pub fn transform_row(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, data: &Dataset<T>) -> Dataset<T> {
        let mut out = data.clone();
        let p = data.n_cols();
        for (k, v) in out.values.iter_mut().enumerate() {
            let j = k % p;
            *v = (*v - self.mean[j]) / self.sd[j];
        }
        out
    }
}
