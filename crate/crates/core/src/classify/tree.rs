use super::dataset::Dataset;
use crate::scalar::Real;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Binary classification tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "snake_case")]
pub enum Node<T: Real> {
    Leaf {
        /// Weighted fraction of deficit rows reaching this leaf.
        value: T,
    },
    Split {
        feature: usize,
        threshold: T,
        left: Box<Node<T>>,
        right: Box<Node<T>>,
    },
}

impl<T: Real> Node<T> {
    pub fn value(&self, row: &[T]) -> T {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, row: &[T]) -> bool {
        self.value(row) > T::lit(0.5)
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Nodes with fewer rows are not split.
    pub min_parent: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Candidate features sampled per node; `None` = all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_parent: 2,
            min_leaf: 1,
            max_depth: None,
            max_features: None,
        }
    }
}

struct Builder<'a, T: Real, R: Rng> {
    data: &'a Dataset<T>,
    weights: &'a [f64],
    params: TreeParams,
    rng: &'a mut R,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

struct Split<T> {
    feature: usize,
    threshold: T,
    impurity: f64,
}

impl<T: Real, R: Rng> Builder<'_, T, R> {
    fn leaf(&self, rows: &[usize]) -> Node<T> {
        let (pos, total) = self.totals(rows);
        let value = if total > 0.0 { pos / total } else { 0.0 };
        Node::Leaf { value: T::lit(value) }
    }

    fn totals(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(p, t), &i| {
            let w = self.weights[i];
            (if self.data.label(i) { p + w } else { p }, t + w)
        })
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Split<T>> {
        let p = self.data.n_cols();
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < p => {
                let mut f = sample(self.rng, p, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let (pos_total, w_total) = self.totals(rows);
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<Split<T>> = None;
        let mut order = rows.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| {
                self.data
                    .value(a, f)
                    .partial_cmp(&self.data.value(b, f))
                    .expect("finite features")
            });
            let (mut pos_l, mut w_l) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let i = order[k];
                let w = self.weights[i];
                w_l += w;
                if self.data.label(i) {
                    pos_l += w;
                }
                let (lo, hi) = (self.data.value(i, f), self.data.value(order[k + 1], f));
                if lo == hi {
                    continue;
                }
                let n_left = k + 1;
                if n_left < min_leaf || order.len() - n_left < min_leaf {
                    continue;
                }
                let w_r = w_total - w_l;
                let imp = w_l * gini(pos_l, w_l) + w_r * gini(pos_total - pos_l, w_r);
                if best.as_ref().is_none_or(|b| imp < b.impurity) {
                    let mut thr = (lo + hi) / T::lit(2.0);
                    if thr >= hi {
                        thr = lo;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold: thr,
                        impurity: imp,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> Node<T> {
        let (pos, total) = self.totals(&rows);
        let parent = total * gini(pos, total);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if rows.len() < self.params.min_parent.max(2) || parent <= 0.0 || !depth_ok {
            return self.leaf(&rows);
        }
        let Some(split) = self.best_split(&rows) else {
            return self.leaf(&rows);
        };
        if split.impurity >= parent - 1e-12 * total {
            return self.leaf(&rows);
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.data.value(i, split.feature) <= split.threshold);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
        }
    }
}

/// Grows a Gini tree on `rows` (duplicates count as separate rows) using
/// per-row `weights` indexed by dataset row.
pub fn build_tree<T: Real, R: Rng>(
    data: &Dataset<T>,
    rows: &[usize],
    weights: &[f64],
    params: TreeParams,
    rng: &mut R,
) -> Node<T> {
    let mut b = Builder {
        data,
        weights,
        params,
        rng,
    };
    if rows.is_empty() {
        return Node::Leaf { value: T::zero() };
    }
    b.grow(rows.to_vec(), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grow(d: &Dataset<f64>, params: TreeParams) -> Node<f64> {
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        let w = vec![1.0; d.n_rows()];
        build_tree(d, &rows, &w, params, &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn single_threshold_stump() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels = (0..10).map(|i| i >= 6).collect();
        let d = Dataset::from_rows(&rows, labels).unwrap();
        let t = grow(&d, TreeParams::default());
        assert_eq!(
            t,
            Node::Split {
                feature: 0,
                threshold: 5.5,
                left: Box::new(Node::Leaf { value: 0.0 }),
                right: Box::new(Node::Leaf { value: 1.0 }),
            }
        );
    }

    #[test]
    fn min_leaf_and_parent_respected() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 20) as f64]).collect();
        let labels: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let d = Dataset::from_rows(&rows, labels).unwrap();
        let params = TreeParams {
            min_parent: 10,
            min_leaf: 5,
            ..Default::default()
        };
        let t = grow(&d, params);
        fn check(n: &Node<f64>, d: &Dataset<f64>, rows: Vec<usize>) {
            match n {
                Node::Leaf { .. } => assert!(rows.len() >= 5),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    assert!(rows.len() >= 10);
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        rows.iter().partition(|&&i| d.value(i, *feature) <= *threshold);
                    check(left, d, l);
                    check(right, d, r);
                }
            }
        }
        check(&t, &d, (0..20).collect());
    }

    #[test]
    fn identical_rows_make_a_leaf() {
        let d = Dataset::from_rows(&vec![vec![1.0]; 5], vec![true, true, true, false, false]).unwrap();
        let t = grow(&d, TreeParams::default());
        assert_eq!(t, Node::Leaf { value: 0.6 });
        assert!(t.predict(&[1.0]));
    }

    #[test]
    fn weights_shift_leaf_values() {
        let d = Dataset::from_rows(&vec![vec![1.0]; 3], vec![true, false, false]).unwrap();
        let t = build_tree(
            &d,
            &[0, 1, 2],
            &[0.8, 0.1, 0.1],
            TreeParams::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(t.predict(&[1.0]));
    }

    #[test]
    fn max_depth_limits_growth() {
        let rows: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64]).collect();
        let labels = (0..32).map(|i| i % 2 == 0).collect();
        let d = Dataset::from_rows(&rows, labels).unwrap();
        assert!(grow(&d, TreeParams::default()).depth() > 2);
        let t = grow(
            &d,
            TreeParams {
                max_depth: Some(2),
                ..Default::default()
            },
        );
        assert!(t.depth() <= 2);
        assert!(t.n_leaves() <= 4);
    }

    #[test]
    fn json_is_nested() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_rows(&rows, vec![false, false, true, true]).unwrap();
        let t = grow(&d, TreeParams::default());
        let js = serde_json::to_value(&t).unwrap();
        assert_eq!(js["split"]["threshold"], 1.5);
        assert_eq!(js["split"]["left"]["leaf"]["value"], 0.0);
        let back: Node<f64> = serde_json::from_value(js).unwrap();
        assert_eq!(back, t);
    }
}
