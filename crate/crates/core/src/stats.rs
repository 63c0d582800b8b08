//! Wilcoxon rank-sum testing and the per-group feature summary.

use crate::io::Group;
use crate::scalar::{mean, sample_sd, Real};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("group {0} has no subjects")]
    EmptyGroup(String),
    #[error("feature table has {rows} rows but {labels} labels")]
    ShapeMismatch { rows: usize, labels: usize },
}

/// Largest pooled size for which the exact null distribution is enumerated.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    /// Rank sum of the first sample.
    pub w: f64,
    /// Continuity-corrected z (normal approximation only).
    pub z: Option<f64>,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`, plus the tie-correction sum `sum(t^3 - t)`.
pub fn midranks<T: Real>(values: &[T]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Number of `k`-subsets of ranks `1..=n` with each possible rank sum.
fn subset_sum_counts(n: usize, k: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    // counts[j][s]: j ranks chosen so far with sum s
    let mut counts = vec![vec![0.0f64; max + 1]; k + 1];
    counts[0][0] = 1.0;
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            for s in (r..=max).rev() {
                counts[j][s] += counts[j - 1][s - r];
            }
        }
    }
    counts.swap_remove(k)
}

/// Two-sided Wilcoxon rank-sum test of `x` against `y`.
///
/// Tie-free samples with `|x| + |y| <= 12` get the exact permutation p-value;
/// otherwise the normal approximation with tie-corrected variance and a 0.5
/// continuity correction is used.
pub fn ranksum<T: Real>(x: &[T], y: &[T]) -> Result<RankSum, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (n, m) = (x.len(), y.len());
    let pooled: Vec<T> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..n].iter().sum();
    let u = w - (n * (n + 1)) as f64 / 2.0;
    let total = n + m;

    if total <= EXACT_MAX_N && ties == 0.0 {
        let counts = subset_sum_counts(total, n);
        let all: f64 = counts.iter().sum();
        let wi = w.round() as usize;
        let lower: f64 = counts[..=wi].iter().sum();
        let upper: f64 = counts[wi..].iter().sum();
        let p = (2.0 * lower.min(upper) / all).min(1.0);
        return Ok(RankSum {
            u,
            w,
            z: None,
            p,
            exact: true,
        });
    }

    ranksum_normal(x, y)
}

/// Rank-sum test by the normal approximation alone, whatever the sample size.
pub fn ranksum_normal<T: Real>(x: &[T], y: &[T]) -> Result<RankSum, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (n, m) = (x.len(), y.len());
    let pooled: Vec<T> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..n].iter().sum();
    let u = w - (n * (n + 1)) as f64 / 2.0;
    let (nf, mf, nt) = (n as f64, m as f64, (n + m) as f64);
    let mu = nf * mf / 2.0;
    let var = nf * mf / 12.0 * ((nt + 1.0) - ties / (nt * (nt - 1.0)));
    if !(var > 0.0) {
        return Ok(RankSum {
            u,
            w,
            z: Some(0.0),
            p: 1.0,
            exact: false,
        });
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(RankSum {
        u,
        w,
        z: Some(z),
        p,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

fn mean_sd<T: Real>(v: &[T]) -> Option<MeanSd> {
    Some(MeanSd {
        mean: mean(v)?.as_f64(),
        sd: sample_sd(v).as_f64(),
        n: v.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub normal: Option<MeanSd>,
    pub swedd: Option<MeanSd>,
    pub pd: Option<MeanSd>,
    /// Normal vs SWEDD; absent when either group is empty.
    pub p1: Option<f64>,
    /// PD vs pooled Normal/SWEDD.
    pub p2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub features: Vec<FeatureSummary>,
}

/// Per-feature group statistics. `rows[i][j]` is feature `j` of subject `i`.
pub fn group_summary<T: Real>(
    rows: &[Vec<T>],
    labels: &[Group],
    names: &[String],
) -> Result<GroupSummary, StatsError> {
    if rows.len() != labels.len() {
        return Err(StatsError::ShapeMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let present = |g: Group| labels.contains(&g);
    if !present(Group::Pd) {
        return Err(StatsError::EmptyGroup("PD".into()));
    }
    if !present(Group::Normal) && !present(Group::Swedd) {
        return Err(StatsError::EmptyGroup("Normal/SWEDD".into()));
    }
    let column = |j: usize, keep: &dyn Fn(Group) -> bool| -> Vec<T> {
        rows.iter()
            .zip(labels)
            .filter(|(_, &l)| keep(l))
            .map(|(r, _)| r[j])
            .collect()
    };
    let mut features = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let normal = column(j, &|l| l == Group::Normal);
        let swedd = column(j, &|l| l == Group::Swedd);
        let pd = column(j, &|l| l == Group::Pd);
        let rest = column(j, &|l| l != Group::Pd);
        let p1 = if normal.is_empty() || swedd.is_empty() {
            None
        } else {
            Some(ranksum(&normal, &swedd)?.p)
        };
        let p2 = ranksum(&pd, &rest)?.p;
        features.push(FeatureSummary {
            name: name.clone(),
            normal: mean_sd(&normal),
            swedd: mean_sd(&swedd),
            pd: mean_sd(&pd),
            p1,
            p2,
        });
    }
    Ok(GroupSummary { features })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropped {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScreen {
    pub alpha: f64,
    pub kept: Vec<usize>,
    pub dropped: Vec<Dropped>,
}

/// Keeps features whose PD vs Normal/SWEDD p-value is below `alpha`.
pub fn screen_features(summary: &GroupSummary, alpha: f64) -> FeatureScreen {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, f) in summary.features.iter().enumerate() {
        if f.p2 < alpha {
            kept.push(i);
        } else {
            dropped.push(Dropped {
                index: i,
                reason: format!("p2 = {:.4} >= {alpha}", f.p2),
            });
        }
    }
    FeatureScreen {
        alpha,
        kept,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact two-sided p by listing every assignment of pooled ranks to `x`.
    fn enumerate_p(x: &[f64], y: &[f64]) -> f64 {
        let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
        let (ranks, _) = midranks(&pooled);
        let n = x.len();
        let observed: f64 = ranks[..n].iter().sum();
        let total = pooled.len();
        let (mut lo, mut hi, mut all) = (0u64, 0u64, 0u64);
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let s: f64 = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            all += 1;
            if s <= observed + 1e-9 {
                lo += 1;
            }
            if s >= observed - 1e-9 {
                hi += 1;
            }
        }
        (2.0 * lo.min(hi) as f64 / all as f64).min(1.0)
    }

    #[test]
    fn exact_small_case() {
        let r = ranksum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!(r.exact);
        assert!((r.p - 0.10).abs() < 1e-12);
        assert!((enumerate_p(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]) - 0.10).abs() < 1e-12);
        assert_eq!(r.u, 0.0);
    }

    #[test]
    fn identical_samples_give_one() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = ranksum(&x, &x).unwrap();
        assert!(!r.exact);
        assert_eq!(r.z, Some(0.0));
        assert_eq!(r.p, 1.0);
        assert_eq!(ranksum(&[2.0; 5], &[2.0; 7]).unwrap().p, 1.0);
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(1..=(12 - n).min(6));
            let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.gen()).collect();
            let r = ranksum(&x, &y).unwrap();
            assert!(r.exact);
            assert!((r.p - enumerate_p(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn published_critical_values() {
        // n = m = 4: W = 10 has one-sided P = 1/70; n = m = 5: W = 15 -> 1/252
        let r = ranksum(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]).unwrap();
        assert!((r.p - 2.0 / 70.0).abs() < 1e-12);
        let r = ranksum(&[1.0, 2.0, 3.0, 4.0, 5.0], &[6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        assert!((r.p - 2.0 / 252.0).abs() < 1e-12);
        // n = m = 5, W = 19: P(W <= 19) = 12/252
        let r = ranksum(&[1.0, 2.0, 3.0, 4.0, 9.0], &[5.0, 6.0, 7.0, 8.0, 10.0]).unwrap();
        assert!((r.p - 2.0 * 12.0 / 252.0).abs() < 1e-12, "{}", r.p);
    }

    #[test]
    fn symmetric_and_rank_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.gen_range(1..30);
            let m = rng.gen_range(1..30);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0f64).round()).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..4.0f64).round()).collect();
            let a = ranksum(&x, &y).unwrap();
            let b = ranksum(&y, &x).unwrap();
            assert_eq!(a.p, b.p);
            let tx: Vec<f64> = x.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
            let ty: Vec<f64> = y.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
            assert!((ranksum(&tx, &ty).unwrap().p - a.p).abs() < 1e-12);
        }
    }

    #[test]
    fn approximation_close_to_exact_at_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() + 0.3).collect();
            let exact = enumerate_p(&x, &y);
            let approx = ranksum_normal(&x, &y).unwrap().p;
            assert!((exact - approx).abs() < 0.02, "{exact} {approx}");
        }
    }

    #[test]
    fn empty_sample() {
        assert_eq!(ranksum::<f64>(&[], &[1.0]), Err(StatsError::EmptySample));
    }

    fn labels(n: usize, m: usize, k: usize) -> Vec<Group> {
        let mut l = vec![Group::Normal; n];
        l.extend(vec![Group::Swedd; m]);
        l.extend(vec![Group::Pd; k]);
        l
    }

    #[test]
    fn summary_identical_groups() {
        let base = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let rows: Vec<Vec<f64>> = base.iter().chain(&base).chain(&base).map(|&v| vec![v]).collect();
        let s = group_summary(&rows, &labels(6, 6, 6), &["f".to_string()]).unwrap();
        assert!(s.features[0].p1.unwrap() > 0.99);
        assert!(s.features[0].p2 > 0.99);
        let n = s.features[0].normal.unwrap();
        assert_eq!(n.mean, 3.5);
        assert_eq!(n.n, 6);
    }

    #[test]
    fn summary_shifted_pd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        for _ in 0..60 {
            rows.push(vec![rng.gen_range(-1.0..1.0)]);
        }
        for _ in 0..30 {
            rows.push(vec![rng.gen_range(-1.0..1.0) + 10.0 * 0.577]);
        }
        let s = group_summary(&rows, &labels(40, 20, 30), &["f".into()]).unwrap();
        assert!(s.features[0].p2 < 1e-6);
        let screen = screen_features(&s, 0.05);
        assert_eq!(screen.kept, vec![0]);
    }

    #[test]
    fn summary_errors() {
        let rows = vec![vec![1.0], vec![2.0]];
        assert_eq!(
            group_summary(&rows, &[Group::Normal, Group::Swedd], &["f".into()]),
            Err(StatsError::EmptyGroup("PD".into()))
        );
        assert!(matches!(
            group_summary(&rows, &[Group::Pd], &["f".into()]),
            Err(StatsError::ShapeMismatch { .. })
        ));
        let s = group_summary(&rows, &[Group::Normal, Group::Pd], &["f".into()]).unwrap();
        assert_eq!(s.features[0].p1, None);
        assert!(s.features[0].swedd.is_none());
    }

    fn summary_with_p2(ps: &[f64]) -> GroupSummary {
        GroupSummary {
            features: ps
                .iter()
                .enumerate()
                .map(|(i, &p)| FeatureSummary {
                    name: format!("f{i}"),
                    normal: None,
                    swedd: None,
                    pd: None,
                    p1: None,
                    p2: p,
                })
                .collect(),
        }
    }

    #[test]
    fn screening() {
        let all = screen_features(&summary_with_p2(&[0.0; 4]), 0.05);
        assert_eq!(all.kept, vec![0, 1, 2, 3]);
        assert!(all.dropped.is_empty());
        let none = screen_features(&summary_with_p2(&[1.0; 3]), 0.05);
        assert!(none.kept.is_empty());
        assert_eq!(none.dropped.len(), 3);
        let mixed = screen_features(&summary_with_p2(&[0.01, 0.2, 0.049]), 0.05);
        assert_eq!(mixed.kept, vec![0, 2]);
        assert_eq!(mixed.dropped[0].index, 1);
    }
}
