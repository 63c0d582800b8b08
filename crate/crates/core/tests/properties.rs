use datquant::classify::auc;
use datquant::features::{FeatureTable, IMAGE_FEATURES};
use datquant::io::Group;
use datquant::shape::{asymmetry_index, moments, shape_of_pixels};
use datquant::stats::{ranksum, ranksum_normal};
use datquant::surface::fit_cubic_points;
use proptest::prelude::*;
use std::collections::BTreeSet;

/// Connected blob grown by a random walk of unit steps.
fn blob(steps: &[u8]) -> Vec<(i64, i64)> {
    let mut set = BTreeSet::new();
    let mut p = (0i64, 0i64);
    set.insert(p);
    for s in steps {
        p = match s % 4 {
            0 => (p.0 + 1, p.1),
            1 => (p.0 - 1, p.1),
            2 => (p.0, p.1 + 1),
            _ => (p.0, p.1 - 1),
        };
        set.insert(p);
    }
    let mut v: Vec<_> = set.into_iter().collect();
    v.sort_by_key(|&(x, y)| (y, x));
    v
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn asymmetry_is_antisymmetric(l in 0.01f64..1e3, r in 0.01f64..1e3) {
        let a = asymmetry_index(l, r).unwrap();
        let b = asymmetry_index(r, l).unwrap();
        prop_assert!(close(a, -b, 1e-12));
        prop_assert!(a.abs() <= 2.0);
    }

    #[test]
    fn shape_ignores_translation(steps in prop::collection::vec(any::<u8>(), 5..80), dx in -40i64..40, dy in -40i64..40) {
        let px = blob(&steps);
        let moved: Vec<_> = px.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
        match (shape_of_pixels::<f64>(&px), shape_of_pixels::<f64>(&moved)) {
            (Ok(a), Ok(b)) => {
                let (a, b) = (a.to_array(), b.to_array());
                for k in [0, 1, 2, 3, 5, 7] {
                    prop_assert!(close(a[k], b[k], 1e-9), "{k}: {} vs {}", a[k], b[k]);
                }
                prop_assert!((a[4] - b[4]).abs() < 1e-6);
                if a[3] > 1.0 + 1e-6 {
                    let d = (a[6] - b[6]).rem_euclid(180.0);
                    prop_assert!(d.min(180.0 - d) < 1e-6, "orientation {} vs {}", a[6], b[6]);
                }
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "translation changed validity"),
        }
    }

    #[test]
    fn central_moments_ignore_translation(steps in prop::collection::vec(any::<u8>(), 1..60), dx in -100i64..100) {
        let px = blob(&steps);
        let moved: Vec<_> = px.iter().map(|&(x, y)| (x + dx, y - dx)).collect();
        let a = moments::<f64>(&px);
        let b = moments::<f64>(&moved);
        prop_assert!(close(a.uxx, b.uxx, 1e-9));
        prop_assert!(close(a.uyy, b.uyy, 1e-9));
        prop_assert!(close(a.uxy, b.uxy, 1e-9));
    }

    #[test]
    fn surface_fit_ignores_translation(
        values in prop::collection::vec(0.0f64..1.0, 30),
        dx in -50i64..50,
        dy in -50i64..50,
    ) {
        let px: Vec<(i64, i64)> = (0..30).map(|i| (i % 6, i / 6)).collect();
        let moved: Vec<_> = px.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
        let a = fit_cubic_points(&px, &values).unwrap();
        let b = fit_cubic_points(&moved, &values).unwrap();
        for (u, v) in a.coefficients.iter().zip(b.coefficients) {
            prop_assert!(close(*u, v, 1e-8));
        }
        prop_assert!(a.r2 >= -1e-12 && a.r2 <= 1.0 + 1e-12);
    }

    #[test]
    fn ranksum_is_symmetric(x in prop::collection::vec(-5i32..5, 1..15), y in prop::collection::vec(-5i32..5, 1..15)) {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        for test in [ranksum::<f64>, ranksum_normal::<f64>] {
            let a = test(&xf, &yf).unwrap();
            let b = test(&yf, &xf).unwrap();
            prop_assert!(close(a.p, b.p, 1e-12));
            prop_assert!((0.0..=1.0).contains(&a.p));
            prop_assert!(close(a.u + b.u, (x.len() * y.len()) as f64, 1e-12));
        }
    }

    #[test]
    fn auc_flips_with_the_scores(
        pairs in prop::collection::vec((-20i32..20, any::<bool>()), 2..60)
            .prop_filter("two classes", |v| v.iter().any(|p| p.1) && v.iter().any(|p| !p.1)),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let a = auc(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(close(a + auc(&neg, &labels).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn feature_table_csv_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, IMAGE_FEATURES), 1..6)) {
        let mut t = FeatureTable::<f64>::new(false);
        for (i, r) in rows.into_iter().enumerate() {
            let g = [Group::Normal, Group::Swedd, Group::Pd][i % 3];
            t.push(format!("s{i}"), g, r);
        }
        let back = FeatureTable::<f64>::read_csv(t.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back, t);
    }
}
