//! Prints cohort feature statistics of the default phantoms next to the
//! calibration bands, plus a quick classifier and importance check.
//!
//! cargo run --release -p datquant --example phantom_calibration [n_normal] [seed]
//!
//! Cohorts are n Normal, 2n/5 SWEDD and 2n PD.
//!
//! `NORMAL_MORPHOLOGY` and `PD_MORPHOLOGY` may hold JSON objects whose fields
//! override the defaults.

use datquant::classify::{cross_validate, oob_importance, ClassifierConfig, CvConfig, Dataset, ForestConfig};
use datquant::features::{feature_kind, sbr_features, FeatureKind, FEATURE_NAMES, IMAGE_FEATURES};
use datquant::io::Group;
use datquant::phantom::{generate_cohort, synthetic_sbr, Morphology, PhantomSpec, SLICES};
use datquant::pipeline::{volume_features, ExtractOptions};
use datquant::preprocess::{mean_image, SliceWindow};
use datquant::scalar::{mean, sample_sd};
use datquant::segment::threshold_mask;
use datquant::stats::ranksum;

const BANDS: [(&str, (f64, f64), (f64, f64)); 9] = [
    ("area", (84.4, 160.0), (36.6, 107.0)),
    ("major_axis_length", (13.64, 19.52), (7.88, 14.24)),
    ("aspect_ratio", (1.46, 1.98), (1.05, 1.65)),
    ("eccentricity", (0.75, 0.87), (0.43, 0.83)),
    ("orientation", (33.7, 65.2), (-5.0, 64.3)),
    ("roundness", (0.80, 0.96), (0.91, 1.15)),
    ("p11", (-0.15, -0.07), (-0.07, 0.01)),
    ("p20", (-0.13, -0.09), (-0.09, -0.05)),
    ("p02", (-0.13, -0.09), (-0.11, -0.03)),
];

fn morphology(group: Group) -> Morphology {
    let var = if group.is_deficit() { "PD_MORPHOLOGY" } else { "NORMAL_MORPHOLOGY" };
    let mut base = serde_json::to_value(Morphology::for_group(group)).unwrap();
    if let Ok(text) = std::env::var(var) {
        let patch: serde_json::Value = serde_json::from_str(&text).expect("morphology json");
        for (k, v) in patch.as_object().expect("json object") {
            base[k] = v.clone();
        }
    }
    serde_json::from_value(base).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let opts = ExtractOptions {
        window: SliceWindow::new(0, SLICES - 1),
        ..Default::default()
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut thresholds = [Vec::new(), Vec::new(), Vec::new()];
    for (gi, group) in Group::ALL.into_iter().enumerate() {
        let count = match group {
            Group::Normal => n,
            Group::Swedd => 2 * n / 5,
            Group::Pd => 2 * n,
        };
        let spec = PhantomSpec {
            morphology: morphology(group),
            ..PhantomSpec::calibrated(group, count, seed)
        };
        let cohort = generate_cohort::<f64>(&spec).unwrap();
        if let Some(s) = cohort.first().filter(|_| std::env::var("SHOW_MASK").is_ok()) {
            let img = mean_image(&s.volume, opts.window).unwrap();
            let f = volume_features(&s.volume, None, &opts).unwrap();
            let mask = threshold_mask(&img, f.threshold);
            println!("{group} example, threshold {:.2}", f.threshold);
            for y in 25..80 {
                let line: String = (15..76).map(|x| if mask.get(x, y) { '#' } else { '.' }).collect();
                println!("  {line}");
            }
        }
        for (i, s) in cohort.iter().enumerate() {
            match volume_features(&s.volume, None, &opts) {
                Ok(f) => {
                    thresholds[gi].push(f.threshold);
                    let mut v = f.values.to_vec();
                    v.extend(sbr_features(&synthetic_sbr(&s.truth, seed, i as u64)).unwrap());
                    rows.push(v);
                    labels.push(group);
                }
                Err(e) => println!("{} failed: {e}", s.truth.subject_id),
            }
        }
    }
    for (g, t) in Group::ALL.iter().zip(&thresholds) {
        println!("threshold {g}: {:.3} +- {:.3}", mean(t).unwrap_or(f64::NAN), sample_sd(t));
    }

    let col = |j: usize, g: Group| -> Vec<f64> {
        rows.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(r, _)| r[j]).collect()
    };
    println!("{:<24}{:>18}{:>18}{:>18}{:>10}{:>10}", "feature", "normal", "swedd", "pd", "p1", "p2");
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        let (a, b, c) = (col(j, Group::Normal), col(j, Group::Swedd), col(j, Group::Pd));
        let rest: Vec<f64> = a.iter().chain(&b).copied().collect();
        let fmt = |v: &[f64]| format!("{:.3}+-{:.3}", mean(v).unwrap_or(f64::NAN), sample_sd(v));
        println!(
            "{:<24}{:>18}{:>18}{:>18}{:>10.3}{:>10.2e}",
            name,
            fmt(&a),
            fmt(&b),
            fmt(&c),
            ranksum(&a, &b).map(|r| r.p).unwrap_or(f64::NAN),
            ranksum(&c, &rest).map(|r| r.p).unwrap_or(f64::NAN)
        );
    }
    println!("bands:");
    for (name, nb, pb) in BANDS {
        let j = FEATURE_NAMES.iter().position(|&f| f == name).unwrap();
        let (mn, mp) = (mean(&col(j, Group::Normal)).unwrap(), mean(&col(j, Group::Pd)).unwrap());
        let ok = |m: f64, b: (f64, f64)| if m >= b.0 && m <= b.1 { "ok" } else { "MISS" };
        println!(
            "  {name:<20} normal {mn:8.3} {:?} {:<4}  pd {mp:8.3} {:?} {}",
            nb,
            ok(mn, nb),
            pb,
            ok(mp, pb)
        );
    }

    let y: Vec<bool> = labels.iter().map(|g| g.is_deficit()).collect();
    let ids: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let full = Dataset::new(&rows, y, ids).unwrap();
    let image_only: Vec<usize> = (0..IMAGE_FEATURES).filter(|&j| j != 16).collect();
    let cv = CvConfig {
        k: 10,
        repeats: 2,
        seed,
        workers: 0,
    };
    for cfg in ClassifierConfig::all() {
        let r = cross_validate(&full.select_columns(&image_only), &cfg, &cv).unwrap();
        println!(
            "{:<12} acc {:.2} sens {:.2} spec {:.2} auc {:.4}",
            r.classifier, r.accuracy.mean, r.sensitivity.mean, r.specificity.mean, r.auc.mean
        );
    }
    let extra: u64 = std::env::var("IMPORTANCE_SEEDS").ok().and_then(|v| v.parse().ok()).unwrap_or(0);
    for s in 1..=extra {
        let imp = oob_importance(&full, &ForestConfig::importance(), seed + 1000 * s, 0).unwrap();
        let c = imp.column_ids.iter().position(|c| c == "caudate_sbr").unwrap();
        let count = |kind| (0..imp.scores.len()).filter(|&j| feature_kind(j) == kind && imp.scores[j] > imp.scores[c]).count();
        let major_rank = imp.ranking().iter().position(|&j| j == 1).unwrap() + 1;
        println!(
            "forest seed {s}: caudate {:.3} shape {} surface {} major rank {major_rank}",
            imp.scores[c],
            count(FeatureKind::Shape),
            count(FeatureKind::Surface)
        );
    }
    let imp = oob_importance(&full, &ForestConfig::importance(), seed, 0).unwrap();
    let caudate = imp.column_ids.iter().position(|c| c == "caudate_sbr").unwrap();
    let above = |kind| {
        (0..imp.scores.len())
            .filter(|&j| feature_kind(j) == kind && imp.scores[j] > imp.scores[caudate])
            .count()
    };
    println!(
        "importance (caudate_sbr = {:.3}; shape above {}, surface above {}):",
        imp.scores[caudate],
        above(FeatureKind::Shape),
        above(FeatureKind::Surface)
    );
    for (rank, j) in imp.ranking().into_iter().enumerate() {
        println!("  {:>2} {:<24} {:8.3}", rank + 1, imp.column_ids[j], imp.scores[j]);
    }
    println!(
        "oob acc {:.2} fraction {:.3}",
        imp.oob_accuracy, imp.mean_oob_fraction
    );
}
