use datquant::io::Group;
use datquant::phantom::{generate_cohort, Morphology, PhantomSpec, SLICES};
use datquant::pipeline::{volume_features, ExtractOptions};
use datquant::preprocess::{mean_image, SliceWindow};
use datquant::segment::{auto_threshold, SegmentOptions};

const AREA: usize = 0;
const MAJOR: usize = 1;
const ASPECT: usize = 3;
const ORIENTATION: usize = 6;
const ROUNDNESS: usize = 7;

fn opts() -> ExtractOptions {
    ExtractOptions {
        window: SliceWindow::new(0, SLICES - 1),
        ..Default::default()
    }
}

fn cohort_means(spec: &PhantomSpec) -> Vec<f64> {
    let subjects = generate_cohort::<f64>(spec).unwrap();
    let mut sums = vec![0.0; 30];
    for s in &subjects {
        let f = volume_features(&s.volume, None, &opts()).unwrap();
        for (acc, v) in sums.iter_mut().zip(f.values) {
            *acc += v;
        }
    }
    sums.iter().map(|v| v / subjects.len() as f64).collect()
}

fn thresholds(group: Group, n: usize, seed: u64) -> Vec<f64> {
    let spec = PhantomSpec::calibrated(group, n, seed);
    generate_cohort::<f64>(&spec)
        .unwrap()
        .iter()
        .map(|s| {
            let img = mean_image(&s.volume, SliceWindow::new(0, SLICES - 1)).unwrap();
            let a = auto_threshold(&img, &SegmentOptions::default());
            assert!(!a.fallback, "{} fell back", s.truth.subject_id);
            a.threshold
        })
        .collect()
}

#[test]
fn normal_cohort_in_calibration_bands() {
    let m = cohort_means(&PhantomSpec::calibrated(Group::Normal, 50, 21));
    assert!((1.46..=1.98).contains(&m[ASPECT]), "aspect {}", m[ASPECT]);
    assert!((33.7..=65.2).contains(&m[ORIENTATION]), "orientation {}", m[ORIENTATION]);
    assert!((0.80..=0.96).contains(&m[ROUNDNESS]), "roundness {}", m[ROUNDNESS]);
}

#[test]
fn pd_cohort_in_calibration_bands() {
    let m = cohort_means(&PhantomSpec::calibrated(Group::Pd, 50, 21));
    assert!((0.91..=1.15).contains(&m[ROUNDNESS]), "roundness {}", m[ROUNDNESS]);
    assert!((36.6..=107.0).contains(&m[AREA]), "area {}", m[AREA]);
}

#[test]
fn automatic_thresholds_fall_in_group_ranges() {
    let normal = thresholds(Group::Normal, 30, 22);
    let pd = thresholds(Group::Pd, 30, 22);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let inside = |v: &[f64], lo: f64, hi: f64| v.iter().filter(|t| (lo..=hi).contains(*t)).count();
    assert!(inside(&normal, 0.55, 0.71) >= 27, "{normal:?}");
    assert!(inside(&pd, 0.59, 0.79) >= 27, "{pd:?}");
    assert!((0.55..=0.71).contains(&mean(&normal)));
    assert!((0.59..=0.79).contains(&mean(&pd)));
}

#[test]
fn posterior_loss_shortens_and_rounds() {
    let means: Vec<Vec<f64>> = [0.0, 0.25, 0.5, 0.75]
        .iter()
        .map(|&loss| {
            cohort_means(&PhantomSpec {
                group: Group::Normal,
                n_subjects: 20,
                seed: 23,
                morphology: Morphology {
                    posterior_attenuation: loss,
                    ..Morphology::normal()
                },
            })
        })
        .collect();
    for w in means.windows(2) {
        assert!(w[1][MAJOR] < w[0][MAJOR], "major {} -> {}", w[0][MAJOR], w[1][MAJOR]);
        assert!(w[1][ROUNDNESS] > w[0][ROUNDNESS], "roundness {} -> {}", w[0][ROUNDNESS], w[1][ROUNDNESS]);
    }
}

#[test]
fn swedd_shares_normal_morphology() {
    let n = PhantomSpec::calibrated(Group::Normal, 1, 0);
    let s = PhantomSpec::calibrated(Group::Swedd, 1, 0);
    assert_eq!(n.morphology, s.morphology);
    let mn = cohort_means(&PhantomSpec::calibrated(Group::Normal, 30, 24));
    let ms = cohort_means(&PhantomSpec::calibrated(Group::Swedd, 30, 24));
    assert!((mn[MAJOR] - ms[MAJOR]).abs() < 1.0);
    assert!((mn[ROUNDNESS] - ms[ROUNDNESS]).abs() < 0.1);
}

#[test]
fn f32_and_f64_cohorts_agree() {
    let spec = PhantomSpec::calibrated(Group::Pd, 3, 25);
    let a = generate_cohort::<f64>(&spec).unwrap();
    let b = generate_cohort::<f32>(&spec).unwrap();
    for (x, y) in a.iter().zip(&b) {
        let fx = volume_features(&x.volume, None, &opts()).unwrap();
        let fy = volume_features(&y.volume, None, &opts()).unwrap();
        assert!((fx.threshold - fy.threshold as f64).abs() < 1e-6);
        assert!((fx.values[AREA] - fy.values[AREA] as f64).abs() < 1e-6);
        assert!((fx.values[MAJOR] - fy.values[MAJOR] as f64).abs() < 1e-3);
    }
}
