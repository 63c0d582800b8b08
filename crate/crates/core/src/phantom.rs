//! Synthetic striatal phantoms: two mirrored comma-shaped uptake regions on a
//! brain-shaped background, rendered as thin axial volumes.
//!
//! Each striatum is a quadratic Bezier spine from an anterior-medial head to a
//! posterior-lateral tail, swept by a Gaussian cross-section. Uptake along
//! the spine falls off quadratically from a peak slightly anterior of its
//! middle. Deficit subjects lose uptake from the tail end forward, one side
//! more than the other.

use crate::io::{Group, SbrRecord, Volume};
use crate::scalar::Real;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
}

pub const WIDTH: usize = 91;
pub const HEIGHT: usize = 109;
pub const SLICES: usize = 14;

/// Cohort-level morphology; lengths in pixels, angles in degrees measured
/// counterclockwise on screen for the image-left striatum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Morphology {
    pub spine_length: f64,
    pub spine_length_sd: f64,
    pub spine_angle: f64,
    pub spine_angle_sd: f64,
    /// Signed bow of the spine as a fraction of its length; negative bends
    /// the head end toward horizontal.
    pub spine_curvature: f64,
    pub head_width: f64,
    pub tail_width: f64,
    /// Relative per-subject sd of the tail width.
    pub width_sd: f64,
    /// Position along the spine (0 = head, 1 = tail) of peak uptake.
    pub peak_position: f64,
    pub peak_position_sd: f64,
    /// Quadratic fall-off of uptake away from the peak along the spine.
    pub height_falloff: f64,
    /// Horizontal distance of each head centre from the midline.
    pub head_offset: f64,
    pub head_row: f64,
    /// Striatal uptake relative to the nonspecific background.
    pub uptake: f64,
    pub uptake_sd: f64,
    pub background: f64,
    /// Mean fraction of the spine lost from the tail end.
    pub posterior_attenuation: f64,
    pub posterior_attenuation_sd: f64,
    /// Mean extra loss on the more affected (right) side.
    pub asymmetry: f64,
    pub asymmetry_sd: f64,
    /// Per-side relative jitter of length and width.
    pub side_jitter: f64,
    pub noise_sd: f64,
    pub smoothing: f64,
}

impl Default for Morphology {
    fn default() -> Self {
        Self::normal()
    }
}

impl Morphology {
    pub fn normal() -> Self {
        Self {
            spine_length: 11.0,
            spine_length_sd: 0.3,
            spine_angle: 52.0,
            spine_angle_sd: 6.0,
            spine_curvature: -0.12,
            head_width: 4.0,
            tail_width: 4.2,
            width_sd: 0.15,
            peak_position: 0.45,
            peak_position_sd: 0.0,
            height_falloff: 1.6,
            head_offset: 6.0,
            head_row: 44.0,
            uptake: 4.0,
            uptake_sd: 0.3,
            background: 1.0,
            posterior_attenuation: 0.0,
            posterior_attenuation_sd: 0.0,
            asymmetry: 0.0,
            asymmetry_sd: 0.0,
            side_jitter: 0.05,
            noise_sd: 0.25,
            smoothing: 1.0,
        }
    }

    pub fn pd() -> Self {
        Self {
            uptake: 2.6,
            uptake_sd: 0.25,
            posterior_attenuation: 0.5,
            posterior_attenuation_sd: 0.1,
            asymmetry: 0.12,
            asymmetry_sd: 0.06,
            ..Self::normal()
        }
    }

    pub fn for_group(group: Group) -> Self {
        match group {
            Group::Normal | Group::Swedd => Self::normal(),
            Group::Pd => Self::pd(),
        }
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let positive = [
            ("spine_length", self.spine_length),
            ("head_width", self.head_width),
            ("tail_width", self.tail_width),
            ("uptake", self.uptake),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PhantomError::InvalidSpec(format!("{name} must be positive")));
            }
        }
        let non_negative = [
            ("spine_length_sd", self.spine_length_sd),
            ("spine_angle_sd", self.spine_angle_sd),
            ("width_sd", self.width_sd),
            ("peak_position_sd", self.peak_position_sd),
            ("uptake_sd", self.uptake_sd),
            ("background", self.background),
            ("posterior_attenuation_sd", self.posterior_attenuation_sd),
            ("asymmetry_sd", self.asymmetry_sd),
            ("side_jitter", self.side_jitter),
            ("noise_sd", self.noise_sd),
            ("smoothing", self.smoothing),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PhantomError::InvalidSpec(format!("{name} must be non-negative")));
            }
        }
        for (name, v) in [
            ("peak_position", self.peak_position),
            ("posterior_attenuation", self.posterior_attenuation),
            ("asymmetry", self.asymmetry),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PhantomError::InvalidSpec(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub group: Group,
    pub n_subjects: usize,
    pub seed: u64,
    pub morphology: Morphology,
}

impl PhantomSpec {
    /// Calibrated defaults for `group`. SWEDD shares the normal morphology and
    /// differs only through its seed stream.
    pub fn calibrated(group: Group, n_subjects: usize, seed: u64) -> Self {
        Self {
            group,
            n_subjects,
            seed,
            morphology: Morphology::for_group(group),
        }
    }
}

/// Parameters drawn for one side of one subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideParams {
    pub length: f64,
    pub angle: f64,
    pub head_width: f64,
    pub tail_width: f64,
    /// Spine position of peak uptake.
    pub peak: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomTruth {
    pub subject_id: String,
    pub group: Group,
    pub uptake: f64,
    pub left: SideParams,
    pub right: SideParams,
    /// Mean posterior loss over both sides.
    pub posterior_loss: f64,
    /// `right.loss - left.loss`.
    pub asymmetry: f64,
}

#[derive(Debug, Clone)]
pub struct PhantomSubject<T> {
    pub volume: Volume<T>,
    pub truth: PhantomTruth,
}

fn group_tag(group: Group) -> u64 {
    match group {
        Group::Normal => 11,
        Group::Swedd => 12,
        Group::Pd => 13,
    }
}

fn gauss(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(mean, sd).expect("finite sd").sample(rng)
    } else {
        mean
    }
}

/// Draws the per-subject parameters.
pub fn sample_truth(m: &Morphology, group: Group, subject_id: String, rng: &mut ChaCha8Rng) -> PhantomTruth {
    let length = gauss(rng, m.spine_length, m.spine_length_sd).max(0.3 * m.spine_length);
    let angle = gauss(rng, m.spine_angle, m.spine_angle_sd);
    let width_scale = gauss(rng, 1.0, m.width_sd).clamp(0.6, 1.4);
    let peak = gauss(rng, m.peak_position, m.peak_position_sd).clamp(0.0, 1.0);
    let uptake = gauss(rng, m.uptake, m.uptake_sd).max(0.2 * m.uptake);
    let loss = gauss(rng, m.posterior_attenuation, m.posterior_attenuation_sd).clamp(0.0, 0.9);
    let extra = if m.asymmetry > 0.0 || m.asymmetry_sd > 0.0 {
        gauss(rng, m.asymmetry, m.asymmetry_sd).abs()
    } else {
        0.0
    };
    let mut side = |loss: f64| {
        let j = |rng: &mut ChaCha8Rng| gauss(rng, 1.0, m.side_jitter).clamp(0.8, 1.2);
        SideParams {
            length: length * j(rng),
            angle: angle + gauss(rng, 0.0, m.side_jitter * 30.0),
            head_width: m.head_width * j(rng),
            tail_width: m.tail_width * width_scale * j(rng),
            peak,
            loss,
        }
    };
    let left = side(loss);
    let right = side((loss + extra).min(0.95));
    PhantomTruth {
        subject_id,
        group,
        uptake,
        posterior_loss: (left.loss + right.loss) / 2.0,
        asymmetry: right.loss - left.loss,
        left,
        right,
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

const SPINE_SAMPLES: usize = 64;

/// Uptake of one image-left striatum, added into `img` (width `WIDTH`).
fn add_striatum(img: &mut [f64], m: &Morphology, p: &SideParams, mirror: bool) {
    let mid = (WIDTH as f64 - 1.0) / 2.0;
    let (ca, sa) = (p.angle.to_radians().cos(), p.angle.to_radians().sin());
    let head = (mid - m.head_offset, m.head_row);
    let tail = (head.0 - p.length * ca, head.1 + p.length * sa);
    let normal = (sa, ca);
    let bow = m.spine_curvature * p.length;
    let ctrl = (
        (head.0 + tail.0) / 2.0 + bow * normal.0,
        (head.1 + tail.1) / 2.0 + bow * normal.1,
    );
    let samples: Vec<(f64, f64, f64, f64)> = (0..=SPINE_SAMPLES)
        .map(|k| {
            let s = k as f64 / SPINE_SAMPLES as f64;
            let (a, b, c) = ((1.0 - s) * (1.0 - s), 2.0 * s * (1.0 - s), s * s);
            let x = a * head.0 + b * ctrl.0 + c * tail.0;
            let y = a * head.1 + b * ctrl.1 + c * tail.1;
            let width = p.head_width + (p.tail_width - p.head_width) * s;
            let mut height = (1.0 - m.height_falloff * (s - p.peak).powi(2)).max(0.0);
            if p.loss > 0.0 {
                let edge = 1.0 - p.loss;
                height *= 1.0 - 0.92 * smoothstep(edge - 0.12, edge + 0.12, s);
            }
            (x, y, width, height)
        })
        .collect();
    let reach = 4.0 * p.head_width.max(p.tail_width);
    let xs = samples.iter().map(|s| s.0);
    let ys = samples.iter().map(|s| s.1);
    let x0 = (xs.clone().fold(f64::INFINITY, f64::min) - reach).floor().max(0.0) as usize;
    let x1 = (xs.fold(f64::NEG_INFINITY, f64::max) + reach).ceil().min(WIDTH as f64 - 1.0) as usize;
    let y0 = (ys.clone().fold(f64::INFINITY, f64::min) - reach).floor().max(0.0) as usize;
    let y1 = (ys.fold(f64::NEG_INFINITY, f64::max) + reach).ceil().min(HEIGHT as f64 - 1.0) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (px, py) = (x as f64, y as f64);
            let v = samples
                .iter()
                .map(|&(sx, sy, w, h)| {
                    let d2 = (px - sx).powi(2) + (py - sy).powi(2);
                    h * (-d2 / (2.0 * w * w)).exp()
                })
                .fold(0.0, f64::max);
            let col = if mirror { WIDTH - 1 - x } else { x };
            img[y * WIDTH + col] += v;
        }
    }
}

/// Smooth elliptical brain mask with unit interior.
fn brain(x: usize, y: usize) -> f64 {
    let (cx, cy) = ((WIDTH as f64 - 1.0) / 2.0, 54.0);
    let r = (((x as f64 - cx) / 36.0).powi(2) + ((y as f64 - cy) / 46.0).powi(2)).sqrt();
    1.0 - smoothstep(0.9, 1.05, r)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with clamped borders.
pub fn smooth(img: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return img.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; img.len()];
    for y in 0..height {
        for x in 0..width {
            tmp[y * width + x] = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * img[y * width + clamp(x as i64 + i as i64 - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; img.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * tmp[clamp(y as i64 + i as i64 - r, height) * width + x])
                .sum();
        }
    }
    out
}

/// Relative striatal uptake of slice `z` in the thin volume.
pub fn slice_weight(z: usize) -> f64 {
    let c = (SLICES as f64 - 1.0) / 2.0;
    (-((z as f64 - c) / 5.0).powi(2) / 2.0).exp()
}

/// Noise-free striatal pattern (both sides) before slice weighting.
pub fn striatal_pattern(m: &Morphology, truth: &PhantomTruth) -> Vec<f64> {
    let mut img = vec![0.0; WIDTH * HEIGHT];
    add_striatum(&mut img, m, &truth.left, false);
    add_striatum(&mut img, m, &truth.right, true);
    img
}

/// Renders a `91 x 109 x 14` volume for `truth`. Noise is drawn from `rng`.
pub fn render_volume(m: &Morphology, truth: &PhantomTruth, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let pattern = striatal_pattern(m, truth);
    let bg: Vec<f64> = (0..WIDTH * HEIGHT)
        .map(|i| m.background * brain(i % WIDTH, i / WIDTH))
        .collect();
    let mut data = Vec::with_capacity(WIDTH * HEIGHT * SLICES);
    for z in 0..SLICES {
        let w = slice_weight(z) * truth.uptake;
        let slice: Vec<f64> = pattern
            .iter()
            .zip(&bg)
            .map(|(&s, &b)| {
                let v = w * s + b;
                if m.noise_sd > 0.0 {
                    let e: f64 = rand_distr::StandardNormal.sample(rng);
                    v + m.noise_sd * (v + 0.1).sqrt() * e
                } else {
                    v
                }
            })
            .collect();
        data.extend(smooth(&slice, WIDTH, HEIGHT, m.smoothing));
    }
    data
}

/// Generates `spec.n_subjects` subjects. Subject `i` depends only on
/// `(seed, group, i)`, so cohorts are reproducible under any parallelism.
pub fn generate_cohort<T: Real>(spec: &PhantomSpec) -> Result<Vec<PhantomSubject<T>>, PhantomError> {
    spec.morphology.validate()?;
    let prefix = spec.group.as_str().to_lowercase();
    Ok((0..spec.n_subjects)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::classify::rng::stream(spec.seed, &[group_tag(spec.group), i as u64]);
            let truth = sample_truth(&spec.morphology, spec.group, format!("{prefix}{i:04}"), &mut rng);
            let data = render_volume(&spec.morphology, &truth, &mut rng);
            let volume = Volume::new(
                [WIDTH, HEIGHT, SLICES],
                [T::lit(2.0); 3],
                data.into_iter().map(T::lit).collect(),
            )
            .expect("phantom volume is valid");
            PhantomSubject { volume, truth }
        })
        .collect())
}

/// Synthetic binding ratios consistent with a subject's posterior loss:
/// putamen ratios fall steeply with loss, caudate ratios mildly.
pub fn synthetic_sbr(truth: &PhantomTruth, seed: u64, index: u64) -> SbrRecord {
    let mut rng = crate::classify::rng::stream(seed, &[group_tag(truth.group) + 100, index]);
    let base_c = gauss(&mut rng, 2.95, 0.6);
    let base_p = gauss(&mut rng, 2.1, 0.45);
    let side = |rng: &mut ChaCha8Rng, base: f64, loss: f64, k: f64, sd: f64| {
        (base * (1.0 - k * loss) + gauss(rng, 0.0, sd)).max(0.05)
    };
    SbrRecord {
        subject_id: truth.subject_id.clone(),
        caudate_left: side(&mut rng, base_c, truth.left.loss, 0.5, 0.3),
        caudate_right: side(&mut rng, base_c, truth.right.loss, 0.5, 0.3),
        putamen_left: side(&mut rng, base_p, truth.left.loss, 1.2, 0.25),
        putamen_right: side(&mut rng, base_p, truth.right.loss, 1.2, 0.25),
    }
}
