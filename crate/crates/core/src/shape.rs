//! Ellipse-moment and boundary descriptors of a segmented region, and the
//! left/right asymmetry features built from them.
//!
//! Coordinates are image pixels with `y` pointing down. Second moments carry
//! the 1/12 variance of a unit pixel so that a solid `w x h` rectangle has
//! axis lengths `4 * sqrt(w^2 / 12)` and `4 * sqrt(h^2 / 12)`. Orientation is
//! measured counterclockwise as displayed (i.e. with `y` flipped to point up).

use crate::scalar::Real;
use crate::segment::{Region, RegionPair};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("region of {0} px is too small for shape analysis (minimum 3)")]
    DegenerateRegion(usize),
    #[error("asymmetry index undefined: left + right = 0")]
    ZeroDenominator,
}

/// Central second moments (with the unit-pixel correction) and centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    pub n: usize,
    pub mean_x: T,
    pub mean_y: T,
    pub uxx: T,
    pub uyy: T,
    pub uxy: T,
}

/// Single-pass (Welford) accumulation of centroid and covariance.
pub fn moments<T: Real>(pixels: &[(i64, i64)]) -> Moments<T> {
    let (mut mx, mut my) = (T::zero(), T::zero());
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (k, &(x, y)) in pixels.iter().enumerate() {
        let (x, y) = (T::lit(x as f64), T::lit(y as f64));
        let n = T::from_usize_lossy(k + 1);
        let dx = x - mx;
        let dy = y - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (x - mx);
        syy += dy * (y - my);
        sxy += dx * (y - my);
    }
    let n = T::from_usize_lossy(pixels.len().max(1));
    let twelfth = T::one() / T::lit(12.0);
    Moments {
        n: pixels.len(),
        mean_x: mx,
        mean_y: my,
        uxx: sxx / n + twelfth,
        uyy: syy / n + twelfth,
        uxy: sxy / n,
    }
}

/// Ellipse-equivalent and boundary descriptors of one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionShape<T> {
    pub area: T,
    pub major_axis_length: T,
    pub minor_axis_length: T,
    pub aspect_ratio: T,
    pub eccentricity: T,
    pub equivalent_diameter: T,
    /// Degrees in (-90, 90].
    pub orientation: T,
    pub roundness: T,
}

impl<T: Real> RegionShape<T> {
    pub const NAMES: [&'static str; 8] = [
        "area",
        "major_axis_length",
        "minor_axis_length",
        "aspect_ratio",
        "eccentricity",
        "equivalent_diameter",
        "orientation",
        "roundness",
    ];

    pub fn to_array(&self) -> [T; 8] {
        [
            self.area,
            self.major_axis_length,
            self.minor_axis_length,
            self.aspect_ratio,
            self.eccentricity,
            self.equivalent_diameter,
            self.orientation,
            self.roundness,
        ]
    }
}

pub fn region_shape<T: Real>(region: &Region<T>) -> Result<RegionShape<T>, ShapeError> {
    shape_of_pixels(&region.pixels)
}

pub fn shape_of_pixels<T: Real>(pixels: &[(i64, i64)]) -> Result<RegionShape<T>, ShapeError> {
    let n = pixels.len();
    if n < 3 {
        return Err(ShapeError::DegenerateRegion(n));
    }
    let m = moments::<T>(pixels);
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let half_trace = (m.uxx + m.uyy) / two;
    let disc = (((m.uxx - m.uyy) / two).powi(2) + m.uxy * m.uxy).sqrt();
    let lmax = half_trace + disc;
    let lmin = (half_trace - disc).max(T::zero());
    let major = four * lmax.sqrt();
    let minor = four * lmin.sqrt();

    // flip y so the angle reads counterclockwise on screen; + 0 clears -0.0
    let uxy_up = -m.uxy + T::zero();
    let mut theta = (two * uxy_up).atan2(m.uxx - m.uyy).to_degrees() / two;
    if theta <= T::lit(-90.0) {
        theta += T::lit(180.0);
    }

    let area = T::from_usize_lossy(n);
    let pi = T::lit(std::f64::consts::PI);
    let perimeter = boundary_length::<T>(pixels);
    let roundness = if perimeter > T::zero() {
        four * pi * area / (perimeter * perimeter)
    } else {
        T::zero()
    };
    let ratio = minor / major;
    Ok(RegionShape {
        area,
        major_axis_length: major,
        minor_axis_length: minor,
        aspect_ratio: major / minor,
        eccentricity: (T::one() - ratio * ratio).max(T::zero()).sqrt(),
        equivalent_diameter: (four * area / pi).sqrt(),
        orientation: theta,
        roundness,
    })
}

// Clockwise on screen (y down), starting east.
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("unit neighbour offset")
}

/// Length of the outer boundary traced through 8-connected boundary pixel
/// centres (Moore-neighbour tracing): axial steps count 1, diagonal steps
/// `sqrt(2)`. The pixel set is assumed to be a single 8-connected component.
pub fn boundary_length<T: Real>(pixels: &[(i64, i64)]) -> T {
    if pixels.len() < 2 {
        return T::zero();
    }
    let set: std::collections::HashSet<(i64, i64)> = pixels.iter().copied().collect();
    let start = *pixels.iter().min_by_key(|&&(x, y)| (y, x)).unwrap();
    let inside = |p: (i64, i64)| set.contains(&p);
    let step = |from: (i64, i64), back_dir: usize| -> Option<(usize, (i64, i64))> {
        for k in 1..=8 {
            let d = (back_dir + k) % 8;
            let q = (from.0 + DIRS[d].0, from.1 + DIRS[d].1);
            if inside(q) {
                return Some((d, q));
            }
        }
        None
    };
    let sqrt2 = T::lit(std::f64::consts::SQRT_2);
    let step_len = |d: usize| if d.is_multiple_of(2) { T::one() } else { sqrt2 };

    // the west neighbour of the raster-first pixel is background
    let Some((d0, first)) = step(start, 4) else {
        return T::zero();
    };
    let mut total = step_len(d0);
    let mut cur = first;
    let mut came = d0;
    let limit = 4 * pixels.len() + 8;
    for _ in 0..limit {
        // backtrack pixel = the neighbour examined just before the move
        let prev = (came + 7) % 8;
        let prev_abs = (cur.0 - DIRS[came].0 + DIRS[prev].0, cur.1 - DIRS[came].1 + DIRS[prev].1);
        let back_dir = dir_index(prev_abs.0 - cur.0, prev_abs.1 - cur.1);
        let (d, next) = step(cur, back_dir).expect("connected pixel has a neighbour");
        if cur == start && next == first {
            break;
        }
        total += step_len(d);
        cur = next;
        came = d;
    }
    total
}

/// `2 (left - right) / (left + right)`.
pub fn asymmetry_index<T: Real>(left: T, right: T) -> Result<T, ShapeError> {
    let s = left + right;
    if s == T::zero() {
        return Err(ShapeError::ZeroDenominator);
    }
    Ok(T::lit(2.0) * (left - right) / s)
}

/// Which side(s) feed the per-region magnitude features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideCombination {
    Left,
    Right,
    #[default]
    Mean,
}

impl SideCombination {
    pub fn combine<T: Real>(self, left: T, right: T) -> T {
        match self {
            SideCombination::Left => left,
            SideCombination::Right => right,
            SideCombination::Mean => (left + right) / T::lit(2.0),
        }
    }
}

impl std::str::FromStr for SideCombination {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            "mean" => Ok(Self::Mean),
            other => Err(format!("unknown side combination {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShapeOptions {
    pub combine: SideCombination,
    /// Report |AI| instead of the signed index.
    pub absolute_ai: bool,
}

/// Eight magnitudes followed by the eight matching asymmetry indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFeatures16<T> {
    pub magnitude: RegionShape<T>,
    pub asymmetry: [T; 8],
    pub left: RegionShape<T>,
    pub right: RegionShape<T>,
}

impl<T: Real> ShapeFeatures16<T> {
    pub fn to_array(&self) -> [T; 16] {
        let mut out = [T::zero(); 16];
        out[..8].copy_from_slice(&self.magnitude.to_array());
        out[8..].copy_from_slice(&self.asymmetry);
        out
    }
}

pub fn shape_features<T: Real>(
    pair: &RegionPair<T>,
    opts: &ShapeOptions,
) -> Result<ShapeFeatures16<T>, ShapeError> {
    let left = region_shape(&pair.left)?;
    let right = region_shape(&pair.right_flipped)?;
    let (l, r) = (left.to_array(), right.to_array());
    let mut mag = [T::zero(); 8];
    let mut ai = [T::zero(); 8];
    for k in 0..8 {
        mag[k] = opts.combine.combine(l[k], r[k]);
        let a = asymmetry_index(l[k], r[k])?;
        ai[k] = if opts.absolute_ai { a.abs() } else { a };
    }
    let magnitude = RegionShape {
        area: mag[0],
        major_axis_length: mag[1],
        minor_axis_length: mag[2],
        aspect_ratio: mag[3],
        eccentricity: mag[4],
        equivalent_diameter: mag[5],
        orientation: mag[6],
        roundness: mag[7],
    };
    Ok(ShapeFeatures16 {
        magnitude,
        asymmetry: ai,
        left,
        right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::Side;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rect(w: i64, h: i64) -> Vec<(i64, i64)> {
        (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).collect()
    }

    fn disk(r: f64) -> Vec<(i64, i64)> {
        let ri = r.ceil() as i64;
        let mut v = Vec::new();
        for y in -ri..=ri {
            for x in -ri..=ri {
                if ((x * x + y * y) as f64) <= r * r {
                    v.push((x, y));
                }
            }
        }
        v
    }

    #[test]
    fn rectangle_closed_form() {
        let s: RegionShape<f64> = shape_of_pixels(&rect(10, 5)).unwrap();
        assert_eq!(s.area, 50.0);
        assert!((s.major_axis_length - 4.0 * (100.0f64 / 12.0).sqrt()).abs() < 1e-9);
        assert!((s.minor_axis_length - 4.0 * (25.0f64 / 12.0).sqrt()).abs() < 1e-9);
        assert!((s.major_axis_length - 11.547).abs() < 1e-3);
        assert!((s.minor_axis_length - 5.7735).abs() < 1e-4);
        assert!((s.aspect_ratio - 2.0).abs() < 1e-12);
        assert!((s.eccentricity - 0.75f64.sqrt()).abs() < 1e-12);
        assert!(s.orientation.abs() < 1e-9);
        assert!((s.equivalent_diameter - (200.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
        // boundary through pixel centres: 2 * (9 + 4)
        assert!((boundary_length::<f64>(&rect(10, 5)) - 26.0).abs() < 1e-12);
    }

    #[test]
    fn rectangle_in_f32() {
        let s: RegionShape<f32> = shape_of_pixels(&rect(10, 5)).unwrap();
        assert!((s.major_axis_length - 11.547).abs() < 1e-3);
        assert!((s.aspect_ratio - 2.0).abs() < 1e-5);
    }

    #[test]
    fn vertical_rectangle_is_ninety_degrees() {
        let s: RegionShape<f64> = shape_of_pixels(&rect(3, 8)).unwrap();
        assert_eq!(s.orientation, 90.0);
    }

    #[test]
    fn diagonal_orientation_sign() {
        // rising to the right on screen (y decreasing as x increases)
        let px: Vec<(i64, i64)> = (0..8).flat_map(|i| [(i, 10 - i), (i + 1, 10 - i)]).collect();
        let s: RegionShape<f64> = shape_of_pixels(&px).unwrap();
        assert!(s.orientation > 30.0 && s.orientation < 60.0, "{}", s.orientation);
    }

    #[test]
    fn rasterized_disk() {
        let s: RegionShape<f64> = shape_of_pixels(&disk(12.0)).unwrap();
        assert!(s.eccentricity < 0.05, "ecc {}", s.eccentricity);
        assert!(s.roundness > 0.9 && s.roundness < 1.0, "roundness {}", s.roundness);
        // centre-to-centre boundaries shrink faster than area on small blobs
        let small: RegionShape<f64> = shape_of_pixels(&disk(4.8)).unwrap();
        assert!(small.roundness > 1.0 && small.roundness < 1.25, "{}", small.roundness);
    }

    #[test]
    fn too_small() {
        assert_eq!(
            shape_of_pixels::<f64>(&[(0, 0), (1, 0)]),
            Err(ShapeError::DegenerateRegion(2))
        );
        // collinear pixels are fine thanks to the 1/12 term
        let s: RegionShape<f64> = shape_of_pixels(&[(0, 0), (1, 0), (2, 0)]).unwrap();
        assert!(s.minor_axis_length > 0.0);
        assert!((boundary_length::<f64>(&[(0, 0), (1, 0), (2, 0)]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn equivalent_diameter_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let px = random_blob(&mut rng);
            let s: RegionShape<f64> = shape_of_pixels(&px).unwrap();
            let back = s.equivalent_diameter.powi(2) * std::f64::consts::PI / 4.0;
            assert!((back - s.area).abs() < 1e-9);
            assert!((s.aspect_ratio - s.major_axis_length / s.minor_axis_length).abs() < 1e-12);
        }
    }

    #[test]
    fn table_area_diameter_consistency() {
        let d = (4.0 * 122.2f64 / std::f64::consts::PI).sqrt();
        assert!((d - 12.47).abs() < 0.01);
        assert!((d - 12.43).abs() < 0.05);
    }

    /// Random 8-connected blob grown from the origin.
    pub(crate) fn random_blob(rng: &mut ChaCha8Rng) -> Vec<(i64, i64)> {
        let target = rng.gen_range(5..200);
        let mut set = std::collections::BTreeSet::new();
        let mut list = vec![(0i64, 0i64)];
        set.insert((0, 0));
        while list.len() < target {
            let &(x, y) = &list[rng.gen_range(0..list.len())];
            let (dx, dy) = DIRS[rng.gen_range(0..8)];
            let q = (x + dx, y + dy);
            if set.insert(q) {
                list.push(q);
            }
        }
        list
    }

    fn two_pass(px: &[(i64, i64)]) -> (f64, f64, f64) {
        let n = px.len() as f64;
        let mx = px.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let my = px.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let mut xx = 0.0;
        let mut yy = 0.0;
        let mut xy = 0.0;
        for &(x, y) in px {
            xx += (x as f64 - mx).powi(2);
            yy += (y as f64 - my).powi(2);
            xy += (x as f64 - mx) * (y as f64 - my);
        }
        (xx / n + 1.0 / 12.0, yy / n + 1.0 / 12.0, xy / n)
    }

    #[test]
    fn streaming_moments_match_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let px = random_blob(&mut rng);
            let m = moments::<f64>(&px);
            let (xx, yy, xy) = two_pass(&px);
            assert!((m.uxx - xx).abs() < 1e-10);
            assert!((m.uyy - yy).abs() < 1e-10);
            assert!((m.uxy - xy).abs() < 1e-10);
        }
    }

    fn wrap180(a: f64) -> f64 {
        let mut a = a % 180.0;
        if a <= -90.0 {
            a += 180.0;
        }
        if a > 90.0 {
            a -= 180.0;
        }
        a
    }

    #[test]
    fn translation_and_rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let px = random_blob(&mut rng);
            let s: RegionShape<f64> = shape_of_pixels(&px).unwrap();
            let moved: Vec<_> = px.iter().map(|&(x, y)| (x + 37, y - 12)).collect();
            let t: RegionShape<f64> = shape_of_pixels(&moved).unwrap();
            for (a, b) in s.to_array().iter().zip(t.to_array()) {
                assert!((a - b).abs() < 1e-9);
            }
            // counterclockwise quarter turn on screen: (x, y) -> (y, -x)
            let rot: Vec<_> = px.iter().map(|&(x, y)| (y, -x)).collect();
            let r: RegionShape<f64> = shape_of_pixels(&rot).unwrap();
            for k in [0, 1, 2, 3, 4, 5, 7] {
                assert!((s.to_array()[k] - r.to_array()[k]).abs() < 1e-9, "field {k}");
            }
            if s.eccentricity > 1e-3 {
                let d = wrap180(r.orientation - (s.orientation + 90.0));
                assert!(d.abs() < 1e-9 || (d.abs() - 180.0).abs() < 1e-9, "{} {}", s.orientation, r.orientation);
            }
        }
    }

    #[test]
    fn asymmetry_examples() {
        assert_eq!(asymmetry_index(2.5, 2.5), Ok(0.0));
        assert_eq!(asymmetry_index(3.0, 1.0), Ok(1.0));
        assert_eq!(asymmetry_index(1.0, 3.0), Ok(-1.0));
        assert_eq!(asymmetry_index(1.0, -1.0), Err(ShapeError::ZeroDenominator));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (a, b): (f64, f64) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
            assert_eq!(asymmetry_index(a, b).unwrap(), -asymmetry_index(b, a).unwrap());
        }
    }

    fn region(px: Vec<(i64, i64)>, side: Side) -> Region<f64> {
        let n = px.len();
        Region::new(px, vec![1.0; n], side)
    }

    #[test]
    fn mirrored_pair_has_zero_asymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let px = random_blob(&mut rng);
        let pair = RegionPair {
            left: region(px.clone(), Side::Left),
            right_flipped: region(px, Side::Right),
            threshold_used: 0.6,
            image_width: 91,
        };
        let f = shape_features(&pair, &ShapeOptions::default()).unwrap();
        assert!(f.asymmetry.iter().all(|&a| a == 0.0));
        assert_eq!(f.magnitude, f.left);
    }

    #[test]
    fn eroded_right_region_has_positive_area_ai() {
        // 10x6 block on the left; the right copy loses its last three columns
        let left = rect(10, 6);
        let right: Vec<_> = left.iter().copied().filter(|&(x, y)| !(x >= 7 && y < 6)).collect();
        assert_eq!(right.len(), 42);
        let pair = RegionPair {
            left: region(left, Side::Left),
            right_flipped: region(right, Side::Right),
            threshold_used: 0.6,
            image_width: 91,
        };
        let f = shape_features(&pair, &ShapeOptions::default()).unwrap();
        let expect = 2.0 * (60.0 - 42.0) / (60.0 + 42.0);
        assert!((f.asymmetry[0] - expect).abs() < 1e-12);
        assert!(f.asymmetry[0] > 0.0);
        assert_eq!(f.magnitude.area, 51.0);

        let opts = ShapeOptions {
            combine: SideCombination::Right,
            absolute_ai: true,
        };
        let pair2 = RegionPair {
            left: pair.right_flipped.clone(),
            right_flipped: pair.left.clone(),
            ..pair
        };
        let g = shape_features(&pair2, &opts).unwrap();
        assert!((g.asymmetry[0] - expect).abs() < 1e-12);
        assert_eq!(g.magnitude.area, 60.0);
    }
}
