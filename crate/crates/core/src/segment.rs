//! Threshold segmentation of the mean image into the two striatal regions.

use crate::preprocess::MeanImage;
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("threshold produced {found} component(s); two are required")]
    TooFewComponents { found: usize },
    #[error("both striatal components lie on the same side of the midline")]
    AmbiguousSides,
    #[error("component of {area} px is below the {min_area} px minimum")]
    RegionTooSmall { area: usize, min_area: usize },
}

/// Binary image, row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: &[(usize, usize)]) -> Self {
        let mut m = Self::new(width, height);
        for &(x, y) in pixels {
            m.set(x, y, true);
        }
        m
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[x + self.width * y]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[x + self.width * y] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// `mask[p] = img[p] >= t`.
pub fn threshold_mask<T: Real>(img: &MeanImage<T>, t: T) -> Mask {
    Mask {
        width: img.width(),
        height: img.height(),
        bits: img.pixels().iter().map(|&v| v >= t).collect(),
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // smaller index stays root so labels follow raster order
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// 8-connected components of the foreground, each as a raster-ordered list
/// of `(x, y)` pixels. Sorted by area descending, ties broken by the raster
/// position of the component's first pixel.
pub fn connected_components(mask: &Mask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (mask.width, mask.height);
    let mut parent: Vec<usize> = (0..w * h).collect();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let i = x + w * y;
            // already-visited neighbours: W, NW, N, NE
            if x > 0 && mask.get(x - 1, y) {
                union(&mut parent, i, i - 1);
            }
            if y > 0 {
                if x > 0 && mask.get(x - 1, y - 1) {
                    union(&mut parent, i, i - w - 1);
                }
                if mask.get(x, y - 1) {
                    union(&mut parent, i, i - w);
                }
                if x + 1 < w && mask.get(x + 1, y - 1) {
                    union(&mut parent, i, i - w + 1);
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; w * h];
    let mut comps: Vec<Vec<(usize, usize)>> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let root = find(&mut parent, x + w * y);
            if slot[root] == usize::MAX {
                slot[root] = comps.len();
                comps.push(Vec::new());
            }
            comps[slot[root]].push((x, y));
        }
    }
    // stable sort keeps raster order of first pixels among equal areas
    comps.sort_by_key(|c| std::cmp::Reverse(c.len()));
    comps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub min_x: i64,
    pub min_y: i64,
    pub max_x: i64,
    pub max_y: i64,
}

/// A segmented region with the mean-image intensity at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Region<T> {
    pub pixels: Vec<(i64, i64)>,
    pub intensities: Vec<T>,
    pub bbox: BBox,
    pub side: Side,
}

impl<T: Real> Region<T> {
    pub fn new(pixels: Vec<(i64, i64)>, intensities: Vec<T>, side: Side) -> Self {
        assert_eq!(pixels.len(), intensities.len());
        let bbox = bbox_of(&pixels);
        Self {
            pixels,
            intensities,
            bbox,
            side,
        }
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn centroid(&self) -> (T, T) {
        let n = T::from_usize_lossy(self.pixels.len().max(1));
        let sx: T = self.pixels.iter().map(|p| T::lit(p.0 as f64)).sum();
        let sy: T = self.pixels.iter().map(|p| T::lit(p.1 as f64)).sum();
        (sx / n, sy / n)
    }

    /// Mirrors `x -> width - 1 - x`; pixels are re-sorted into raster order.
    pub fn mirrored(&self, width: usize) -> Self {
        let w = width as i64;
        let mut pairs: Vec<((i64, i64), T)> = self
            .pixels
            .iter()
            .zip(&self.intensities)
            .map(|(&(x, y), &v)| ((w - 1 - x, y), v))
            .collect();
        pairs.sort_by_key(|&((x, y), _)| (y, x));
        let (pixels, intensities) = pairs.into_iter().unzip();
        Self::new(pixels, intensities, self.side)
    }
}

fn bbox_of(pixels: &[(i64, i64)]) -> BBox {
    let mut b = BBox {
        min_x: i64::MAX,
        min_y: i64::MAX,
        max_x: i64::MIN,
        max_y: i64::MIN,
    };
    for &(x, y) in pixels {
        b.min_x = b.min_x.min(x);
        b.min_y = b.min_y.min(y);
        b.max_x = b.max_x.max(x);
        b.max_y = b.max_y.max(y);
    }
    b
}

/// Left reference region plus the right region mirrored into its frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPair<T> {
    pub left: Region<T>,
    pub right_flipped: Region<T>,
    pub threshold_used: T,
    pub image_width: usize,
}

impl<T: Real> RegionPair<T> {
    /// Undoes the mirroring of the right region.
    pub fn right_original(&self) -> Region<T> {
        self.right_flipped.mirrored(self.image_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentOptions {
    pub min_area: usize,
    /// Image-left is the subject's right hemisphere.
    pub radiological: bool,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            min_area: 10,
            radiological: false,
        }
    }
}

/// Thresholds `img`, keeps the two largest components and assigns sides
/// about the vertical midline `x = (width - 1) / 2`.
pub fn extract_region_pair<T: Real>(
    img: &MeanImage<T>,
    t: T,
    opts: &SegmentOptions,
) -> Result<RegionPair<T>, SegmentError> {
    let mask = threshold_mask(img, t);
    let comps = connected_components(&mask);
    let mid = (img.width() as f64 - 1.0) / 2.0;
    if comps.len() < 2 {
        if let Some(c) = comps.first() {
            let lo = c.iter().map(|p| p.0).min().unwrap() as f64;
            let hi = c.iter().map(|p| p.0).max().unwrap() as f64;
            if c.len() >= opts.min_area && lo < mid && hi > mid {
                return Err(SegmentError::AmbiguousSides);
            }
        }
        return Err(SegmentError::TooFewComponents { found: comps.len() });
    }
    for c in &comps[..2] {
        if c.len() < opts.min_area {
            return Err(SegmentError::RegionTooSmall {
                area: c.len(),
                min_area: opts.min_area,
            });
        }
    }
    let centroid_x = |c: &[(usize, usize)]| c.iter().map(|p| p.0 as f64).sum::<f64>() / c.len() as f64;
    let (ca, cb) = (centroid_x(&comps[0]), centroid_x(&comps[1]));
    if (ca < mid) == (cb < mid) {
        return Err(SegmentError::AmbiguousSides);
    }
    let (img_left, img_right) = if ca < mid {
        (&comps[0], &comps[1])
    } else {
        (&comps[1], &comps[0])
    };
    let (left_px, right_px) = if opts.radiological {
        (img_right, img_left)
    } else {
        (img_left, img_right)
    };
    let build = |px: &[(usize, usize)], side| {
        let pixels = px.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
        let intensities = px.iter().map(|&(x, y)| img.get(x, y)).collect();
        Region::new(pixels, intensities, side)
    };
    let left = build(left_px, Side::Left);
    let right_flipped = build(right_px, Side::Right).mirrored(img.width());
    Ok(RegionPair {
        left,
        right_flipped,
        threshold_used: t,
        image_width: img.width(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoThreshold<T> {
    pub threshold: T,
    /// No grid value qualified and the default was returned.
    pub fallback: bool,
}

pub const AUTO_GRID_START: f64 = 0.50;
pub const AUTO_GRID_END: f64 = 0.80;
pub const AUTO_MAX_AREA: usize = 400;
pub const AUTO_FALLBACK: f64 = 0.63;

/// Smallest threshold on the 0.50..=0.80 grid (step 0.01) giving a valid
/// region pair with both areas at most 400 px; 0.63 otherwise.
pub fn auto_threshold<T: Real>(img: &MeanImage<T>, opts: &SegmentOptions) -> AutoThreshold<T> {
    let steps = ((AUTO_GRID_END - AUTO_GRID_START) * 100.0).round() as usize;
    for i in 0..=steps {
        let t = T::lit((50 + i) as f64 / 100.0);
        if let Ok(pair) = extract_region_pair(img, t, opts) {
            if pair.left.area() <= AUTO_MAX_AREA && pair.right_flipped.area() <= AUTO_MAX_AREA {
                return AutoThreshold {
                    threshold: t,
                    fallback: false,
                };
            }
        }
    }
    log::warn!("no threshold on the grid isolates two striatal regions; using {AUTO_FALLBACK}");
    AutoThreshold {
        threshold: T::lit(AUTO_FALLBACK),
        fallback: true,
    }
}
