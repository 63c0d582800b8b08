//! Slice-window selection, intensity normalization and the per-subject mean image.

use crate::io::Volume;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("input is constant; cannot normalize")]
    ConstantInput,
    #[error("slice window {first}..={last} invalid for a volume with {nz} slices")]
    WindowOutOfRange { first: usize, last: usize, nz: usize },
    #[error("slice {0} is constant")]
    ConstantSlice(usize),
    #[error("slice window needs at least {min} slices, got {len}")]
    WindowTooShort { len: usize, min: usize },
}

/// Affine map of `values` onto [0, 1].
pub fn normalize_unit<T: Real>(values: &[T]) -> Result<Vec<T>, PreprocessError> {
    let (lo, hi) = min_max(values).ok_or(PreprocessError::ConstantInput)?;
    if !(hi > lo) {
        return Err(PreprocessError::ConstantInput);
    }
    let span = hi - lo;
    Ok(values.iter().map(|&v| (v - lo) / span).collect())
}

fn min_max<T: Real>(values: &[T]) -> Option<(T, T)> {
    let mut it = values.iter().copied();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// Inclusive, 0-based range of axial slices averaged into the mean image.
/// Serializes as `"first:last"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SliceWindow {
    pub first: usize,
    pub last: usize,
}

impl SliceWindow {
    /// Fewest consecutive slices accepted by [`SliceWindow::clinical`].
    pub const MIN_CLINICAL_LEN: usize = 3;

    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    /// A window that also honours the three-slice minimum.
    pub fn clinical(first: usize, last: usize) -> Result<Self, PreprocessError> {
        let w = Self { first, last };
        if last < first {
            return Err(PreprocessError::WindowOutOfRange {
                first,
                last,
                nz: usize::MAX,
            });
        }
        if w.len() < Self::MIN_CLINICAL_LEN {
            return Err(PreprocessError::WindowTooShort {
                len: w.len(),
                min: Self::MIN_CLINICAL_LEN,
            });
        }
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.last.saturating_sub(self.first) + 1
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }

    pub fn validate(&self, nz: usize) -> Result<(), PreprocessError> {
        if self.first > self.last || self.last >= nz {
            return Err(PreprocessError::WindowOutOfRange {
                first: self.first,
                last: self.last,
                nz,
            });
        }
        Ok(())
    }

    pub fn indices(&self) -> RangeInclusive<usize> {
        self.first..=self.last
    }
}

impl Default for SliceWindow {
    /// Fourteen slices, 35..=48, around the slice of peak striatal uptake in
    /// a 91-slice MNI-space scan.
    fn default() -> Self {
        Self { first: 35, last: 48 }
    }
}

impl From<SliceWindow> for String {
    fn from(w: SliceWindow) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for SliceWindow {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl std::fmt::Display for SliceWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.first, self.last)
    }
}

impl std::str::FromStr for SliceWindow {
    type Err = String;
    /// Parses `a:b` (inclusive, 0-based).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected first:last, got {s:?}"))?;
        let first = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let last = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
        Ok(Self { first, last })
    }
}

/// A 2D analysis image, row-major with `x` fastest; `(0, 0)` is top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanImage<T> {
    width: usize,
    height: usize,
    pixels: Vec<T>,
    pixel_size_mm: (T, T),
}

impl<T: Real> MeanImage<T> {
    /// Wraps pixel data without renormalizing it.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<T>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size");
        Self {
            width,
            height,
            pixels,
            pixel_size_mm: (T::lit(2.0), T::lit(2.0)),
        }
    }

    pub fn with_pixel_size(mut self, sx: T, sy: T) -> Self {
        self.pixel_size_mm = (sx, sy);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn pixel_size_mm(&self) -> (T, T) {
        self.pixel_size_mm
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.pixels[x + self.width * y]
    }
}

/// Normalizes every slice of the window to [0, 1], averages them pixelwise
/// and renormalizes the average.
pub fn mean_image<T: Real>(
    vol: &Volume<T>,
    window: SliceWindow,
) -> Result<MeanImage<T>, PreprocessError> {
    window.validate(vol.nz())?;
    let [nx, ny, _] = vol.dims();
    let mut acc = vec![T::zero(); nx * ny];
    for z in window.indices() {
        let norm = normalize_unit(vol.slice(z)).map_err(|_| PreprocessError::ConstantSlice(z))?;
        for (a, v) in acc.iter_mut().zip(norm) {
            *a += v;
        }
    }
    let n = T::from_usize_lossy(window.len());
    acc.iter_mut().for_each(|a| *a /= n);
    let pixels = normalize_unit(&acc)?;
    let [sx, sy, _] = vol.voxel_size_mm();
    Ok(MeanImage::from_pixels(nx, ny, pixels).with_pixel_size(sx, sy))
}

/// Above-threshold pixel count of each (individually normalized) slice.
/// Constant slices contribute an area of zero.
pub fn slice_area_profile<T: Real>(
    vol: &Volume<T>,
    threshold: T,
    slices: RangeInclusive<usize>,
) -> Result<Vec<(usize, usize)>, PreprocessError> {
    let (first, last) = (*slices.start(), *slices.end());
    SliceWindow::new(first, last).validate(vol.nz())?;
    Ok(slices
        .map(|z| {
            let area = match normalize_unit(vol.slice(z)) {
                Ok(norm) => norm.iter().filter(|&&v| v >= threshold).count(),
                Err(_) => 0,
            };
            (z, area)
        })
        .collect())
}
