//! Cubic intensity-surface fit over a region and its goodness-of-fit measures.
//!
//! The model is
//! `f(x, y) = p00 + p10 x + p01 y + p20 x^2 + p11 x y + p02 y^2
//!          + p30 x^3 + p21 x^2 y + p12 x y^2 + p03 y^3`
//! on pixel coordinates standardized to zero mean and unit (population)
//! standard deviation per axis.

use crate::linalg::{lstsq_qr, Matrix};
use crate::scalar::{mean, population_sd, Real};
use crate::segment::{Region, RegionPair};
use crate::shape::SideCombination;
use thiserror::Error;

pub const N_COEFFS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("coordinates along the {0} axis have no spread")]
    DegenerateAxis(char),
    #[error("region has {0} pixels; the cubic fit needs at least 11")]
    TooFewPixels(usize),
    #[error("design matrix is rank deficient (column {0})")]
    RankDeficient(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisStats<T> {
    pub mean: T,
    pub sd: T,
}

/// Standardized coordinates and the per-axis statistics used.
pub fn standardize_coords<T: Real>(
    pixels: &[(i64, i64)],
) -> Result<(Vec<(T, T)>, AxisStats<T>, AxisStats<T>), FitError> {
    let xs: Vec<T> = pixels.iter().map(|p| T::lit(p.0 as f64)).collect();
    let ys: Vec<T> = pixels.iter().map(|p| T::lit(p.1 as f64)).collect();
    let axis = |v: &[T], name: char| -> Result<AxisStats<T>, FitError> {
        let m = mean(v).ok_or(FitError::DegenerateAxis(name))?;
        let sd = population_sd(v);
        if !(sd > T::zero()) {
            return Err(FitError::DegenerateAxis(name));
        }
        Ok(AxisStats { mean: m, sd })
    };
    let sx = axis(&xs, 'x')?;
    let sy = axis(&ys, 'y')?;
    let out = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| ((x - sx.mean) / sx.sd, (y - sy.mean) / sy.sd))
        .collect();
    Ok((out, sx, sy))
}

/// Monomials in coefficient order p00, p10, p01, p20, p11, p02, p30, p21, p12, p03.
pub fn cubic_terms<T: Real>(x: T, y: T) -> [T; N_COEFFS] {
    [
        T::one(),
        x,
        y,
        x * x,
        x * y,
        y * y,
        x * x * x,
        x * x * y,
        x * y * y,
        y * y * y,
    ]
}

pub fn design_matrix<T: Real>(coords: &[(T, T)]) -> Matrix<T> {
    let mut a = Matrix::zeros(coords.len(), N_COEFFS);
    for (i, &(x, y)) in coords.iter().enumerate() {
        for (c, v) in cubic_terms(x, y).into_iter().enumerate() {
            a.set(i, c, v);
        }
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFit<T> {
    /// p00, p10, p01, p20, p11, p02, p30, p21, p12, p03.
    pub coefficients: [T; N_COEFFS],
    /// Residual sum of squares.
    pub se: T,
    pub r2: T,
    pub r2_adj: T,
    pub rmse: T,
    pub n_points: usize,
}

impl<T: Real> SurfaceFit<T> {
    pub fn evaluate(&self, x: T, y: T) -> T {
        cubic_terms(x, y)
            .iter()
            .zip(&self.coefficients)
            .map(|(&t, &c)| t * c)
            .sum()
    }

    pub fn to_array(&self) -> [T; 14] {
        let mut out = [T::zero(); 14];
        out[..N_COEFFS].copy_from_slice(&self.coefficients);
        out[10] = self.se;
        out[11] = self.r2;
        out[12] = self.r2_adj;
        out[13] = self.rmse;
        out
    }
}

pub fn fit_cubic<T: Real>(region: &Region<T>) -> Result<SurfaceFit<T>, FitError> {
    fit_cubic_points(&region.pixels, &region.intensities)
}

/// Least-squares cubic fit of `values` over integer pixel positions.
pub fn fit_cubic_points<T: Real>(
    pixels: &[(i64, i64)],
    values: &[T],
) -> Result<SurfaceFit<T>, FitError> {
    assert_eq!(pixels.len(), values.len());
    let n = pixels.len();
    if n <= N_COEFFS {
        return Err(FitError::TooFewPixels(n));
    }
    let (coords, _, _) = standardize_coords::<T>(pixels)?;
    let a = design_matrix(&coords);
    let beta = lstsq_qr(&a, values).map_err(|e| FitError::RankDeficient(e.column))?;
    let fitted = a.mul_vec(&beta);
    let se: T = values
        .iter()
        .zip(&fitted)
        .map(|(&z, &f)| (z - f) * (z - f))
        .sum();
    let zbar = mean(values).unwrap_or_else(T::zero);
    let sst: T = values.iter().map(|&z| (z - zbar) * (z - zbar)).sum();
    let nf = T::from_usize_lossy(n);
    let dof = T::from_usize_lossy(n - N_COEFFS);
    let (r2, r2_adj) = if sst > T::zero() {
        let r2 = T::one() - se / sst;
        (r2, T::one() - (T::one() - r2) * (nf - T::one()) / dof)
    } else {
        (T::one(), T::one())
    };
    let mut coefficients = [T::zero(); N_COEFFS];
    coefficients.copy_from_slice(&beta);
    Ok(SurfaceFit {
        coefficients,
        se,
        r2,
        r2_adj,
        rmse: (se / dof).sqrt(),
        n_points: n,
    })
}

/// Ten coefficients and four goodness-of-fit measures, combined over sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFeatures14<T> {
    pub combined: [T; 14],
    pub left: SurfaceFit<T>,
    pub right: SurfaceFit<T>,
}

pub fn surface_features<T: Real>(
    pair: &RegionPair<T>,
    combine: SideCombination,
) -> Result<SurfaceFeatures14<T>, FitError> {
    let left = fit_cubic(&pair.left)?;
    let right = fit_cubic(&pair.right_flipped)?;
    let (l, r) = (left.to_array(), right.to_array());
    let mut combined = [T::zero(); 14];
    for k in 0..14 {
        combined[k] = combine.combine(l[k], r[k]);
    }
    Ok(SurfaceFeatures14 {
        combined,
        left,
        right,
    })
}
