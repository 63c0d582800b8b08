//! Per-subject feature extraction: mean image, segmentation, shape and
//! surface features.

use crate::features::{IMAGE_FEATURES, SHAPE_FEATURES};
use crate::io::Volume;
use crate::preprocess::{mean_image, MeanImage, PreprocessError, SliceWindow};
use crate::scalar::Real;
use crate::segment::{auto_threshold, extract_region_pair, RegionPair, SegmentError, SegmentOptions};
use crate::shape::{shape_features, ShapeError, ShapeOptions};
use crate::surface::{surface_features, FitError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
#[derive(Default)]
pub enum ThresholdMode {
    Fixed(f64),
    #[default]
    Auto,
}


#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtractOptions {
    pub window: SliceWindow,
    pub threshold: ThresholdMode,
    pub segment: SegmentOptions,
    pub shape: ShapeOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectFeatures<T> {
    pub values: [T; IMAGE_FEATURES],
    pub threshold: T,
    pub pair: RegionPair<T>,
    pub warnings: Vec<String>,
}

/// Features of an already averaged image. `override_threshold` beats the
/// configured mode.
pub fn image_features<T: Real>(
    img: &MeanImage<T>,
    override_threshold: Option<f64>,
    opts: &ExtractOptions,
) -> Result<SubjectFeatures<T>, ExtractError> {
    let mut warnings = Vec::new();
    let t = match (override_threshold, opts.threshold) {
        (Some(t), _) | (None, ThresholdMode::Fixed(t)) => T::lit(t),
        (None, ThresholdMode::Auto) => {
            let a = auto_threshold(img, &opts.segment);
            if a.fallback {
                warnings.push(format!(
                    "automatic threshold search failed; fell back to {}",
                    a.threshold
                ));
            }
            a.threshold
        }
    };
    let pair = extract_region_pair(img, t, &opts.segment)?;
    let shape = shape_features(&pair, &opts.shape)?;
    let surface = surface_features(&pair, opts.shape.combine)?;
    let mut values = [T::zero(); IMAGE_FEATURES];
    values[..SHAPE_FEATURES].copy_from_slice(&shape.to_array());
    values[SHAPE_FEATURES..].copy_from_slice(&surface.combined);
    Ok(SubjectFeatures {
        values,
        threshold: t,
        pair,
        warnings,
    })
}

pub fn volume_features<T: Real>(
    vol: &Volume<T>,
    override_threshold: Option<f64>,
    opts: &ExtractOptions,
) -> Result<SubjectFeatures<T>, ExtractError> {
    let img = mean_image(vol, opts.window)?;
    image_features(&img, override_threshold, opts)
}
