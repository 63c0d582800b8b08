//! Striatal shape and uptake-surface quantification for DAT SPECT volumes,
//! plus the screening statistics and classifiers built on those features.

pub mod classify;
pub mod features;
pub mod io;
pub mod linalg;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;
pub mod scalar;
pub mod segment;
pub mod shape;
pub mod stats;
pub mod surface;

pub use scalar::Real;

use thiserror::Error;

pub type Volume = io::Volume<f64>;
pub type MeanImage = preprocess::MeanImage<f64>;
pub type RegionPair = segment::RegionPair<f64>;
pub type SurfaceFit = surface::SurfaceFit<f64>;
pub type SubjectFeatures = pipeline::SubjectFeatures<f64>;
pub type FeatureTable = features::FeatureTable<f64>;
pub type Dataset = classify::Dataset<f64>;
pub type TrainedModel = classify::TrainedModel<f64>;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Preprocess(#[from] preprocess::PreprocessError),
    #[error(transparent)]
    Segment(#[from] segment::SegmentError),
    #[error(transparent)]
    Shape(#[from] shape::ShapeError),
    #[error(transparent)]
    Fit(#[from] surface::FitError),
    #[error(transparent)]
    Extract(#[from] pipeline::ExtractError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error(transparent)]
    Classify(#[from] classify::ClassifyError),
    #[error(transparent)]
    Phantom(#[from] phantom::PhantomError),
    #[error(transparent)]
    Table(#[from] features::TableError),
}
