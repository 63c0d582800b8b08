//! Subcommands of the `datquant` tool as library functions: feature
//! extraction, group statistics, cross-validation, importance, phantom
//! generation and slice area profiles.
//!
//! Every command writes machine-readable CSV/JSON next to its output path and
//! returns the in-memory result. Outputs depend only on inputs, config and
//! seed; the worker count never changes a byte.

pub mod commands;
pub mod config;
pub mod provenance;

pub use commands::{
    cmd_area_profile, cmd_cv, cmd_extract, cmd_importance, cmd_phantom, cmd_stats, CvOutcome, ExtractOutcome,
    ImportanceOutcome, PhantomCounts, StatsOutcome,
};
pub use config::{RunConfig, ThresholdConfig, ThresholdKind};
pub use provenance::Provenance;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] datquant::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

macro_rules! core_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

core_error!(
    datquant::io::IoError,
    datquant::features::TableError,
    datquant::stats::StatsError,
    datquant::classify::ClassifyError,
    datquant::phantom::PhantomError,
    datquant::preprocess::PreprocessError
);

impl CliError {
    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
