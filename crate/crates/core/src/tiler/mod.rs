//! Sparse and co-sparse tiling pipelines, schedule synthesis and
//! verification of the uniform-frequency guarantee.

pub mod cosparse;
pub mod schedule;
pub mod section;
mod segment;
pub mod sparse;

use crate::admissible::AdmError;
use crate::exactnum::ExactError;
use crate::sections::SectionError;
use crate::tileable::TileError;
use thiserror::Error;

pub use cosparse::{classify_limit, cosparse_construct, full_pipeline};
pub use section::{
    verify_uniform_frequency, FrequencyReport, LimitClass, PartitionWitness, Region, ShiftEntry, TiledSection,
    UniformFrequency,
};
pub use sparse::{sparse_tile, sparse_tile_with, SparseOptions, StageReport};
pub use schedule::{build_schedule, Schedule, ScheduleOptions, WitnessKind, WitnessRecord};

/// Errors of the tiling pipelines.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TilerError {
    /// Schedule synthesis failed.
    #[error("schedule: {0}")]
    Schedule(String),
    /// A stage could not complete.
    #[error("stage {stage}: {msg}")]
    Stage {
        /// Stage index.
        stage: usize,
        /// Explanation.
        msg: String,
    },
    /// Input does not meet the pipeline preconditions.
    #[error("precondition: {0}")]
    Precondition(String),
    /// A produced certificate failed its replay.
    #[error("verification: {0}")]
    Verification(String),
    /// Exact arithmetic failure.
    #[error(transparent)]
    Exact(#[from] ExactError),
    /// Tileable-layer failure.
    #[error(transparent)]
    Tile(#[from] TileError),
    /// Window-layer failure.
    #[error(transparent)]
    Section(#[from] SectionError),
    /// Admissible-layer failure.
    #[error(transparent)]
    Adm(#[from] AdmError),
}
