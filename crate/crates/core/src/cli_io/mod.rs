//! Run configuration files and run artifacts.

pub mod config;
pub mod output;
pub mod validate;

pub use config::{DensityKind, ModelKind, RateKind, RunConfig, RunningCostKind};
pub use output::{
    execute, read_iterations, read_manifest, write_outputs, DensitySnapshot, Manifest, MassRow,
    RunArtifacts, ValueTrace, DENSITY_GRID_POINTS,
};
pub use validate::{validate_config, CheckLine, ValidationOutcome, VALIDATION_PAIRS};
