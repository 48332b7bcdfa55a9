//! End-to-end workflow: configuration, on-disk formats, model archives, the
//! synthetic paired dataset and the command implementations behind the CLI.

pub mod archive;
pub mod commands;
pub mod config;
pub mod files;
pub mod synthetic;

pub use archive::{ArchivedModel, InputPipeline, ModelArchive};
pub use commands::*;
pub use config::{ClinicalSource, ExperimentConfig, ImageSource};
pub use files::{class_names, FeatureFile, LabelFile, ProbabilityFile};
pub use synthetic::{generate_synthetic, SyntheticData};
