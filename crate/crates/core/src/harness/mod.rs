//! Configuration files, experiment runners and artifact output.
//!
//! A configuration is a flat `[section] key = value` file (or the equivalent
//! JSON object) with sections `model`, `algorithm`, `compare`, `study` and
//! `output`. Every artifact embeds the resolved configuration, including the
//! master seed.

mod config;
mod document;
mod run;

pub use config::{
    load_config, load_config_with, parse_document, validate_config, AlgorithmSpec, Alignment, BuiltModel, CompareSpec,
    ExperimentConfig, ModelSpec, OutputSpec, Overrides, StudyKind, StudySpec, OUT_DIR_ENV,
};
pub use document::{Diagnostic, Document};
pub use run::{
    exit_code, export_dataset, run_comparison, run_single, run_study, Artifacts, ComparisonSuite,
    AVERAGING_DEFAULT_EPSILONS, BIAS_DEFAULT_DELTAS, CONCENTRATION_DEFAULT_BETAS,
};
