//! File formats, experiment orchestration, hyperparameter search and the
//! command-line front end for bidirectional latent embedding zero-shot
//! recognition. The numerical work lives in `bidi-zsl-core`.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod search;
pub mod split;
pub mod synthetic;

pub use config::{preset, Dataset, ExperimentConfig, HyperParams, PRESETS};
pub use error::{HarnessError, Result};
pub use pipeline::{run_on_dataset, run_pipeline, PipelineReport};
pub use split::{make_classwise_split, SplitSpec};
