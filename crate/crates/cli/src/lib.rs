//! Orchestration of the talking-face pipeline: configuration, corpus
//! preprocessing, the three training stages, generation and evaluation.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod generate;
pub mod train;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
