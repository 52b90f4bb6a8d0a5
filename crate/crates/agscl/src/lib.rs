//! Experiment runner, file formats, and CLI plumbing for the `agscl-core`
//! continual-learning engine.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod idx;
pub mod report;
pub mod runner;

pub use error::{AppError, AppResult};
