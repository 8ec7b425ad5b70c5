//! Configuration-driven studies of how super-resolution affects
//! task-based image quality, with dataset files and CSV/SVG reports.

pub mod config;
pub mod dataset;
pub mod error;
pub mod plot;
pub mod report;
pub mod studies;

pub use config::Config;
pub use error::{ExperimentError, Result};
pub use report::{Outcome, Report, ReportRow, Resolution};
