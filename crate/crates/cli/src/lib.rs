//! Benchmark harness around the segmentation network and the evaluation
//! toolkit. The `sinet-bench` binary is a thin argument layer over
//! [`commands`].

pub mod commands;
pub mod config;
pub mod error;
pub mod imageio;
pub mod report;
pub mod table;
pub mod toy;

pub use config::{Format, RunConfig};
pub use error::{CliError, Result};
pub use report::{Envelope, Report};
