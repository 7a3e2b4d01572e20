//! Benchmark metrics, dataset manifests and dataset statistics for concealed
//! object detection.

pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod generalization;
pub mod map;
pub mod metrics;

pub use dataset::{load_manifest, DatasetManifest, Record};
pub use error::{EvalError, Result};
pub use evaluate::{evaluate_dataset, DatasetReport, EvalOptions, MetricReport};
pub use generalization::{generalization_table, GeneralizationRow};
pub use map::{BinaryMask, GrayMap};
pub use metrics::{evaluate, Scores};
