//! Files in and out: edge lists, splits, run configuration, reports and the
//! experiment driver.

pub mod artifact;
pub mod config;
pub mod dataset;
pub mod experiment;
pub mod report;
pub mod split;

pub use config::RunConfig;
pub use dataset::{load_edge_list, verify_stats, Dataset, DatasetStats, EdgeFormat, ExpectedStats};
pub use experiment::run_experiment;
pub use report::Report;
pub use split::split_dataset;
