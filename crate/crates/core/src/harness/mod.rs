//! Replicated experiments: ground truth, per-checkpoint metrics, rate fits.

pub mod config;
pub mod experiment;
pub mod linalg;
pub mod slope;
pub mod truth;

pub use config::{ExperimentConfig, StreamConfig, StreamKind, TruthMode};
pub use experiment::{read_metrics, run_experiment, write_metrics, write_raw, MetricsRow, RawRow};
pub use linalg::spectral_norm;
pub use slope::{fit_loglog, fit_slope, SlopeFit};
pub use truth::{estimate_ground_truth, load_or_estimate, GroundTruth, TruthReport};
