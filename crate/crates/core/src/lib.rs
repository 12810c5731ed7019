//! Truncated stochastic gradient descent on Markovian data streams with an
//! online overlapping batch-means estimate of the asymptotic covariance of the
//! averaged iterate.
//!
//! The pieces fit together as follows: a [`stream::DataStream`] produces
//! samples conditioned on the current iterate, an [`objective::Objective`]
//! turns them into stochastic gradients, [`engine::run`] drives the truncated
//! SGD loop and feeds every iterate into a [`batch_means::ObmAccumulator`], and
//! [`inference`] turns `(θ̄_k, Σ̂_k)` into confidence intervals. The
//! [`harness`] replicates all of this and scores it against a ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch_means;
pub mod engine;
pub mod error;
pub mod harness;
pub mod inference;
pub mod normal;
pub mod objective;
pub mod stream;

pub use batch_means::{BatchSchedule, CovarianceEstimate, LeadIn, ObmAccumulator};
pub use engine::{run, IterateState, RunSettings, RunTrace, StepSchedule, TruncationSchedule};
pub use error::{Error, Result};
pub use objective::{GradientOracle, Objective, ObjectiveKind, Sample};
