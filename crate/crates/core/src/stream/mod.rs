//! Data streams feeding the SGD loop.
//!
//! Every stream is conditioned on the current iterate: state-independent
//! streams simply ignore it.

mod agents;
mod chain;
mod dataset;
mod iid;

pub use agents::{AgentPopulation, AgentStream};
pub use chain::{ArChainParams, MarkovChainStream};
pub use dataset::{load_csv, CsvSchema};
pub use iid::IidStream;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::objective::{sigmoid, Sample};

/// Generator used by every stream; ChaCha gives platform-independent output.
pub type StreamRng = ChaCha8Rng;

pub trait DataStream {
    fn dim(&self) -> usize;

    /// Draw `x_{k+1}` given the current iterate `θ_k`.
    fn next_sample(&mut self, theta: &DVector<f64>) -> Result<Sample>;

    /// Restart from the stream's initial law. The generator keeps running.
    fn reset(&mut self);
}

impl<S: DataStream + ?Sized> DataStream for Box<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn next_sample(&mut self, theta: &DVector<f64>) -> Result<Sample> {
        (**self).next_sample(theta)
    }

    fn reset(&mut self) {
        (**self).reset()
    }
}

/// How the response is attached to a feature vector `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// `y = uᵀθ_r + N(0, σ²)`.
    #[default]
    Regression,
    /// `y ∈ {−1, +1}` with `P(y = 1) = 1/(1 + exp(−uᵀθ_r))`.
    Logistic,
}

pub(crate) fn gaussian_vector(rng: &mut StreamRng, d: usize, sigma: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| sigma * rng.sample::<f64, _>(StandardNormal))
}

pub(crate) fn attach_label(
    rng: &mut StreamRng,
    u: DVector<f64>,
    theta_r: &DVector<f64>,
    sigma: f64,
    mode: LabelMode,
) -> Sample {
    let margin = u.dot(theta_r);
    let y = match mode {
        LabelMode::Regression => margin + sigma * rng.sample::<f64, _>(StandardNormal),
        LabelMode::Logistic => {
            if rng.random::<f64>() < sigmoid(margin) {
                1.0
            } else {
                -1.0
            }
        }
    };
    Sample::new(u, y)
}
