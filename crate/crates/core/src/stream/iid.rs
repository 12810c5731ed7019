use nalgebra::DVector;

use super::{attach_label, gaussian_vector, DataStream, LabelMode, StreamRng};
use crate::error::{Error, Result};
use crate::objective::Sample;

/// `u ~ N(0, σ²I)` independently at every step.
#[derive(Debug, Clone)]
pub struct IidStream {
    sigma: f64,
    theta_r: DVector<f64>,
    label: LabelMode,
    rng: StreamRng,
}

impl IidStream {
    pub fn new(
        sigma: f64,
        theta_r: DVector<f64>,
        label: LabelMode,
        rng: StreamRng,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise scale sigma must be positive, got {sigma}"
            )));
        }
        Ok(IidStream {
            sigma,
            theta_r,
            label,
            rng,
        })
    }
}

impl DataStream for IidStream {
    fn dim(&self) -> usize {
        self.theta_r.len()
    }

    fn next_sample(&mut self, _theta: &DVector<f64>) -> Result<Sample> {
        let u = gaussian_vector(&mut self.rng, self.theta_r.len(), self.sigma);
        Ok(attach_label(
            &mut self.rng,
            u,
            &self.theta_r,
            self.sigma,
            self.label,
        ))
    }

    fn reset(&mut self) {}
}
