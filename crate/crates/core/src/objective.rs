//! Per-sample losses and their derivatives.
//!
//! Squared loss is `½(y − uᵀθ)²`, so the population Hessian is `E[uuᵀ]`
//! without a factor of two. Logistic loss is `log(1 + exp(−y uᵀθ)) + (reg/2)‖θ‖²`
//! with labels in {−1, +1}.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};

pub const DEFAULT_REG: f64 = 0.005;

/// One observation `x = (u, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub u: DVector<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(u: DVector<f64>, y: f64) -> Self {
        Sample { u, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    LinearSq,
    LogisticL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    #[serde(default)]
    pub reg: f64,
}

/// Anything that can produce a stochastic gradient `∇F(θ, x)`.
pub trait GradientOracle {
    fn gradient(&self, theta: &DVector<f64>, sample: &Sample) -> Result<DVector<f64>>;
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Objective {
    pub fn linear() -> Self {
        Objective {
            kind: ObjectiveKind::LinearSq,
            reg: 0.0,
        }
    }

    pub fn logistic(reg: f64) -> Result<Self> {
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularization must be finite and >= 0, got {reg}"
            )));
        }
        Ok(Objective {
            kind: ObjectiveKind::LogisticL2,
            reg,
        })
    }

    fn check(&self, theta: &DVector<f64>, sample: &Sample) -> Result<()> {
        ensure_dim(theta.len(), sample.u.len())?;
        ensure_finite("theta", theta.as_slice())?;
        ensure_finite("sample features", sample.u.as_slice())?;
        ensure_finite("sample label", &[sample.y])?;
        if self.kind == ObjectiveKind::LogisticL2 && sample.y != 1.0 && sample.y != -1.0 {
            return Err(Error::InvalidParameter(format!(
                "logistic label must be -1 or +1, got {}",
                sample.y
            )));
        }
        Ok(())
    }

    pub fn loss(&self, theta: &DVector<f64>, sample: &Sample) -> Result<f64> {
        self.check(theta, sample)?;
        let margin = sample.u.dot(theta);
        Ok(match self.kind {
            ObjectiveKind::LinearSq => 0.5 * (sample.y - margin).powi(2),
            ObjectiveKind::LogisticL2 => {
                softplus(-sample.y * margin) + 0.5 * self.reg * theta.norm_squared()
            }
        })
    }

    pub fn grad(&self, theta: &DVector<f64>, sample: &Sample) -> Result<DVector<f64>> {
        self.check(theta, sample)?;
        let margin = sample.u.dot(theta);
        Ok(match self.kind {
            ObjectiveKind::LinearSq => &sample.u * (-(sample.y - margin)),
            ObjectiveKind::LogisticL2 => {
                let y = sample.y;
                &sample.u * (-y * sigmoid(-y * margin)) + theta * self.reg
            }
        })
    }

    pub fn hessian(&self, theta: &DVector<f64>, sample: &Sample) -> Result<DMatrix<f64>> {
        self.check(theta, sample)?;
        let outer = &sample.u * sample.u.transpose();
        Ok(match self.kind {
            ObjectiveKind::LinearSq => outer,
            ObjectiveKind::LogisticL2 => {
                let s = sigmoid(sample.u.dot(theta));
                let d = theta.len();
                outer * (s * (1.0 - s)) + DMatrix::identity(d, d) * self.reg
            }
        })
    }
}

impl GradientOracle for Objective {
    fn gradient(&self, theta: &DVector<f64>, sample: &Sample) -> Result<DVector<f64>> {
        self.grad(theta, sample)
    }
}
