use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use super::{DataStream, StreamRng};
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::objective::Sample;

/// Strategic agents that move their modifiable features towards a better score.
///
/// Agent `i` best-responds to the linear score `h(u) = uᵀθ` under the cost
/// `‖u_S − u⁰_S‖² / (2λ)` by gradient ascent with step `α`:
///
/// ```text
/// u_S ← u_S + α (θ_S − (u_S − u⁰_S) / λ)
/// ```
///
/// Under a fixed `θ` this converges to `u⁰_S + λ θ_S` whenever `0 < α/λ < 2`.
#[derive(Debug, Clone)]
pub struct AgentPopulation {
    features: DMatrix<f64>,
    base_features: DMatrix<f64>,
    modifiable: Vec<bool>,
    labels: Vec<f64>,
    alpha: f64,
    lambda: f64,
    n1: usize,
}

impl AgentPopulation {
    pub fn new(
        base_features: DMatrix<f64>,
        labels: Vec<f64>,
        modifiable: Vec<bool>,
        alpha: f64,
        lambda: f64,
        n1: usize,
    ) -> Result<Self> {
        let m = base_features.nrows();
        if m == 0 {
            return Err(Error::InvalidParameter("agent population is empty".into()));
        }
        ensure_dim(m, labels.len())?;
        ensure_dim(base_features.ncols(), modifiable.len())?;
        ensure_finite("agent features", base_features.as_slice())?;
        if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParameter(format!(
                "agent labels must be -1 or +1, got {y}"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "agent step alpha and cost sensitivity lambda must be positive, got {alpha}, {lambda}"
            )));
        }
        if n1 == 0 || n1 > m {
            return Err(Error::InvalidParameter(format!(
                "agents updated per round must be in 1..={m}, got {n1}"
            )));
        }
        Ok(AgentPopulation {
            features: base_features.clone(),
            base_features,
            modifiable,
            labels,
            alpha,
            lambda,
            n1,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn base_features(&self) -> &DMatrix<f64> {
        &self.base_features
    }

    pub fn modifiable(&self) -> &[bool] {
        &self.modifiable
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_participation(&mut self, n1: usize) -> Result<()> {
        if n1 == 0 || n1 > self.len() {
            return Err(Error::InvalidParameter(format!(
                "agents updated per round must be in 1..={}, got {n1}",
                self.len()
            )));
        }
        self.n1 = n1;
        Ok(())
    }

    /// One gradient-ascent step for agent `i`.
    fn respond(&mut self, i: usize, theta: &DVector<f64>) {
        for j in 0..self.dim() {
            if self.modifiable[j] {
                let u = self.features[(i, j)];
                let drift = theta[j] - (u - self.base_features[(i, j)]) / self.lambda;
                self.features[(i, j)] = u + self.alpha * drift;
            }
        }
    }

    /// Let `n1` uniformly chosen agents respond to `θ`, then report one
    /// uniformly chosen agent's current features and label.
    pub fn agent_round(&mut self, theta: &DVector<f64>, rng: &mut StreamRng) -> Result<Sample> {
        ensure_dim(self.dim(), theta.len())?;
        ensure_finite("iterate passed to the agents", theta.as_slice())?;
        let m = self.len();
        if self.n1 == m {
            for i in 0..m {
                self.respond(i, theta);
            }
        } else {
            for i in index::sample(rng, m, self.n1) {
                self.respond(i, theta);
            }
        }
        let pick = rng.random_range(0..m);
        Ok(Sample::new(
            self.features.row(pick).transpose(),
            self.labels[pick],
        ))
    }

    /// Undo every strategic modification.
    pub fn restore(&mut self) {
        self.features.copy_from(&self.base_features);
    }
}

/// [`AgentPopulation`] paired with its own generator.
#[derive(Debug, Clone)]
pub struct AgentStream {
    population: AgentPopulation,
    rng: StreamRng,
}

impl AgentStream {
    pub fn new(population: AgentPopulation, rng: StreamRng) -> Self {
        AgentStream { population, rng }
    }

    pub fn population(&self) -> &AgentPopulation {
        &self.population
    }
}

impl DataStream for AgentStream {
    fn dim(&self) -> usize {
        self.population.dim()
    }

    fn next_sample(&mut self, theta: &DVector<f64>) -> Result<Sample> {
        self.population.agent_round(theta, &mut self.rng)
    }

    fn reset(&mut self) {
        self.population.restore();
    }
}
