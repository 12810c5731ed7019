use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{attach_label, gaussian_vector, DataStream, LabelMode, StreamRng};
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::objective::Sample;

/// Parameters of the autoregressive feature chain
///
/// ```text
/// u_k = (1 − ρ) u_{k−1} + ρ v_k + ρ ε θ_{k−1} ṽ_k,    y_k = u_kᵀ θ_r + v'_k
/// ```
///
/// with `v_k ~ N(0, σ²I)` and scalar `ṽ_k, v'_k ~ N(0, σ²)`. `ε = 0` is the
/// state-independent AR(1) chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ArChainParams {
    pub rho: f64,
    pub eps: f64,
    pub sigma: f64,
    pub theta_r: DVector<f64>,
}

impl ArChainParams {
    pub fn new(rho: f64, eps: f64, sigma: f64, theta_r: DVector<f64>) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "chain mixing rho must lie in (0, 1), got {rho}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise scale sigma must be positive, got {sigma}"
            )));
        }
        if !eps.is_finite() {
            return Err(Error::InvalidParameter(
                "state dependence eps must be finite".into(),
            ));
        }
        ensure_finite("theta_r", theta_r.as_slice())?;
        Ok(ArChainParams {
            rho,
            eps,
            sigma,
            theta_r,
        })
    }

    pub fn ar1(rho: f64, sigma: f64, theta_r: DVector<f64>) -> Result<Self> {
        Self::new(rho, 0.0, sigma, theta_r)
    }

    /// Per-coordinate stationary variance of `u` when `ε = 0`.
    pub fn stationary_variance(&self) -> f64 {
        let r = self.rho;
        r * r * self.sigma * self.sigma / (1.0 - (1.0 - r) * (1.0 - r))
    }
}

#[derive(Debug, Clone)]
pub struct MarkovChainStream {
    params: ArChainParams,
    label: LabelMode,
    u_prev: DVector<f64>,
    rng: StreamRng,
}

impl MarkovChainStream {
    /// `u_0` is drawn from `N(0, σ²I)`.
    pub fn new(params: ArChainParams, label: LabelMode, mut rng: StreamRng) -> Self {
        let u_prev = gaussian_vector(&mut rng, params.theta_r.len(), params.sigma);
        MarkovChainStream {
            params,
            label,
            u_prev,
            rng,
        }
    }

    pub fn params(&self) -> &ArChainParams {
        &self.params
    }

    pub fn current_features(&self) -> &DVector<f64> {
        &self.u_prev
    }
}

impl DataStream for MarkovChainStream {
    fn dim(&self) -> usize {
        self.params.theta_r.len()
    }

    fn next_sample(&mut self, theta: &DVector<f64>) -> Result<Sample> {
        ensure_dim(self.dim(), theta.len())?;
        ensure_finite("iterate passed to the data chain", theta.as_slice())?;
        let ArChainParams {
            rho, eps, sigma, ..
        } = self.params;
        let d = self.dim();
        let v = gaussian_vector(&mut self.rng, d, sigma);
        // ṽ is a scalar multiplying the whole iterate
        let v_tilde = sigma * self.rng.sample::<f64, _>(StandardNormal);
        self.u_prev *= 1.0 - rho;
        self.u_prev.axpy(rho, &v, 1.0);
        self.u_prev.axpy(rho * eps * v_tilde, theta, 1.0);
        Ok(attach_label(
            &mut self.rng,
            self.u_prev.clone(),
            &self.params.theta_r,
            sigma,
            self.label,
        ))
    }

    fn reset(&mut self) {
        let d = self.dim();
        self.u_prev = gaussian_vector(&mut self.rng, d, self.params.sigma);
    }
}
