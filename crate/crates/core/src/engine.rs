//! Truncated SGD with Polyak averaging and an attached OBM estimator.
//!
//! Each step proposes `θ_{k+1} = θ_k − η_{k+1} ∇F(θ_k, x_{k+1})`. The proposal is
//! rejected when the move is at least `d_{k+1}` long or leaves the current
//! truncation ball `K_ϰ` (radius `r0·growth^ϰ`); a rejection restarts the
//! iterate from the initial point, widens the ball, and restarts the data
//! stream, the running average and the covariance estimator.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::batch_means::{BatchSchedule, CovarianceEstimate, ObmAccumulator};
use crate::error::{ensure_dim, Error, Result};
use crate::objective::GradientOracle;
use crate::stream::DataStream;

/// `η_k = eta0 · k^{−a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    eta0: f64,
    a: f64,
}

impl StepSchedule {
    pub fn new(eta0: f64, a: f64) -> Result<Self> {
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step scale must be positive, got {eta0}"
            )));
        }
        if !(a > 0.5 && a < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step exponent must lie in (1/2, 1), got {a}"
            )));
        }
        Ok(StepSchedule { eta0, a })
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn exponent(&self) -> f64 {
        self.a
    }

    /// Step size for 1-based iteration `k`.
    pub fn eta(&self, k: u64) -> f64 {
        self.eta0 * (k as f64).powf(-self.a)
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule {
            eta0: 2.0,
            a: 0.5005,
        }
    }
}

/// Move threshold `d_k = d0 · k^{−b}` and nested balls of radius `r0·growth^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSchedule {
    d0: f64,
    b: f64,
    r0: f64,
    growth: f64,
}

impl TruncationSchedule {
    /// `d0` and `r0` may be `+∞` to switch the respective check off.
    pub fn new(d0: f64, b: f64, r0: f64, growth: f64) -> Result<Self> {
        if !(d0 > 0.0) || !(r0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation threshold and radius must be positive, got d0 = {d0}, r0 = {r0}"
            )));
        }
        if !(b > 0.0 && b < 0.375) {
            return Err(Error::InvalidParameter(format!(
                "threshold exponent must lie in (0, 3/8), got {b}"
            )));
        }
        if !(growth > 1.0 && growth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "truncation growth factor must be > 1, got {growth}"
            )));
        }
        Ok(TruncationSchedule { d0, b, r0, growth })
    }

    /// Never truncates: plain SGD.
    pub fn disabled() -> Self {
        TruncationSchedule {
            d0: f64::INFINITY,
            b: 0.3,
            r0: f64::INFINITY,
            growth: 2.0,
        }
    }

    pub fn threshold(&self, k: u64) -> f64 {
        self.d0 * (k as f64).powf(-self.b)
    }

    pub fn radius(&self, kappa: u32) -> f64 {
        self.r0 * self.growth.powi(kappa as i32)
    }
}

impl Default for TruncationSchedule {
    fn default() -> Self {
        TruncationSchedule {
            d0: 10.0,
            b: 0.3,
            r0: 10.0,
            growth: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    /// The proposal was rejected and the iterate went back to its initial value.
    Reset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub theta: DVector<f64>,
    /// Number of truncations so far.
    pub kappa: u32,
    /// Steps taken so far.
    pub k: u64,
    pub theta_init: DVector<f64>,
}

impl IterateState {
    pub fn new(theta0: DVector<f64>) -> Self {
        IterateState {
            theta: theta0.clone(),
            kappa: 0,
            k: 0,
            theta_init: theta0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Take step `k → k+1` with stochastic gradient `grad = ∇F(θ_k, x_{k+1})`.
    pub fn sgd_step(
        &mut self,
        grad: &DVector<f64>,
        step: &StepSchedule,
        trunc: &TruncationSchedule,
    ) -> Result<StepOutcome> {
        let next = self.k + 1;
        ensure_dim(self.dim(), grad.len()).map_err(|e| e.at_iteration(next))?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("stochastic gradient".into()).at_iteration(next));
        }
        let delta = grad * (-step.eta(next));
        let candidate = &self.theta + &delta;
        self.k = next;
        let d_k = trunc.threshold(next);
        let r = trunc.radius(self.kappa);
        // negated comparisons so a NaN step trips any finite bound
        let too_far = d_k.is_finite() && !(delta.norm() < d_k);
        let outside = r.is_finite() && !(candidate.norm() <= r);
        if too_far || outside {
            self.theta.copy_from(&self.theta_init);
            self.kappa += 1;
            Ok(StepOutcome::Reset)
        } else if candidate.iter().all(|x| x.is_finite()) {
            self.theta = candidate;
            Ok(StepOutcome::Accepted)
        } else {
            Err(Error::NonFinite("iterate".into()).at_iteration(next))
        }
    }
}

/// Loop settings shared by every replication.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub step: StepSchedule,
    pub truncation: TruncationSchedule,
    pub batches: BatchSchedule,
    /// Iterates `θ_1 … θ_burn_in` are excluded from averaging and estimation.
    pub burn_in: u64,
    /// Store every averaged iterate in the trace (memory `O(n·d)`).
    pub keep_iterates: bool,
}

impl RunSettings {
    pub fn new(step: StepSchedule, truncation: TruncationSchedule, batches: BatchSchedule) -> Self {
        RunSettings {
            step,
            truncation,
            batches,
            burn_in: 0,
            keep_iterates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Global iteration index.
    pub k: u64,
    pub theta_bar: DVector<f64>,
    pub sigma_hat: CovarianceEstimate,
    pub truncations: u32,
}

impl Snapshot {
    /// Iterates behind `theta_bar` and `sigma_hat`.
    pub fn n_averaged(&self) -> u64 {
        self.sigma_hat.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub theta_bar: DVector<f64>,
    pub theta_last: DVector<f64>,
    pub n_averaged: u64,
    pub n_truncations: u32,
    pub snapshots: Vec<Snapshot>,
    /// Averaged iterates since the last truncation, when requested.
    pub iterates: Option<Vec<DVector<f64>>>,
}

fn check_checkpoints(checkpoints: &[u64], n: u64, burn_in: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Config(
            "number of iterations must be at least 1".into(),
        ));
    }
    if burn_in >= n {
        return Err(Error::Config(format!(
            "burn-in {burn_in} leaves no iterates out of {n}"
        )));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    if let Some(&c) = checkpoints.iter().find(|&&c| c <= burn_in || c > n) {
        return Err(Error::Config(format!(
            "checkpoint {c} is outside ({burn_in}, {n}]"
        )));
    }
    Ok(())
}

/// Run `n` steps of truncated SGD, recording snapshots at `checkpoints`.
pub fn run<O, S>(
    oracle: &O,
    stream: &mut S,
    theta0: DVector<f64>,
    n: u64,
    checkpoints: &[u64],
    settings: &RunSettings,
) -> Result<RunTrace>
where
    O: GradientOracle + ?Sized,
    S: DataStream + ?Sized,
{
    ensure_dim(stream.dim(), theta0.len())?;
    check_checkpoints(checkpoints, n, settings.burn_in)?;

    let d = theta0.len();
    let mut state = IterateState::new(theta0);
    let mut acc = ObmAccumulator::new(d, settings.batches.clone());
    let mut iterates = settings.keep_iterates.then(Vec::new);
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = checkpoints.iter().peekable();

    for k in 0..n {
        let it = k + 1;
        let sample = stream
            .next_sample(&state.theta)
            .map_err(|e| e.at_iteration(it))?;
        let grad = oracle
            .gradient(&state.theta, &sample)
            .map_err(|e| e.at_iteration(it))?;
        if state.sgd_step(&grad, &settings.step, &settings.truncation)? == StepOutcome::Reset {
            stream.reset();
            acc.reset();
            if let Some(v) = iterates.as_mut() {
                v.clear();
            }
        }
        if it > settings.burn_in {
            acc.update(&state.theta).map_err(|e| e.at_iteration(it))?;
            if let Some(v) = iterates.as_mut() {
                v.push(state.theta.clone());
            }
        }
        if next_checkpoint.peek() == Some(&&it) {
            next_checkpoint.next();
            snapshots.push(Snapshot {
                k: it,
                theta_bar: acc.mean()?,
                sigma_hat: acc.finalize().map_err(|e| e.at_iteration(it))?,
                truncations: state.kappa,
            });
        }
    }

    Ok(RunTrace {
        theta_bar: acc.mean()?,
        theta_last: state.theta,
        n_averaged: acc.n(),
        n_truncations: state.kappa,
        snapshots,
        iterates,
    })
}
