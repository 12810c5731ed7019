//! Monte-Carlo ground truth `(θ*, Σ)` and its JSON cache.
//!
//! `θ*` is the mean of `θ̄_n` over independent replications and `Σ` is `n`
//! times their sample covariance, the finite-`n` version of the CLT
//! `√n(θ̄_n − θ*) → N(0, Σ)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{rep_seed, ExperimentConfig, Model, SeedDomain, StreamKind, TruthMode};
use crate::engine::run;
use crate::error::{Error, Result};
use crate::objective::ObjectiveKind;

pub const MIN_TRUTH_REPS: usize = 50;
const BOOTSTRAP_RESAMPLES: usize = 200;

/// Serialized as `{theta_star, sigma, reps, config_hash}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub theta_star: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub reps: usize,
    pub config_hash: String,
}

impl GroundTruth {
    pub fn new(
        theta_star: &DVector<f64>,
        sigma: &DMatrix<f64>,
        reps: usize,
        config_hash: String,
    ) -> Self {
        GroundTruth {
            theta_star: theta_star.iter().cloned().collect(),
            sigma: sigma
                .row_iter()
                .map(|r| r.iter().cloned().collect())
                .collect(),
            reps,
            config_hash,
        }
    }

    pub fn theta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta_star)
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let d = self.sigma.len();
        DMatrix::from_fn(d, d, |i, j| self.sigma[i][j])
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let t: GroundTruth = serde_json::from_str(&text)?;
        let d = t.theta_star.len();
        if t.sigma.len() != d || t.sigma.iter().any(|r| r.len() != d) {
            return Err(Error::Config(format!("ground truth sigma is not {d}x{d}")));
        }
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// `θ* = θ_r` and `Σ = σ²·(E[uuᵀ])⁻¹ = I` for `u ~ N(0, σ²I)` with squared loss.
    pub fn analytic_iid_linear(cfg: &ExperimentConfig) -> Result<Self> {
        if cfg.stream.kind != StreamKind::Iid || cfg.objective != ObjectiveKind::LinearSq {
            return Err(Error::Config(
                "analytic ground truth exists only for the i.i.d. linear model".into(),
            ));
        }
        let d = cfg.d;
        let theta_r = match &cfg.stream.theta_r {
            Some(t) => DVector::from_column_slice(t),
            None => DVector::from_element(d, 1.0),
        };
        let s2 = cfg.stream.sigma * cfg.stream.sigma;
        let design = DMatrix::identity(d, d) * s2;
        let inv = design
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular design covariance".into()))?;
        Ok(GroundTruth::new(&theta_r, &(inv * s2), 0, cfg.truth_hash()))
    }
}

/// Ground truth plus Monte-Carlo uncertainty of the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthReport {
    pub truth: GroundTruth,
    /// Standard error of each coordinate of `θ*`.
    pub theta_se: Vec<f64>,
    /// Bootstrap-over-replications standard error of `Σ`, relative in Frobenius norm.
    pub sigma_rel_se: f64,
}

fn sample_covariance(xs: &[&DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = xs[0].len();
    let r = xs.len() as f64;
    let mean = xs.iter().fold(DVector::zeros(d), |a, x| a + *x) / r;
    let mut cov = DMatrix::zeros(d, d);
    for x in xs {
        let c = *x - &mean;
        cov += &c * c.transpose();
    }
    (mean, cov / (r - 1.0))
}

fn replicate_averages(cfg: &ExperimentConfig, model: &Model) -> Result<Vec<DVector<f64>>> {
    let outcomes: Vec<(u64, Result<DVector<f64>>)> = (0..cfg.n_truth_reps)
        .into_par_iter()
        .map(|rep| {
            let seed = rep_seed(cfg.seed, SeedDomain::Truth, rep);
            let out = model.source.instantiate(seed).and_then(|mut stream| {
                run(
                    &model.objective,
                    &mut stream,
                    model.theta0.clone(),
                    cfg.n_iters,
                    &[],
                    &model.settings,
                )
            });
            let out = out.and_then(|t| {
                if t.theta_bar.iter().all(|x| x.is_finite()) {
                    Ok(t.theta_bar)
                } else {
                    Err(Error::NonFinite("averaged iterate".into()))
                }
            });
            (seed, out)
        })
        .collect();

    let mut divergent = Vec::new();
    let mut averages = Vec::with_capacity(outcomes.len());
    for (rep, (seed, out)) in outcomes.into_iter().enumerate() {
        match out {
            Ok(t) => averages.push(t),
            Err(e) if e.exit_code() == 3 => divergent.push(seed),
            Err(e) => {
                return Err(Error::Replication {
                    rep,
                    seed,
                    source: Box::new(e),
                })
            }
        }
    }
    if !divergent.is_empty() {
        return Err(Error::Divergent(divergent));
    }
    Ok(averages)
}

pub fn estimate_ground_truth(cfg: &ExperimentConfig) -> Result<TruthReport> {
    if cfg.truth == TruthMode::Analytic {
        return Ok(TruthReport {
            truth: GroundTruth::analytic_iid_linear(cfg)?,
            theta_se: vec![0.0; cfg.d],
            sigma_rel_se: 0.0,
        });
    }
    if cfg.n_truth_reps < MIN_TRUTH_REPS {
        return Err(Error::Config(format!(
            "n_truth_reps must be at least {MIN_TRUTH_REPS}, got {}",
            cfg.n_truth_reps
        )));
    }
    let model = cfg.model()?;
    let averages = replicate_averages(cfg, &model)?;
    let refs: Vec<&DVector<f64>> = averages.iter().collect();
    let (theta_star, cov) = sample_covariance(&refs);
    let n_eff = (cfg.n_iters - cfg.burn_in) as f64;
    let sigma = &cov * n_eff;
    let reps = averages.len();
    let theta_se = cov
        .diagonal()
        .iter()
        .map(|v| (v / reps as f64).sqrt())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed(cfg.seed, SeedDomain::Bootstrap, 0));
    let boots: Vec<DMatrix<f64>> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let resample: Vec<&DVector<f64>> = (0..reps)
                .map(|_| &averages[rng.random_range(0..reps)])
                .collect();
            sample_covariance(&resample).1 * n_eff
        })
        .collect();
    let boot_mean = boots
        .iter()
        .fold(DMatrix::zeros(cfg.d, cfg.d), |a, b| a + b)
        / BOOTSTRAP_RESAMPLES as f64;
    let spread = boots
        .iter()
        .map(|b| (b - &boot_mean).norm_squared())
        .sum::<f64>()
        / (BOOTSTRAP_RESAMPLES - 1) as f64;
    let sigma_rel_se = spread.sqrt() / sigma.norm().max(f64::MIN_POSITIVE);

    Ok(TruthReport {
        truth: GroundTruth::new(&theta_star, &sigma, reps, cfg.truth_hash()),
        theta_se,
        sigma_rel_se,
    })
}

/// Reuse the cached truth at `path` when its hash matches `cfg`; otherwise
/// recompute and overwrite the cache.
pub fn load_or_estimate(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    if path.exists() {
        let cached = GroundTruth::load(path)?;
        if cached.config_hash == cfg.truth_hash() {
            return Ok(cached);
        }
    }
    let report = estimate_ground_truth(cfg)?;
    report.truth.save(path)?;
    Ok(report.truth)
}
