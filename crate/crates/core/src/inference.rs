//! Confidence intervals for linear functionals `vᵀθ*` and interval scores.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::batch_means::CovarianceEstimate;
use crate::error::{ensure_dim, Error, Result};
use crate::normal;

/// Closed interval `[lo, hi]` at nominal `level`, built from `k` iterates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub k: u64,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Boundary points count as covered.
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisReport {
    pub mis: f64,
    pub alpha1: f64,
    pub n_eval: usize,
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )))
    }
}

/// Normal-approximation interval `vᵀθ̄ ± z_{(1+level)/2} · sqrt(vᵀΣ̂v / k)`.
///
/// A slightly negative `vᵀΣ̂v` (at most `1e-10 · tr(Σ̂) · ‖v‖²` below zero)
/// is treated as zero; anything below that is reported as a numerical failure.
pub fn ci(
    theta_bar: &DVector<f64>,
    sigma_hat: &CovarianceEstimate,
    v: &DVector<f64>,
    k: u64,
    level: f64,
) -> Result<ConfidenceInterval> {
    check_level(level)?;
    if k == 0 {
        return Err(Error::InvalidParameter("interval needs k >= 1".into()));
    }
    ensure_dim(theta_bar.len(), v.len())?;
    let mut var = sigma_hat.quadratic_form(v)?;
    if var < 0.0 {
        let tol = 1e-10 * sigma_hat.trace().abs() * v.norm_squared();
        if var < -tol {
            return Err(Error::Numerical(format!(
                "projected variance {var:e} is negative beyond rounding"
            )));
        }
        var = 0.0;
    }
    let center = v.dot(theta_bar);
    let half = normal::quantile(0.5 * (1.0 + level)) * (var / k as f64).sqrt();
    Ok(ConfidenceInterval {
        lo: center - half,
        hi: center + half,
        level,
        k,
    })
}

/// Sample mean interval score of `[lo, hi]` against the draws `z`:
/// width plus `2/α₁` times the distance of every draw that falls outside.
pub fn mis_sample(lo: f64, hi: f64, alpha1: f64, z: &[f64]) -> Result<MisReport> {
    if !(alpha1 > 0.0 && alpha1 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha1 must lie in (0, 1), got {alpha1}"
        )));
    }
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!(
            "interval bounds out of order: [{lo}, {hi}]"
        )));
    }
    if z.is_empty() {
        return Err(Error::InvalidParameter("no evaluation samples".into()));
    }
    let penalty = 2.0 / alpha1;
    let total: f64 = z
        .iter()
        .map(|&zi| {
            let mut s = hi - lo;
            if zi > hi {
                s += penalty * (zi - hi);
            }
            if zi < lo {
                s += penalty * (lo - zi);
            }
            s
        })
        .sum();
    Ok(MisReport {
        mis: total / z.len() as f64,
        alpha1,
        n_eval: z.len(),
    })
}

/// Fraction of `intervals` that contain `truth`.
pub fn coverage(intervals: &[ConfidenceInterval], truth: f64) -> f64 {
    if intervals.is_empty() {
        return f64::NAN;
    }
    intervals.iter().filter(|ci| ci.contains(truth)).count() as f64 / intervals.len() as f64
}
