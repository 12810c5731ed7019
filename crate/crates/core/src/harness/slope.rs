use serde::Serialize;

use super::experiment::MetricsRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "slope fit needs at least 4 points, got {}",
            xs.len()
        )));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "log-log fit needs positive finite values, got {bad}"
        )));
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    if hi / lo < 10.0 {
        return Err(Error::InvalidParameter(format!(
            "checkpoints span {lo}..{hi}, less than one decade"
        )));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    // a perfectly flat series is fitted exactly
    let r2 = if syy <= f64::EPSILON * f64::EPSILON * n {
        1.0
    } else {
        1.0 - sse / syy
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
    })
}

/// Slope of log spectral-norm error against log checkpoint.
pub fn fit_slope(rows: &[MetricsRow]) -> Result<SlopeFit> {
    let xs: Vec<f64> = rows.iter().map(|r| r.checkpoint as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.err_spectral).collect();
    fit_loglog(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(f: impl Fn(f64) -> f64) -> Vec<MetricsRow> {
        [1e3, 1e4, 1e5, 1e6, 4e6]
            .iter()
            .map(|&k| MetricsRow {
                checkpoint: k as u64,
                err_spectral: f(k),
                err_frobenius: f(k),
                coverage: 0.95,
                ci_width: 1.0,
                mis: 1.0,
                mean_truncations: 0.0,
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let fit = fit_slope(&rows(|k| k.powf(-0.125))).unwrap();
        assert!((fit.slope + 0.125).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series() {
        let fit = fit_slope(&rows(|_| 0.3)).unwrap();
        assert!(fit.slope.abs() < 1e-15);
        assert_eq!(fit.r2, 1.0);
    }

    #[test]
    fn preconditions() {
        let mut r = rows(|k| 1.0 / k);
        r[2].err_spectral = 0.0;
        assert!(fit_slope(&r).is_err());
        assert!(fit_slope(&rows(|k| k)[..3]).is_err());
        assert!(fit_loglog(&[100.0, 200.0, 300.0, 400.0], &[1.0; 4]).is_err());
    }
}
