//! Replicated runs scored against a frozen ground truth.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{rep_seed, ExperimentConfig, SeedDomain};
use super::linalg::spectral_norm;
use super::truth::GroundTruth;
use crate::engine::run;
use crate::error::{ensure_dim, Error, Result};
use crate::inference::{ci, mis_sample};

pub const METRICS_HEADER: [&str; 7] = [
    "checkpoint",
    "err_spectral",
    "err_frobenius",
    "coverage",
    "ci_width",
    "mis",
    "mean_truncations",
];

/// Per-checkpoint averages over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub checkpoint: u64,
    pub err_spectral: f64,
    pub err_frobenius: f64,
    pub coverage: f64,
    pub ci_width: f64,
    pub mis: f64,
    pub mean_truncations: f64,
}

/// One replication at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub rep: usize,
    pub seed: u64,
    pub checkpoint: u64,
    pub n_averaged: u64,
    pub lo: f64,
    pub hi: f64,
    pub covered: u8,
    pub mis: f64,
    pub err_spectral: f64,
    pub err_frobenius: f64,
    pub truncations: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricsRow>,
    pub raw: Vec<RawRow>,
}

fn replicate(
    cfg: &ExperimentConfig,
    model: &super::config::Model,
    truth: &GroundTruth,
    rep: usize,
) -> Result<Vec<RawRow>> {
    let seed = rep_seed(cfg.seed, SeedDomain::Run, rep);
    let sigma = truth.sigma_matrix();
    let target = model.v.dot(&truth.theta());
    let alpha1 = 1.0 - cfg.level;
    let wrap = |e: Error| Error::Replication {
        rep,
        seed,
        source: Box::new(e),
    };

    let mut stream = model.source.instantiate(seed).map_err(wrap)?;
    let trace = run(
        &model.objective,
        &mut stream,
        model.theta0.clone(),
        cfg.n_iters,
        &model.checkpoints,
        &model.settings,
    )
    .map_err(wrap)?;

    trace
        .snapshots
        .iter()
        .map(|snap| {
            let interval = ci(
                &snap.theta_bar,
                &snap.sigma_hat,
                &model.v,
                snap.n_averaged(),
                cfg.level,
            )
            .map_err(|e| wrap(e.at_iteration(snap.k)))?;
            let diff = &snap.sigma_hat.sigma_hat - &sigma;
            let mis = mis_sample(interval.lo, interval.hi, alpha1, &[target])?.mis;
            Ok(RawRow {
                rep,
                seed,
                checkpoint: snap.k,
                n_averaged: snap.n_averaged(),
                lo: interval.lo,
                hi: interval.hi,
                covered: interval.contains(target) as u8,
                mis,
                err_spectral: spectral_norm(&diff),
                err_frobenius: diff.norm(),
                truncations: snap.truncations,
            })
        })
        .collect()
}

/// Run `n_reps` seeded replications and score every checkpoint.
///
/// Replications run in parallel; results are reduced in replication order so
/// the output does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, truth: &GroundTruth) -> Result<ExperimentOutput> {
    let model = cfg.model()?;
    ensure_dim(cfg.d, truth.dim())?;

    let per_rep: Vec<Vec<RawRow>> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|rep| replicate(cfg, &model, truth, rep))
        .collect::<Result<_>>()?;

    let reps = cfg.n_reps as f64;
    let rows = model
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, &checkpoint)| {
            let mut row = MetricsRow {
                checkpoint,
                err_spectral: 0.0,
                err_frobenius: 0.0,
                coverage: 0.0,
                ci_width: 0.0,
                mis: 0.0,
                mean_truncations: 0.0,
            };
            for r in per_rep.iter().map(|rows| &rows[i]) {
                row.err_spectral += r.err_spectral;
                row.err_frobenius += r.err_frobenius;
                row.coverage += r.covered as f64;
                row.ci_width += r.hi - r.lo;
                row.mis += r.mis;
                row.mean_truncations += r.truncations as f64;
            }
            row.err_spectral /= reps;
            row.err_frobenius /= reps;
            row.coverage /= reps;
            row.ci_width /= reps;
            row.mis /= reps;
            row.mean_truncations /= reps;
            row
        })
        .collect();

    Ok(ExperimentOutput {
        rows,
        raw: per_rep.into_iter().flatten().collect(),
    })
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(METRICS_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_raw<W: Write>(rows: &[RawRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(Error::Config(format!(
            "metrics header {header:?} does not match {METRICS_HEADER:?}"
        )));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}
