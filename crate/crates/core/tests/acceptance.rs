//! Acceptance gate. Every criterion prints one PASS/FAIL line; the test fails
//! if any criterion does.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture`.

use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use obm_sgd::harness::config::{rep_seed, SeedDomain};
use obm_sgd::harness::{
    estimate_ground_truth, fit_slope, run_experiment, spectral_norm, ExperimentConfig, StreamKind,
    TruthMode,
};
use obm_sgd::inference::mis_sample;
use obm_sgd::stream::AgentPopulation;
use obm_sgd::{run, BatchSchedule, Objective, ObmAccumulator, Sample};

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

// Block starts computed directly from ⌊C·m^β⌋: a repaired, strictly
// increasing sequence with a leading block at 1 when a_1 > 1.
fn oracle_starts(c: f64, beta: f64, n: usize) -> Vec<usize> {
    let mut starts = vec![1usize];
    let mut m = 1u32;
    while *starts.last().unwrap() <= n {
        let raw = (c * (m as f64).powf(beta)).floor() as usize;
        let last = *starts.last().unwrap();
        if raw > last {
            starts.push(raw);
        } else if m > 1 {
            starts.push(last + 1);
        }
        m += 1;
    }
    starts
}

// Literal double sum over blocks, on plain slices.
fn oracle_sigma(xs: &[Vec<f64>], c: f64, beta: f64) -> Vec<f64> {
    let n = xs.len();
    let d = xs[0].len();
    let starts = oracle_starts(c, beta, n);
    let mut mean = vec![0.0; d];
    for x in xs {
        for j in 0..d {
            mean[j] += x[j] / n as f64;
        }
    }
    let mut num = vec![0.0; d * d];
    let mut den = 0.0;
    for i in 1..=n {
        let t = *starts.iter().rev().find(|&&a| a <= i).unwrap();
        let l = (i - t + 1) as f64;
        let mut s = vec![0.0; d];
        for x in &xs[t - 1..i] {
            for j in 0..d {
                s[j] += x[j];
            }
        }
        for j in 0..d {
            s[j] -= l * mean[j];
        }
        for r in 0..d {
            for q in 0..d {
                num[r * d + q] += s[r] * s[q];
            }
        }
        den += l;
    }
    num.iter().map(|v| v / den).collect()
}

fn online_sigma(xs: &[DVector<f64>], schedule: BatchSchedule) -> DMatrix<f64> {
    let mut acc = ObmAccumulator::new(xs[0].len(), schedule);
    for x in xs {
        acc.update(x).unwrap();
    }
    acc.finalize().unwrap().sigma_hat
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(1..=5);
        let n = rng.random_range(2..=2000);
        let beta = rng.random_range(1.5..=5.0);
        let c = rng.random_range(0.5..=4.0);
        let xs: Vec<DVector<f64>> = (0..n).map(|_| gaussian(&mut rng, d)).collect();
        let got = online_sigma(&xs, BatchSchedule::new(c, beta).unwrap());
        let plain: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().cloned().collect()).collect();
        let want = DMatrix::from_row_slice(d, d, &oracle_sigma(&plain, c, beta));
        let rel = (&got - &want).norm() / want.norm().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        "oracle equivalence",
        worst <= 1e-10 && secs < 10.0,
        format!("worst relative Frobenius error {worst:.2e}, {secs:.2} s"),
    )
}

fn analytic_iid() -> Outcome {
    let n = 200_000;
    let reps = 100;
    let mut cfg = ExperimentConfig {
        d: 2,
        n_iters: n,
        n_reps: reps,
        checkpoints: Some(vec![n]),
        truth: TruthMode::Analytic,
        ..Default::default()
    };
    cfg.stream.kind = StreamKind::Iid;
    cfg.stream.sigma = 1.0;
    let model = cfg.model().unwrap();
    let estimates: Vec<DMatrix<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut s = model
                .source
                .instantiate(rep_seed(cfg.seed, SeedDomain::Run, rep))
                .unwrap();
            let tr = run(
                &model.objective,
                &mut s,
                model.theta0.clone(),
                n,
                &[n],
                &model.settings,
            )
            .unwrap();
            tr.snapshots[0].sigma_hat.sigma_hat.clone()
        })
        .collect();
    let eye = DMatrix::<f64>::identity(2, 2);
    let mean_err = estimates
        .iter()
        .map(|s| spectral_norm(&(s - &eye)))
        .sum::<f64>()
        / reps as f64;
    let mean = estimates.iter().fold(DMatrix::zeros(2, 2), |a, s| a + s) / reps as f64;
    let entry_dev = (&mean - &eye).amax();
    outcome(
        "analytic iid covariance",
        mean_err <= 0.5 && entry_dev <= 0.1,
        format!(
            "mean spectral error {mean_err:.4} (<= 0.5), max entrywise deviation of mean {entry_dev:.4} (<= 0.1), mean = {:?}",
            mean.as_slice()
        ),
    )
}

fn state_dependent(n: u64, reps: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        d: 2,
        n_iters: n,
        n_reps: reps,
        n_truth_reps: 500,
        ..Default::default()
    };
    cfg.stream.kind = StreamKind::StateDep;
    cfg.stream.rho = 0.5;
    cfg.stream.eps = 0.5;
    cfg.stream.sigma = 1.0;
    cfg
}

fn rate_slope() -> Outcome {
    let mut cfg = state_dependent(1 << 16, 1000);
    cfg.checkpoints = Some((12..=16).map(|j| 1u64 << j).collect());
    let truth = estimate_ground_truth(&cfg).unwrap().truth;
    let rows = run_experiment(&cfg, &truth).unwrap().rows;
    let fit = fit_slope(&rows).unwrap();
    let errs: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.3}", r.err_spectral))
        .collect();
    outcome(
        "rate slope",
        (-0.30..=-0.03).contains(&fit.slope) && fit.r2 >= 0.6,
        format!(
            "slope {:.4} in [-0.30, -0.03], r2 {:.3} (>= 0.6), errors [{}]",
            fit.slope,
            fit.r2,
            errs.join(", ")
        ),
    )
}

fn coverage() -> Outcome {
    let mut cfg = state_dependent(50_000, 200);
    cfg.v = Some(vec![1.0, 1.0]);
    cfg.checkpoints = Some(vec![50_000]);
    let truth = estimate_ground_truth(&cfg).unwrap().truth;
    let row = run_experiment(&cfg, &truth).unwrap().rows.pop().unwrap();
    outcome(
        "coverage",
        (0.90..=0.99).contains(&row.coverage),
        format!(
            "coverage {:.3} in [0.90, 0.99], mean width {:.4}",
            row.coverage, row.ci_width
        ),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

fn finite_differences() -> Outcome {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(0xfd);
    let mut worst: [f64; 2] = [0.0; 2];
    for (slot, obj) in [Objective::linear(), Objective::logistic(0.005).unwrap()]
        .into_iter()
        .enumerate()
    {
        for _ in 0..1000 {
            let d = rng.random_range(1..=6);
            let theta = gaussian(&mut rng, d);
            let u = gaussian(&mut rng, d);
            let y = if slot == 0 {
                rng.sample(StandardNormal)
            } else if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            };
            let x = Sample::new(u, y);
            let g = obj.grad(&theta, &x).unwrap();
            let hess = obj.hessian(&theta, &x).unwrap();
            for j in 0..d {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (obj.loss(&up, &x).unwrap() - obj.loss(&dn, &x).unwrap()) / (2.0 * h);
                worst[slot] = worst[slot].max(rel_err(g[j], fd));
                let col = (obj.grad(&up, &x).unwrap() - obj.grad(&dn, &x).unwrap()) / (2.0 * h);
                for i in 0..d {
                    worst[slot] = worst[slot].max(rel_err(hess[(i, j)], col[i]));
                }
            }
        }
    }
    outcome(
        "gradient and hessian finite differences",
        worst.iter().all(|&w| w <= 1e-6),
        format!(
            "worst relative error: linear {:.2e}, logistic {:.2e} (<= 1e-6)",
            worst[0], worst[1]
        ),
    )
}

fn best_response() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb7);
    let (m, d, lambda) = (40, 5, 0.01);
    let base = DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let labels: Vec<f64> = (0..m)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let modifiable = vec![true, false, true, true, false];
    let mut pop = AgentPopulation::new(
        base.clone(),
        labels,
        modifiable.clone(),
        0.5 * lambda,
        lambda,
        m,
    )
    .unwrap();
    let theta = gaussian(&mut rng, d) * 3.0;
    let gap = |p: &AgentPopulation| {
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in (0..d).filter(|&j| modifiable[j]) {
                let target = base[(i, j)] + lambda * theta[j];
                worst = worst.max((p.features()[(i, j)] - target).abs());
            }
        }
        worst
    };
    let mut prev = gap(&pop);
    let mut worst_ratio_dev: f64 = 0.0;
    let mut reached = None;
    for round in 1..=60 {
        pop.agent_round(&theta, &mut rng).unwrap();
        let now = gap(&pop);
        if round <= 10 {
            worst_ratio_dev = worst_ratio_dev.max((now / prev - 0.5).abs());
        }
        if reached.is_none() && now <= 1e-6 {
            reached = Some(round);
        }
        prev = now;
    }
    let frozen_ok = (0..m).all(|i| {
        (0..d)
            .filter(|&j| !modifiable[j])
            .all(|j| pop.features()[(i, j)] == base[(i, j)])
    });
    outcome(
        "best-response fixed point",
        reached.is_some() && worst_ratio_dev <= 1e-9 && frozen_ok,
        format!(
            "gap <= 1e-6 at round {reached:?}, final gap {prev:.2e}, contraction deviation {worst_ratio_dev:.2e}, frozen coordinates untouched: {frozen_ok}"
        ),
    )
}

fn estimator_invariances() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a);
    let (mut shift, mut linear, mut psd): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    let mut symmetric = true;
    for _ in 0..100 {
        let d = rng.random_range(1..=5);
        let n = rng.random_range(2..=3000);
        let beta = rng.random_range(1.5..=5.0);
        let sched = BatchSchedule::new(2.0, beta).unwrap();
        let xs: Vec<DVector<f64>> = (0..n).map(|_| gaussian(&mut rng, d)).collect();
        let base = online_sigma(&xs, sched.clone());
        let scale = base.norm().max(f64::MIN_POSITIVE);

        let c = gaussian(&mut rng, d) * 100.0;
        let shifted: Vec<DVector<f64>> = xs.iter().map(|x| x + &c).collect();
        shift = shift.max((online_sigma(&shifted, sched.clone()) - &base).norm() / scale);

        let b = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mapped: Vec<DVector<f64>> = xs.iter().map(|x| &b * x).collect();
        let want = &b * &base * b.transpose();
        let got = online_sigma(&mapped, sched);
        linear = linear.max((got - &want).norm() / want.norm().max(f64::MIN_POSITIVE));

        symmetric &= base == base.transpose();
        let tr = base.trace();
        if tr > 0.0 {
            psd = psd.min(base.clone().symmetric_eigenvalues().min() / tr);
        }
    }
    outcome(
        "estimator invariances",
        shift <= 1e-10 && linear <= 1e-9 && symmetric && psd >= -1e-10,
        format!(
            "shift {shift:.2e} (<= 1e-10), linear map {linear:.2e} (<= 1e-9), symmetric {symmetric}, min eigenvalue / trace {psd:.2e} (>= -1e-10)"
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_obm-sgd");
    let run_once = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = Command::new(exe)
            .env("RAYON_NUM_THREADS", threads)
            .args([
                "run",
                "--stream",
                "state-dep",
                "--n-iters",
                "20000",
                "--n-reps",
                "40",
                "--n-truth-reps",
                "60",
                "--seed",
                "17",
                "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = run_once("a.csv", "4");
    let b = run_once("b.csv", "4");
    let c = run_once("c.csv", "1");
    outcome(
        "determinism",
        !a.is_empty() && a == b && a == c,
        format!(
            "{} bytes; identical across runs: {}; identical with one thread: {}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

fn mis_identities() -> Outcome {
    let got = [
        mis_sample(0.0, 1.0, 0.05, &[0.5]).unwrap().mis,
        mis_sample(0.0, 1.0, 0.05, &[1.5]).unwrap().mis,
        mis_sample(0.0, 1.0, 0.05, &[-0.25, 0.5]).unwrap().mis,
    ];
    outcome(
        "MIS identities",
        got == [1.0, 21.0, 6.0],
        format!("{got:?} == [1.0, 21.0, 6.0]"),
    )
}

#[test]
fn primary_criteria() {
    let criteria: [fn() -> Outcome; 9] = [
        oracle_equivalence,
        analytic_iid,
        rate_slope,
        coverage,
        finite_differences,
        best_response,
        estimator_invariances,
        determinism,
        mis_identities,
    ];
    let outcomes: Vec<Outcome> = criteria.iter().map(|f| f()).collect();
    for o in &outcomes {
        println!(
            "{} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| o.name)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
