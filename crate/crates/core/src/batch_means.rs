//! Online overlapping batch-means (OBM) covariance estimation.
//!
//! For a strictly increasing sequence of block starts `a_1 < a_2 < …`, iterate
//! `k ∈ [a_m, a_{m+1})` belongs to the block that starts at `t_k = a_m` and has
//! length `l_k = k − t_k + 1`. With block sums `S_i = Σ_{k=t_i}^{i} θ_k` the
//! estimator after `n` iterates is
//!
//! ```text
//! Σ̂_n = Σ_i (S_i − l_i θ̄_n)(S_i − l_i θ̄_n)ᵀ / Σ_i l_i
//! ```
//!
//! Expanding the square gives
//! `Σ̂_n = (V − w θ̄ᵀ − θ̄ wᵀ + q θ̄θ̄ᵀ) / L` with `V = Σ S_i S_iᵀ`,
//! `w = Σ l_i S_i`, `q = Σ l_i²` and `L = Σ l_i`, all of which are running sums,
//! so [`ObmAccumulator`] needs `O(d²)` time and memory per iterate and never
//! stores the iterate history.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{ensure_dim, ensure_finite, Error, Result};

/// How iterates before the first formula block start are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadIn {
    /// Iterates `k < a_1` form one growing block starting at 1.
    #[default]
    GrowingBlock,
    /// Replace `a_1` with 1.
    AnchorAtOne,
    /// No block exists for `k < a_1`; asking for one is an error.
    Strict,
}

/// A block `{θ_start, …, θ_k}` as seen from iterate `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: u64,
    pub len: u64,
}

/// Block schedule `a_m = ⌊C·m^β⌋`, forced strictly increasing.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    c: f64,
    beta: f64,
    lead_in: LeadIn,
    // effective block starts, extended lazily
    starts: Vec<u64>,
    // last formula index m that has been pushed
    m: u64,
}

impl BatchSchedule {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        Self::with_lead_in(c, beta, LeadIn::default())
    }

    pub fn with_lead_in(c: f64, beta: f64, lead_in: LeadIn) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "batch scale C must be positive, got {c}"
            )));
        }
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "batch exponent beta must be > 1, got {beta}"
            )));
        }
        let mut s = BatchSchedule {
            c,
            beta,
            lead_in,
            starts: Vec::new(),
            m: 1,
        };
        let a1 = s.formula(1).max(1);
        match lead_in {
            LeadIn::GrowingBlock if a1 > 1 => s.starts.extend([1, a1]),
            LeadIn::AnchorAtOne => s.starts.push(1),
            _ => s.starts.push(a1),
        }
        Ok(s)
    }

    /// Default exponent `β = 2/(1 − a)` for step-size exponent `a`.
    pub fn default_beta(step_exponent: f64) -> f64 {
        2.0 / (1.0 - step_exponent)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lead_in(&self) -> LeadIn {
        self.lead_in
    }

    /// Raw `⌊C·m^β⌋` before the strict-increase repair.
    pub fn formula(&self, m: u64) -> u64 {
        (self.c * (m as f64).powf(self.beta)).floor() as u64
    }

    fn extend_past(&mut self, k: u64) {
        while *self.starts.last().expect("schedule is never empty") <= k {
            self.m += 1;
            let last = *self.starts.last().unwrap();
            let next = self.formula(self.m).max(last + 1);
            self.starts.push(next);
        }
    }

    /// Effective block starts `≤ upto`.
    pub fn starts_up_to(&mut self, upto: u64) -> &[u64] {
        self.extend_past(upto);
        let end = self.starts.partition_point(|&a| a <= upto);
        &self.starts[..end]
    }

    /// The `i`-th effective start (0-based).
    pub fn start(&mut self, i: usize) -> u64 {
        while self.starts.len() <= i {
            let last = *self.starts.last().unwrap();
            self.extend_past(last);
        }
        self.starts[i]
    }

    /// Block start `t_k` and length `l_k` for 1-based iterate `k`.
    pub fn schedule_block(&mut self, k: u64) -> Result<Block> {
        self.extend_past(k);
        let idx = self.starts.partition_point(|&a| a <= k);
        if idx == 0 {
            return Err(Error::InvalidParameter(format!(
                "iterate {k} precedes the first block start {}",
                self.starts[0]
            )));
        }
        let start = self.starts[idx - 1];
        Ok(Block {
            start,
            len: k - start + 1,
        })
    }
}

/// Neumaier-compensated running sum of a fixed-length vector.
#[derive(Debug, Clone)]
struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSum {
    fn zeros(len: usize) -> Self {
        CompensatedSum {
            sum: vec![0.0; len],
            comp: vec![0.0; len],
        }
    }

    #[inline]
    fn add_at(&mut self, i: usize, x: f64) {
        let s = self.sum[i];
        let t = s + x;
        if s.abs() >= x.abs() {
            self.comp[i] += (s - t) + x;
        } else {
            self.comp[i] += (x - t) + s;
        }
        self.sum[i] = t;
    }

    fn value(&self) -> Vec<f64> {
        self.sum
            .iter()
            .zip(&self.comp)
            .map(|(s, c)| s + c)
            .collect()
    }
}

/// Running state of the online OBM estimator.
///
/// Iterates are accumulated relative to the first one; the estimator is shift
/// invariant and this keeps `V` from growing with `‖θ‖²`.
#[derive(Debug, Clone)]
pub struct ObmAccumulator {
    schedule: BatchSchedule,
    d: usize,
    n: u64,
    origin: DVector<f64>,
    block_start: u64,
    next_start_idx: usize,
    partial: DVector<f64>,
    total: CompensatedSum,
    outer: CompensatedSum,
    weighted: CompensatedSum,
    len_sq_sum: u128,
    len_sum: u128,
    max_len: u64,
}

impl ObmAccumulator {
    pub fn new(d: usize, schedule: BatchSchedule) -> Self {
        ObmAccumulator {
            schedule,
            d,
            n: 0,
            origin: DVector::zeros(d),
            block_start: 0,
            next_start_idx: 0,
            partial: DVector::zeros(d),
            total: CompensatedSum::zeros(d),
            outer: CompensatedSum::zeros(d * d),
            weighted: CompensatedSum::zeros(d),
            len_sq_sum: 0,
            len_sum: 0,
            max_len: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of iterates absorbed so far.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn schedule(&self) -> &BatchSchedule {
        &self.schedule
    }

    /// `Σ l_i` (exact).
    pub fn len_sum(&self) -> u128 {
        self.len_sum
    }

    /// `Σ l_i²` (exact).
    pub fn len_sq_sum(&self) -> u128 {
        self.len_sq_sum
    }

    pub fn max_block_len(&self) -> u64 {
        self.max_len
    }

    /// Forget every iterate; the block schedule restarts at iterate 1.
    pub fn reset(&mut self) {
        let schedule = self.schedule.clone();
        *self = ObmAccumulator::new(self.d, schedule);
    }

    pub fn update(&mut self, theta: &DVector<f64>) -> Result<()> {
        ensure_dim(self.d, theta.len())?;
        ensure_finite("iterate", theta.as_slice())?;
        let k = self.n + 1;
        if k == 1 {
            self.origin.copy_from(theta);
        }
        if self.schedule.start(self.next_start_idx) == k {
            self.block_start = k;
            self.next_start_idx += 1;
            self.partial.fill(0.0);
        } else if self.block_start == 0 {
            // k precedes the first block; only reachable with LeadIn::Strict
            return Err(self.schedule.schedule_block(k).unwrap_err());
        }
        let len = k - self.block_start + 1;

        let d = self.d;
        for j in 0..d {
            let x = theta[j] - self.origin[j];
            self.partial[j] += x;
            self.total.add_at(j, x);
        }
        let lf = len as f64;
        for r in 0..d {
            let pr = self.partial[r];
            self.weighted.add_at(r, lf * pr);
            for c in 0..d {
                self.outer.add_at(r * d + c, pr * self.partial[c]);
            }
        }
        self.len_sum += len as u128;
        self.len_sq_sum += (len as u128) * (len as u128);
        self.max_len = self.max_len.max(len);
        self.n = k;
        Ok(())
    }

    /// `V`, `w` and `T` in the caller's coordinates (the accumulator itself
    /// stores them relative to the first iterate).
    pub fn running_sums(&self) -> RunningSums {
        let d = self.d;
        let o = &self.origin;
        let n = self.n as f64;
        let q = self.len_sq_sum as f64;
        let v = DMatrix::from_row_slice(d, d, &self.outer.value());
        let w = DVector::from_vec(self.weighted.value());
        let t = DVector::from_vec(self.total.value());
        // S_raw = S + l·o
        let outer = &v + &w * o.transpose() + o * w.transpose() + o * o.transpose() * q;
        RunningSums {
            outer,
            weighted: &w + o * q,
            total: t + o * n,
        }
    }

    /// Running mean `θ̄_n`.
    pub fn mean(&self) -> Result<DVector<f64>> {
        if self.n == 0 {
            return Err(Error::Numerical("mean of zero iterates".into()));
        }
        let t = DVector::from_vec(self.total.value());
        Ok(&self.origin + t / self.n as f64)
    }

    pub fn finalize(&self) -> Result<CovarianceEstimate> {
        if self.n == 0 {
            return Err(Error::Numerical(
                "covariance estimate requested before any iterate".into(),
            ));
        }
        let d = self.d;
        let centered_mean = DVector::from_vec(self.total.value()) / self.n as f64;
        let v = DMatrix::from_row_slice(d, d, &self.outer.value());
        let w = DVector::from_vec(self.weighted.value());
        let q = self.len_sq_sum as f64;
        let l = self.len_sum as f64;
        let cross = &w * centered_mean.transpose();
        let raw =
            (v - &cross - cross.transpose() + &centered_mean * centered_mean.transpose() * q) / l;
        Ok(CovarianceEstimate::from_matrix(raw, self.n))
    }
}

/// Uncentered running sums `V = Σ S_i S_iᵀ`, `w = Σ l_i S_i`, `T = Σ θ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningSums {
    pub outer: DMatrix<f64>,
    pub weighted: DVector<f64>,
    pub total: DVector<f64>,
}

/// Symmetric `d×d` estimate `Σ̂_n` together with the iterate count behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub sigma_hat: DMatrix<f64>,
    pub n: u64,
}

impl CovarianceEstimate {
    /// Symmetrizes `m` as `(m + mᵀ)/2`.
    pub fn from_matrix(m: DMatrix<f64>, n: u64) -> Self {
        let sym = (&m + m.transpose()) * 0.5;
        CovarianceEstimate { sigma_hat: sym, n }
    }

    pub fn dim(&self) -> usize {
        self.sigma_hat.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.sigma_hat.trace()
    }

    /// `vᵀ Σ̂ v`.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> Result<f64> {
        ensure_dim(self.dim(), v.len())?;
        Ok(v.dot(&(&self.sigma_hat * v)))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sigma_hat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.sigma_hat
            .row_iter()
            .map(|r| r.iter().cloned().collect())
            .collect()
    }

    /// Row-major CSV, one matrix row per line, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.sigma_hat.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

impl Serialize for CovarianceEstimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            sigma: Vec<Vec<f64>>,
            n: u64,
        }
        Repr {
            sigma: self.rows(),
            n: self.n,
        }
        .serialize(s)
    }
}

/// Literal evaluation of the batch-means formula from a stored iterate list.
///
/// Quadratic in the block length; meant as a cross-check for
/// [`ObmAccumulator`], not for production runs.
pub mod reference {
    use super::*;

    pub fn brute_force_sigma(
        iterates: &[DVector<f64>],
        schedule: &BatchSchedule,
    ) -> Result<CovarianceEstimate> {
        let n = iterates.len();
        if n == 0 {
            return Err(Error::Numerical("no iterates".into()));
        }
        let d = iterates[0].len();
        let mut sched = schedule.clone();
        let mut mean = DVector::zeros(d);
        for th in iterates {
            ensure_dim(d, th.len())?;
            mean += th;
        }
        mean /= n as f64;

        let mut num = DMatrix::zeros(d, d);
        let mut den = 0.0;
        for i in 1..=n as u64 {
            let b = sched.schedule_block(i)?;
            let mut s = DVector::zeros(d);
            for k in b.start..=i {
                s += &iterates[(k - 1) as usize];
            }
            let dev = s - &mean * b.len as f64;
            num += &dev * dev.transpose();
            den += b.len as f64;
        }
        Ok(CovarianceEstimate::from_matrix(num / den, n as u64))
    }
}

#[cfg(test)]
mod tests {
    use super::reference::brute_force_sigma;
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn squares() -> BatchSchedule {
        BatchSchedule::with_lead_in(1.0, 2.0, LeadIn::Strict).unwrap()
    }

    fn feed(acc: &mut ObmAccumulator, xs: &[DVector<f64>]) {
        for x in xs {
            acc.update(x).unwrap();
        }
    }

    fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn square_schedule_blocks() {
        let mut s = squares();
        assert_eq!(s.starts_up_to(20), &[1, 4, 9, 16]);
        assert_eq!(s.schedule_block(5).unwrap(), Block { start: 4, len: 2 });
        assert_eq!(s.schedule_block(3).unwrap(), Block { start: 1, len: 3 });
        assert_eq!(s.schedule_block(16).unwrap(), Block { start: 16, len: 1 });
    }

    #[test]
    fn experiment_schedule_values() {
        let beta = BatchSchedule::default_beta(0.5005);
        let mut s = BatchSchedule::with_lead_in(2.0, beta, LeadIn::Strict).unwrap();
        assert_eq!(s.start(0), 2);
        assert_eq!(s.start(1), 32);
        assert!(s.schedule_block(1).is_err());

        let mut g = BatchSchedule::new(2.0, beta).unwrap();
        assert_eq!(g.starts_up_to(40), &[1, 2, 32]);
        assert_eq!(g.schedule_block(1).unwrap(), Block { start: 1, len: 1 });

        let mut one = BatchSchedule::with_lead_in(2.0, beta, LeadIn::AnchorAtOne).unwrap();
        assert_eq!(one.starts_up_to(40), &[1, 32]);
    }

    #[test]
    fn duplicate_floors_are_pushed_forward() {
        let mut s = BatchSchedule::with_lead_in(0.3, 1.5, LeadIn::Strict).unwrap();
        let starts = s.starts_up_to(200).to_vec();
        assert_eq!(starts[0], 1);
        assert!(starts.windows(2).all(|w| w[0] < w[1]));
        // the first starts are repaired to 1, 2, 3, …; the formula takes over later
        assert_eq!(&starts[..5], &[1, 2, 3, 4, 5]);
        assert!(starts.contains(&s.formula(20)));
        assert!(starts.contains(&s.formula(40)));
    }

    #[test]
    fn rejects_bad_schedule_parameters() {
        assert!(BatchSchedule::new(0.0, 2.0).is_err());
        assert!(BatchSchedule::new(1.0, 1.0).is_err());
        assert!(BatchSchedule::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn hand_evaluated_running_sums() {
        let mut acc = ObmAccumulator::new(1, squares());
        feed(&mut acc, &[dvector![1.0], dvector![1.0], dvector![1.0]]);
        // block sums S = (1, 2, 3), lengths l = (1, 2, 3)
        let sums = acc.running_sums();
        assert_eq!(sums.outer[(0, 0)], 14.0);
        assert_eq!(sums.weighted[0], 14.0);
        assert_eq!(sums.total[0], 3.0);
        assert_eq!(acc.len_sq_sum(), 14);
        assert_eq!(acc.len_sum(), 6);
        // θ̄ = 1 and every S_i = l_i·θ̄, so the estimate vanishes
        assert_eq!(acc.mean().unwrap(), dvector![1.0]);
        assert_eq!(acc.finalize().unwrap().sigma_hat[(0, 0)], 0.0);
    }

    #[test]
    fn hand_evaluated_estimate() {
        let mut acc = ObmAccumulator::new(1, squares());
        feed(&mut acc, &[dvector![1.0], dvector![0.0], dvector![0.0]]);
        // S = (1, 1, 1), l = (1, 2, 3): V = 3, w = 6, q = 14, L = 6, θ̄ = 1/3
        let sums = acc.running_sums();
        assert_eq!(sums.outer[(0, 0)], 3.0);
        assert_eq!(sums.weighted[0], 6.0);
        let expected = (3.0 - 2.0 * 6.0 / 3.0 + 14.0 / 9.0) / 6.0;
        let est = acc.finalize().unwrap();
        assert!((est.sigma_hat[(0, 0)] - expected).abs() < 1e-15);
        assert!((expected - 5.0 / 54.0).abs() < 1e-15);
    }

    #[test]
    fn single_and_constant_sequences_give_zero() {
        let mut acc = ObmAccumulator::new(2, squares());
        acc.update(&dvector![1.0, -3.0]).unwrap();
        assert_eq!(acc.finalize().unwrap().sigma_hat, DMatrix::zeros(2, 2));
        for _ in 0..50 {
            acc.update(&dvector![1.0, -3.0]).unwrap();
        }
        assert_eq!(acc.finalize().unwrap().sigma_hat, DMatrix::zeros(2, 2));

        let c = dvector![0.1, 0.7];
        let iters = vec![c.clone(); 40];
        let bf = brute_force_sigma(&iters, &squares()).unwrap();
        assert!(bf.sigma_hat.norm() < 1e-12);
        let one = brute_force_sigma(&iters[..1], &squares()).unwrap();
        assert_eq!(one.sigma_hat, DMatrix::zeros(2, 2));
    }

    #[test]
    fn zero_iterates_leave_sums_at_zero() {
        let mut acc = ObmAccumulator::new(3, squares());
        feed(&mut acc, &vec![DVector::zeros(3); 10]);
        assert_eq!(acc.finalize().unwrap().sigma_hat, DMatrix::zeros(3, 3));
        assert_eq!(acc.len_sum(), (1 + 2 + 3) + (1 + 2 + 3 + 4 + 5) + 1 + 2);
    }

    #[test]
    fn errors() {
        let mut acc = ObmAccumulator::new(2, squares());
        assert!(acc.finalize().is_err());
        assert!(acc.mean().is_err());
        assert!(matches!(
            acc.update(&dvector![1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            acc.update(&dvector![1.0, f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
        let strict = BatchSchedule::with_lead_in(3.0, 2.0, LeadIn::Strict).unwrap();
        let mut acc = ObmAccumulator::new(1, strict);
        assert!(acc.update(&dvector![1.0]).is_err());
        assert!(brute_force_sigma(&[], &squares()).is_err());
    }

    #[test]
    fn random_sequence_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sched = BatchSchedule::new(2.0, BatchSchedule::default_beta(0.5005)).unwrap();
        let iters: Vec<DVector<f64>> = (0..500)
            .map(|_| DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let mut acc = ObmAccumulator::new(3, sched.clone());
        feed(&mut acc, &iters);
        let online = acc.finalize().unwrap();
        let bf = brute_force_sigma(&iters, &sched).unwrap();
        assert!(rel_frobenius(&online.sigma_hat, &bf.sigma_hat) <= 1e-10);
    }

    #[test]
    fn reset_restarts_the_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let iters: Vec<DVector<f64>> = (0..60)
            .map(|_| DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let mut acc = ObmAccumulator::new(2, squares());
        feed(&mut acc, &iters[..25]);
        acc.reset();
        assert_eq!(acc.n(), 0);
        feed(&mut acc, &iters[25..]);
        let mut fresh = ObmAccumulator::new(2, squares());
        feed(&mut fresh, &iters[25..]);
        assert_eq!(acc.finalize().unwrap(), fresh.finalize().unwrap());
    }

    #[test]
    fn csv_has_17_significant_digits() {
        let est = CovarianceEstimate::from_matrix(
            DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 0.5, 0.5, 2.0]),
            10,
        );
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        assert_eq!(first[0], "3.3333333333333331e-1");
        assert_eq!(first[0].parse::<f64>().unwrap(), 1.0 / 3.0);
        let json = serde_json::to_string(&est).unwrap();
        assert!(json.starts_with("{\"sigma\":[["));
    }

    fn iterate_list(d: usize, n: usize, seed: u64, scale: f64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn online_equals_offline(
            d in 1usize..=5,
            n in 1usize..=600,
            beta in 1.5f64..5.0,
            c in 0.5f64..3.0,
            seed in any::<u64>(),
        ) {
            let sched = BatchSchedule::new(c, beta).unwrap();
            let iters = iterate_list(d, n, seed, 1.0);
            let mut acc = ObmAccumulator::new(d, sched.clone());
            feed(&mut acc, &iters);
            let online = acc.finalize().unwrap();
            let bf = brute_force_sigma(&iters, &sched).unwrap();
            let err = (&online.sigma_hat - &bf.sigma_hat).norm();
            prop_assert!(err <= 1e-10 * bf.sigma_hat.norm().max(1e-300));
        }

        #[test]
        fn any_time_property(n in 2usize..400, cut in 1usize..400, seed in any::<u64>()) {
            let cut = cut.min(n);
            let sched = BatchSchedule::new(2.0, 2.5).unwrap();
            let iters = iterate_list(2, n, seed, 1.0);
            let mut long = ObmAccumulator::new(2, sched.clone());
            let mut at_cut = None;
            for (i, x) in iters.iter().enumerate() {
                long.update(x).unwrap();
                if i + 1 == cut {
                    at_cut = Some(long.finalize().unwrap());
                }
            }
            let mut short = ObmAccumulator::new(2, sched);
            feed(&mut short, &iters[..cut]);
            prop_assert_eq!(at_cut.unwrap(), short.finalize().unwrap());
        }

        #[test]
        fn shift_invariance_and_psd(n in 1usize..500, seed in any::<u64>(), shift in -50.0f64..50.0) {
            let sched = BatchSchedule::new(1.0, 2.0).unwrap();
            let iters = iterate_list(3, n, seed, 1.0);
            let shifted: Vec<_> = iters.iter().map(|x| x.add_scalar(shift)).collect();
            let mut a = ObmAccumulator::new(3, sched.clone());
            let mut b = ObmAccumulator::new(3, sched);
            feed(&mut a, &iters);
            feed(&mut b, &shifted);
            let (a, b) = (a.finalize().unwrap(), b.finalize().unwrap());
            prop_assert!((&a.sigma_hat - &b.sigma_hat).norm() <= 1e-10 * a.sigma_hat.norm().max(1e-12));
            prop_assert!(a.min_eigenvalue() >= -1e-10 * a.trace().max(1e-300));
            prop_assert_eq!(&a.sigma_hat, &a.sigma_hat.transpose());
        }
    }
}
