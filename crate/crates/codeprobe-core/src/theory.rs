//! Monte Carlo validation of the consensus-convergence guarantee and
//! simulation of the self-training quality-lift dynamics.
//!
//! The guarantee: with n candidates of which k are correct, and any pair of
//! incorrect implementations agreeing on a single test with probability at
//! most p, a test suite of size at least `log(n/k) / -log(p)` makes the
//! largest consensus cluster all-correct with probability at least
//! `1 - delta - n^2 * p^m`. The simulator plants k correct candidates
//! deterministically (delta = 0) and realizes the incorrect-agreement model
//! with uniform output labels over `ceil(1/p)` symbols, whose pairwise
//! collision probability is exactly `1/ceil(1/p) <= p`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{cluster_by_key, select_hierarchical, PoolCandidate, SelectionConfig};
use crate::domain::ExecutionSignature;
use crate::seed::derive_seed;
use crate::stats::mean;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid simulation parameters: {0}")]
pub struct InvalidParams(pub String);

/// Parameters for the consensus-convergence simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSimParams {
    /// Pool size.
    pub n: u32,
    /// Number of planted correct candidates.
    pub k: u32,
    /// Pairwise incorrect-agreement probability bound per test.
    pub p: f64,
    /// Test-suite size.
    pub m: u32,
    pub trials: u32,
    pub rng_seed: u64,
}

/// Result of a consensus-convergence simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Fraction of trials where the largest cluster was the correct one
    /// (ties count as failure).
    pub empirical_correct_rate: f64,
    /// Theoretical lower bound `max(0, 1 - n^2 * p^m)` (delta = 0).
    pub bound: f64,
    /// Whether the empirical rate clears the bound minus three binomial
    /// standard errors.
    pub bound_satisfied: bool,
    /// Binomial standard error of the empirical rate.
    pub std_error: f64,
    /// True when `n^2 * p^m >= 1`, i.e. the bound clamps to zero and says
    /// nothing.
    pub vacuous: bool,
    pub trials: u32,
}

/// Parameters for the iterative quality-lift simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSimParams {
    /// Mean of the initial quality distribution, in (0, 1).
    pub initial_quality_mean: f64,
    /// Concentration of the Beta quality distribution. A non-finite value
    /// degenerates to a point mass at the mean.
    pub initial_quality_concentration: f64,
    pub pool_size: u32,
    pub iterations: u32,
    pub lift_estimator: LiftEstimator,
    pub rng_seed: u64,
}

/// Selection proxy used inside the dynamics simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftEstimator {
    /// Candidates pass each synthetic test independently with probability
    /// equal to their quality; the hierarchical rule then runs on the
    /// resulting signatures, with the synthetic pass-fraction standing in
    /// for the execution success rate.
    ConsensusProxy,
}

/// One point of a dynamics trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsPoint {
    pub iteration: u32,
    /// Empirical mean of the pool's planted qualities at this iteration.
    pub mean_quality: f64,
    /// Mean quality of the consensus-selected set minus the pool mean.
    pub delta: f64,
}

/// Number of synthetic tests the consensus proxy rolls per candidate.
pub const PROXY_TESTS: u32 = 8;

/// Minimum test-suite size for the convergence guarantee:
/// `ceil(log(n/k) / -log(p))`, 0 when k = n.
///
/// The ratio is snapped to the nearest integer when within 1e-9 before
/// taking the ceiling, so exact points like `log(100)/log(10)` do not round
/// up on the last ulp.
pub fn min_tests_bound(n: u32, k: u32, p: f64) -> Result<u32, InvalidParams> {
    if k < 1 || k > n {
        return Err(InvalidParams(format!("need 1 <= k <= n, got n={n} k={k}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(InvalidParams(format!("need 0 < p < 1, got p={p}")));
    }
    let ratio = libm::log(n as f64 / k as f64) / -libm::log(p);
    let snapped = libm::round(ratio);
    let value = if (ratio - snapped).abs() < 1e-9 {
        snapped
    } else {
        libm::ceil(ratio)
    };
    Ok(value as u32)
}

/// Lower bound on the probability that the largest cluster is all-correct:
/// `max(0, 1 - delta - n^2 * p^m)`.
pub fn correctness_lower_bound(n: u32, m: u32, p: f64, delta: f64) -> Result<f64, InvalidParams> {
    if n < 1 {
        return Err(InvalidParams("need n >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(InvalidParams(format!("need 0 < p < 1, got p={p}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(InvalidParams(format!("need 0 <= delta < 1, got {delta}")));
    }
    let union_term = (n as f64) * (n as f64) * libm::pow(p, m as f64);
    Ok((1.0 - delta - union_term).max(0.0))
}

impl ConsensusSimParams {
    fn validate(&self) -> Result<(), InvalidParams> {
        if self.k < 1 || self.k > self.n {
            return Err(InvalidParams(format!(
                "need 1 <= k <= n, got n={} k={}",
                self.n, self.k
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(InvalidParams(format!("need 0 < p < 1, got p={}", self.p)));
        }
        if self.m < 1 {
            return Err(InvalidParams("need m >= 1".into()));
        }
        if self.trials < 1 {
            return Err(InvalidParams("need trials >= 1".into()));
        }
        Ok(())
    }
}

/// Run one trial of the consensus-convergence experiment; true when the
/// largest output-label cluster is exactly the planted correct one and
/// strictly larger than every incorrect cluster.
///
/// Trials are keyed by a derived seed, so any partition of trial indices
/// over workers reproduces the sequential result.
pub fn consensus_trial(params: &ConsensusSimParams, trial_seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let n = params.n as usize;
    let k = params.k as usize;
    let m = params.m as usize;
    // Output labels: 0 is the correct output; incorrect candidates draw
    // uniformly from 1..=wrong_labels, for a pairwise per-test collision
    // probability of exactly 1/ceil(1/p) <= p.
    let wrong_labels = libm::ceil(1.0 / params.p) as u32;

    let mut pool: Vec<(usize, Vec<u32>)> = Vec::with_capacity(n);
    for i in 0..k {
        pool.push((i, alloc::vec![0u32; m]));
    }
    for i in k..n {
        let labels: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=wrong_labels)).collect();
        pool.push((i, labels));
    }

    let clusters = cluster_by_key(&pool);
    let top = &clusters[0];
    let correct_on_top = top.0.iter().all(|&label| label == 0);
    let strictly_largest = clusters
        .get(1)
        .map(|second| second.1.len() < top.1.len())
        .unwrap_or(true);
    correct_on_top && strictly_largest
}

/// Monte Carlo estimate of the probability that the largest consensus
/// cluster is the correct one, compared against the theoretical lower bound
/// with delta = 0.
pub fn simulate_consensus(params: &ConsensusSimParams) -> Result<SimReport, InvalidParams> {
    params.validate()?;
    let mut successes = 0u64;
    for trial in 0..params.trials {
        if consensus_trial(params, derive_seed(params.rng_seed, trial as u64)) {
            successes += 1;
        }
    }
    let rate = successes as f64 / params.trials as f64;
    let bound = correctness_lower_bound(params.n, params.m, params.p, 0.0)?;
    let raw_term =
        (params.n as f64) * (params.n as f64) * libm::pow(params.p, params.m as f64);
    let std_error = libm::sqrt(rate * (1.0 - rate) / params.trials as f64);
    Ok(SimReport {
        empirical_correct_rate: rate,
        bound,
        bound_satisfied: rate >= bound - 3.0 * std_error,
        std_error,
        vacuous: raw_term >= 1.0,
        trials: params.trials,
    })
}

impl DynamicsSimParams {
    fn validate(&self) -> Result<(), InvalidParams> {
        if !(self.initial_quality_mean > 0.0 && self.initial_quality_mean < 1.0) {
            return Err(InvalidParams(format!(
                "need 0 < initial_quality_mean < 1, got {}",
                self.initial_quality_mean
            )));
        }
        if !(self.initial_quality_concentration > 0.0) {
            return Err(InvalidParams("need initial_quality_concentration > 0".into()));
        }
        if self.pool_size < 1 || self.iterations < 1 {
            return Err(InvalidParams("need pool_size >= 1 and iterations >= 1".into()));
        }
        Ok(())
    }
}

fn draw_qualities(
    rng: &mut ChaCha8Rng,
    mean_q: f64,
    concentration: f64,
    pool_size: usize,
) -> Vec<f64> {
    if !concentration.is_finite() {
        return alloc::vec![mean_q; pool_size];
    }
    // Beta with the requested mean and concentration; the mean is clamped
    // away from the endpoints so the parameters stay positive.
    let mu = mean_q.clamp(1e-9, 1.0 - 1e-9);
    let beta = Beta::new(mu * concentration, (1.0 - mu) * concentration)
        .expect("parameters are positive by construction");
    (0..pool_size).map(|_| beta.sample(rng)).collect()
}

/// Iterate the selection-as-quality-filter loop.
///
/// Each iteration draws a pool of planted qualities with the current mean,
/// rolls synthetic signatures via the consensus proxy, applies the
/// hierarchical rule, and feeds the selected cluster's mean quality forward
/// as the next iteration's distribution mean. When selection rejects a pool
/// (no survivors or no non-trivial cluster), the pool mean carries forward
/// unchanged and the recorded lift is zero.
pub fn simulate_dynamics(params: &DynamicsSimParams) -> Result<Vec<DynamicsPoint>, InvalidParams> {
    params.validate()?;
    let LiftEstimator::ConsensusProxy = params.lift_estimator;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let cfg = SelectionConfig::default();
    let pool_size = params.pool_size as usize;
    let m = PROXY_TESTS as usize;

    let mut current_mean = params.initial_quality_mean;
    let mut trace = Vec::with_capacity(params.iterations as usize);
    for iteration in 0..params.iterations {
        let qualities = draw_qualities(
            &mut rng,
            current_mean,
            params.initial_quality_concentration,
            pool_size,
        );
        let pool_mean = mean(&qualities);

        let pool: Vec<PoolCandidate> = qualities
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                let bits: Vec<bool> = (0..m).map(|_| rng.gen_bool(q)).collect();
                let pass_fraction = bits.iter().filter(|b| **b).count() as f64 / m as f64;
                PoolCandidate {
                    candidate_id: format!("{i:07}"),
                    signature: ExecutionSignature::new(bits),
                    // The proxy has no error channel; observed pass-fraction
                    // stands in for the execution success rate.
                    exec_success_rate: pass_fraction,
                    perplexity: None,
                    pass_fraction,
                    outputs: None,
                }
            })
            .collect();

        let result = select_hierarchical("dynamics", &pool, &cfg);
        let selected_mean = match &result.cluster {
            Some(cluster) => {
                let total: f64 = cluster
                    .member_ids
                    .iter()
                    .map(|id| {
                        let idx: usize = id.parse().expect("ids are indices");
                        qualities[idx]
                    })
                    .sum();
                total / cluster.member_ids.len() as f64
            }
            None => pool_mean,
        };

        trace.push(DynamicsPoint {
            iteration,
            mean_quality: pool_mean,
            delta: selected_mean - pool_mean,
        });
        current_mean = selected_mean;
    }
    Ok(trace)
}
