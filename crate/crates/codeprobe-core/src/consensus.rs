//! Signature clustering, the hierarchical selection rule, ablation baseline
//! strategies, and the pass@k estimator.
//!
//! Selection works on a per-problem candidate pool. The main rule is a
//! three-stage filter: drop candidates whose execution success rate `e` falls
//! below a reliability threshold, take the largest non-trivial cluster among
//! the survivors, then pick the member maximizing `(e, -f)` lexicographically
//! (lowest perplexity breaks ties in `e`). Everything here is a pure function
//! over immutable inputs; seeded randomness is passed explicitly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ConsensusCluster, ExecutionSignature, QualityScores, SelectionStrategy};

/// Thresholds and strategy for per-problem selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Reliability threshold on the execution success rate `e`.
    pub rho: f64,
    /// Minimum cluster size counted as non-trivial.
    pub tau: u32,
    pub strategy: SelectionStrategy,
    /// Pass-fraction cutoff for the success-rate baseline.
    pub success_rate_threshold: f64,
    pub rng_seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            rho: 0.8,
            tau: 2,
            strategy: SelectionStrategy::Consensus,
            success_rate_threshold: 0.5,
            rng_seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(ConfigError::RhoOutOfRange(self.rho));
        }
        if self.tau < 1 {
            return Err(ConfigError::TauTooSmall);
        }
        if !(0.0..=1.0).contains(&self.success_rate_threshold) {
            return Err(ConfigError::ThresholdOutOfRange(self.success_rate_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ConfigError {
    #[error("rho must be in (0, 1], got {0}")]
    RhoOutOfRange(f64),
    #[error("tau must be >= 1")]
    TauTooSmall,
    #[error("success_rate_threshold must be in [0, 1], got {0}")]
    ThresholdOutOfRange(f64),
}

/// One candidate as seen by the selection rules: its behavioral signature and
/// per-candidate quality measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolCandidate {
    pub candidate_id: String,
    pub signature: ExecutionSignature,
    /// Execution success rate `e` (fraction of tests that executed at all).
    pub exec_success_rate: f64,
    /// Perplexity `f`; absent when the candidate carries no logprobs.
    pub perplexity: Option<f64>,
    /// Fraction of tests with a pass status.
    pub pass_fraction: f64,
    /// Captured output per test ordinal, for output-keyed clustering.
    pub outputs: Option<Vec<String>>,
}

/// Why a pool produced no selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    /// Every candidate fell below the reliability (or pass-fraction) cutoff.
    AllFiltered,
    /// No cluster among the survivors reached size tau.
    NoNontrivialCluster,
    EmptyPool,
}

/// Outcome of selection for one problem: either a selected candidate with its
/// cluster and quality snapshot, or a rejection reason — never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub problem_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ConsensusCluster>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<QualityScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection_reason: Option<RejectionReason>,
}

impl SelectionResult {
    fn rejected(problem_id: &str, reason: RejectionReason) -> Self {
        Self {
            problem_id: problem_id.into(),
            selected: None,
            cluster: None,
            scores: None,
            rejection_reason: Some(reason),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("signatures in one pool must share a length")]
    MixedSignatureLengths,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrengthError {
    #[error("candidate {0} belongs to no cluster")]
    UnknownCandidate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PerplexityError {
    #[error("token logprob list is empty")]
    EmptyTokenList,
    #[error("token logprob {0} is positive")]
    PositiveLogprob(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("low_ppl strategy requires at least one candidate with logprobs")]
    MissingLogprobs,
    #[error("strategy does not match the selection entry point")]
    WrongStrategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("invalid pass@k counts: need 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")]
pub struct InvalidCounts {
    pub n: u64,
    pub c: u64,
    pub k: u64,
}

/// Group members by an arbitrary behavioral key. Groups come back ordered by
/// descending size, ties by ascending key; member order within a group
/// follows input order.
pub fn cluster_by_key<M: Clone, K: Ord + Clone>(items: &[(M, K)]) -> Vec<(K, Vec<M>)> {
    let mut groups: BTreeMap<K, Vec<M>> = BTreeMap::new();
    for (member, key) in items {
        groups.entry(key.clone()).or_default().push(member.clone());
    }
    let mut out: Vec<(K, Vec<M>)> = groups.into_iter().collect();
    // BTreeMap iteration is key-ascending; the stable sort keeps that order
    // among equal sizes.
    out.sort_by(|a, b| b.1.len().cmp(&a.1.len()));
    out
}

/// Partition a pool into consensus clusters by exact signature equality.
///
/// Returned clusters are ordered by descending size, ties by
/// lexicographically smallest signature.
pub fn cluster_by_signature(
    pool: &[(String, ExecutionSignature)],
) -> Result<Vec<ConsensusCluster>, ClusterError> {
    if let Some((_, first)) = pool.first() {
        if pool.iter().any(|(_, sig)| sig.len() != first.len()) {
            return Err(ClusterError::MixedSignatureLengths);
        }
    }
    Ok(cluster_by_key(pool)
        .into_iter()
        .map(|(signature, member_ids)| ConsensusCluster::new(signature, member_ids))
        .collect())
}

/// Consensus strength `s`: the size of the cluster owning the candidate,
/// including the candidate itself.
pub fn consensus_strength(
    candidate_id: &str,
    clusters: &[ConsensusCluster],
) -> Result<u32, StrengthError> {
    clusters
        .iter()
        .find(|c| c.member_ids.iter().any(|m| m == candidate_id))
        .map(|c| c.size)
        .ok_or_else(|| StrengthError::UnknownCandidate(candidate_id.into()))
}

/// Perplexity of a candidate's token stream: `exp(-mean(logprobs))`.
///
/// Logprobs are natural logs and must be `<= 0`, so the result is always
/// `>= 1`.
pub fn perplexity(token_logprobs: &[f64]) -> Result<f64, PerplexityError> {
    if token_logprobs.is_empty() {
        return Err(PerplexityError::EmptyTokenList);
    }
    if let Some(bad) = token_logprobs.iter().find(|lp| **lp > 0.0) {
        return Err(PerplexityError::PositiveLogprob(*bad));
    }
    let mean = token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64;
    Ok(libm::exp(-mean))
}

/// Rank key for the intra-cluster argmax on `(e, -f)`: maximize `e`, break
/// ties by minimal perplexity (absent perplexity ranks last), then by
/// smallest candidate id.
fn better_member<'a>(a: &'a PoolCandidate, b: &'a PoolCandidate) -> &'a PoolCandidate {
    let fa = a.perplexity.unwrap_or(f64::INFINITY);
    let fb = b.perplexity.unwrap_or(f64::INFINITY);
    match a
        .exec_success_rate
        .total_cmp(&b.exec_success_rate)
        .then(fb.total_cmp(&fa))
        .then(b.candidate_id.cmp(&a.candidate_id))
    {
        core::cmp::Ordering::Less => b,
        _ => a,
    }
}

fn signature_clusters(pool: &[PoolCandidate]) -> Vec<(ExecutionSignature, Vec<usize>)> {
    let keyed: Vec<(usize, ExecutionSignature)> = pool
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.signature.clone()))
        .collect();
    cluster_by_key(&keyed)
}

fn cluster_of(pool: &[PoolCandidate], members: &[usize], signature: ExecutionSignature) -> ConsensusCluster {
    ConsensusCluster::new(
        signature,
        members
            .iter()
            .map(|&i| pool[i].candidate_id.clone())
            .collect(),
    )
}

fn accepted(
    problem_id: &str,
    pool: &[PoolCandidate],
    chosen: usize,
    cluster: ConsensusCluster,
) -> SelectionResult {
    let c = &pool[chosen];
    SelectionResult {
        problem_id: problem_id.into(),
        selected: Some(c.candidate_id.clone()),
        cluster: Some(cluster.clone()),
        scores: Some(QualityScores {
            e: c.exec_success_rate,
            s: cluster.size,
            f: c.perplexity,
        }),
        rejection_reason: None,
    }
}

/// The hierarchical three-stage selection rule.
///
/// 1. Reliability filter: drop candidates with `e < rho`.
/// 2. Consensus selection: cluster the survivors by signature and take the
///    largest cluster of size at least `tau`; ties go to the higher mean `e`,
///    then the lexicographically smaller signature.
/// 3. Intra-cluster selection: argmax on `(e, -f)` with ties broken by
///    smaller candidate id; members without `f` are considered only when no
///    member has one.
///
/// Rejections are encoded in the result, never as errors.
pub fn select_hierarchical(
    problem_id: &str,
    pool: &[PoolCandidate],
    cfg: &SelectionConfig,
) -> SelectionResult {
    if pool.is_empty() {
        return SelectionResult::rejected(problem_id, RejectionReason::EmptyPool);
    }
    let survivors: Vec<usize> = (0..pool.len())
        .filter(|&i| pool[i].exec_success_rate >= cfg.rho)
        .collect();
    if survivors.is_empty() {
        return SelectionResult::rejected(problem_id, RejectionReason::AllFiltered);
    }

    let keyed: Vec<(usize, ExecutionSignature)> = survivors
        .iter()
        .map(|&i| (i, pool[i].signature.clone()))
        .collect();
    let clusters = cluster_by_key(&keyed);

    let mut best: Option<(&(ExecutionSignature, Vec<usize>), f64)> = None;
    for cluster in &clusters {
        if (cluster.1.len() as u32) < cfg.tau {
            continue;
        }
        let mean_e = cluster
            .1
            .iter()
            .map(|&i| pool[i].exec_success_rate)
            .sum::<f64>()
            / cluster.1.len() as f64;
        let replace = match best {
            None => true,
            Some((cur, cur_mean_e)) => {
                cluster
                    .1
                    .len()
                    .cmp(&cur.1.len())
                    .then(mean_e.total_cmp(&cur_mean_e))
                    .then(cur.0.cmp(&cluster.0))
                    == core::cmp::Ordering::Greater
            }
        };
        if replace {
            best = Some((cluster, mean_e));
        }
    }

    let Some(((signature, members), _)) = best else {
        return SelectionResult::rejected(problem_id, RejectionReason::NoNontrivialCluster);
    };

    let chosen = members
        .iter()
        .copied()
        .reduce(|a, b| {
            if core::ptr::eq(better_member(&pool[a], &pool[b]), &pool[a]) {
                a
            } else {
                b
            }
        })
        .expect("cluster is non-empty");

    accepted(
        problem_id,
        pool,
        chosen,
        cluster_of(pool, members, signature.clone()),
    )
}

/// Ablation baseline strategies.
///
/// * `random` — seeded uniform pick among all-pass candidates, or among the
///   whole pool when none passes everything.
/// * `cluster` — seeded uniform pick from the dominant output cluster, keyed
///   by the tuple of captured outputs; falls back to signature clustering
///   when any candidate lacks outputs.
/// * `low_ppl` — global perplexity argmin.
/// * `success_rate` — seeded uniform pick among candidates whose
///   pass-fraction meets the configured threshold.
pub fn select_baseline(
    problem_id: &str,
    pool: &[PoolCandidate],
    cfg: &SelectionConfig,
) -> Result<SelectionResult, SelectionError> {
    if pool.is_empty() {
        return Ok(SelectionResult::rejected(
            problem_id,
            RejectionReason::EmptyPool,
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let chosen = match cfg.strategy {
        SelectionStrategy::Random => {
            let all_pass: Vec<usize> = (0..pool.len())
                .filter(|&i| pool[i].signature.is_all_pass())
                .collect();
            let from = if all_pass.is_empty() {
                (0..pool.len()).collect()
            } else {
                all_pass
            };
            from[rng.gen_range(0..from.len())]
        }
        SelectionStrategy::Cluster => {
            let dominant = dominant_output_cluster(pool);
            dominant[rng.gen_range(0..dominant.len())]
        }
        SelectionStrategy::LowPpl => {
            let mut best: Option<usize> = None;
            for (i, c) in pool.iter().enumerate() {
                let Some(f) = c.perplexity else { continue };
                best = Some(match best {
                    None => i,
                    Some(j) => {
                        let fj = pool[j].perplexity.expect("best always has perplexity");
                        match f.total_cmp(&fj).then(pool[j].candidate_id.cmp(&c.candidate_id)) {
                            core::cmp::Ordering::Less => i,
                            _ => j,
                        }
                    }
                });
            }
            best.ok_or(SelectionError::MissingLogprobs)?
        }
        SelectionStrategy::SuccessRate => {
            let eligible: Vec<usize> = (0..pool.len())
                .filter(|&i| pool[i].pass_fraction >= cfg.success_rate_threshold)
                .collect();
            if eligible.is_empty() {
                return Ok(SelectionResult::rejected(
                    problem_id,
                    RejectionReason::AllFiltered,
                ));
            }
            eligible[rng.gen_range(0..eligible.len())]
        }
        SelectionStrategy::Consensus => return Err(SelectionError::WrongStrategy),
    };

    // Report the chosen candidate's signature cluster so downstream records
    // always carry a consensus strength.
    let clusters = signature_clusters(pool);
    let (signature, members) = clusters
        .into_iter()
        .find(|(_, members)| members.contains(&chosen))
        .expect("every candidate belongs to a signature cluster");
    Ok(accepted(
        problem_id,
        pool,
        chosen,
        cluster_of(pool, &members, signature),
    ))
}

/// Dispatch on the configured strategy.
pub fn select(
    problem_id: &str,
    pool: &[PoolCandidate],
    cfg: &SelectionConfig,
) -> Result<SelectionResult, SelectionError> {
    match cfg.strategy {
        SelectionStrategy::Consensus => Ok(select_hierarchical(problem_id, pool, cfg)),
        _ => select_baseline(problem_id, pool, cfg),
    }
}

/// Members of the dominant output cluster (indices into the pool), keyed by
/// the tuple of captured outputs when every candidate has one, else by
/// signature. Ties between equally large clusters go to the smaller key.
fn dominant_output_cluster(pool: &[PoolCandidate]) -> Vec<usize> {
    if pool.iter().all(|c| c.outputs.is_some()) {
        let keyed: Vec<(usize, Vec<String>)> = pool
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.outputs.clone().expect("checked above")))
            .collect();
        cluster_by_key(&keyed)
            .into_iter()
            .next()
            .map(|(_, members)| members)
            .unwrap_or_default()
    } else {
        signature_clusters(pool)
            .into_iter()
            .next()
            .map(|(_, members)| members)
            .unwrap_or_default()
    }
}

/// Unbiased pass@k estimator: `1 - C(n-c, k) / C(n, k)`.
///
/// Computed as a telescoping product so large `n` never overflows.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, InvalidCounts> {
    if c > n || k < 1 || k > n {
        return Err(InvalidCounts { n, c, k });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let mut ratio = 1.0f64;
    for i in 0..k {
        ratio *= (n - c - i) as f64 / (n - i) as f64;
    }
    Ok(1.0 - ratio)
}
