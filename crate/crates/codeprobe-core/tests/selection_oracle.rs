//! Brute-force reference implementation of the three-stage selection rule,
//! checked against `select_hierarchical` on randomized pools.
//!
//! The reference deliberately shares no code with the implementation: it
//! enumerates signature groups by string key, scans for the best cluster by
//! explicit pairwise comparison, and scans for the best member the same way.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use codeprobe_core::consensus::{PoolCandidate, RejectionReason, SelectionConfig};
use codeprobe_core::domain::ExecutionSignature;

#[derive(Debug, PartialEq)]
enum Expected {
    Selected(String),
    Rejected(RejectionReason),
}

/// Exhaustive evaluation of filter -> max-cluster -> lexicographic argmax.
fn brute_force_select(pool: &[PoolCandidate], cfg: &SelectionConfig) -> Expected {
    if pool.is_empty() {
        return Expected::Rejected(RejectionReason::EmptyPool);
    }
    let survivors: Vec<&PoolCandidate> = pool
        .iter()
        .filter(|c| c.exec_success_rate >= cfg.rho)
        .collect();
    if survivors.is_empty() {
        return Expected::Rejected(RejectionReason::AllFiltered);
    }

    let mut groups: HashMap<String, Vec<&PoolCandidate>> = HashMap::new();
    for c in &survivors {
        groups.entry(c.signature.to_string()).or_default().push(c);
    }

    let mut best_cluster: Option<(&str, &Vec<&PoolCandidate>, f64)> = None;
    for (key, members) in &groups {
        if (members.len() as u32) < cfg.tau {
            continue;
        }
        let mean_e: f64 =
            members.iter().map(|c| c.exec_success_rate).sum::<f64>() / members.len() as f64;
        let replace = match &best_cluster {
            None => true,
            Some((best_key, best_members, best_mean)) => {
                if members.len() != best_members.len() {
                    members.len() > best_members.len()
                } else if mean_e != *best_mean {
                    mean_e > *best_mean
                } else {
                    key.as_str() < *best_key
                }
            }
        };
        if replace {
            best_cluster = Some((key, members, mean_e));
        }
    }
    let Some((_, members, _)) = best_cluster else {
        return Expected::Rejected(RejectionReason::NoNontrivialCluster);
    };

    let mut best: &PoolCandidate = members[0];
    for c in &members[1..] {
        let (e1, f1) = (best.exec_success_rate, best.perplexity.unwrap_or(f64::INFINITY));
        let (e2, f2) = (c.exec_success_rate, c.perplexity.unwrap_or(f64::INFINITY));
        let wins = if e2 != e1 {
            e2 > e1
        } else if f2 != f1 {
            f2 < f1
        } else {
            c.candidate_id < best.candidate_id
        };
        if wins {
            best = c;
        }
    }
    Expected::Selected(best.candidate_id.clone())
}

fn make_pool(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<PoolCandidate> {
    (0..n)
        .map(|i| {
            // Skewed toward shared signatures so large clusters actually form.
            let template: u64 = rng.gen_range(0..4);
            let bits: Vec<bool> = (0..m)
                .map(|j| {
                    if rng.gen_bool(0.8) {
                        (template >> (j % 4)) & 1 == 1
                    } else {
                        rng.gen_bool(0.5)
                    }
                })
                .collect();
            // Quantized e so exact ties across candidates are common.
            let e = rng.gen_range(6..=10) as f64 / 10.0;
            let perplexity = if rng.gen_bool(0.7) {
                Some(1.0 + rng.gen_range(0..=20) as f64 / 100.0)
            } else {
                None
            };
            PoolCandidate {
                candidate_id: format!("c{i:03}"),
                signature: ExecutionSignature::new(bits),
                exec_success_rate: e,
                perplexity,
                pass_fraction: e,
                outputs: None,
            }
        })
        .collect()
}

#[test]
fn hierarchical_selection_matches_brute_force_on_randomized_pools() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let cfg = SelectionConfig::default();
    let mut selections = 0usize;
    let mut rejections = 0usize;
    for trial in 0..2_000 {
        let n = rng.gen_range(1..=64);
        let m = rng.gen_range(1..=16);
        let pool = make_pool(&mut rng, n, m);
        let expected = brute_force_select(&pool, &cfg);
        let actual = codeprobe_core::consensus::select_hierarchical("p", &pool, &cfg);
        let actual = match (actual.selected, actual.rejection_reason) {
            (Some(id), None) => Expected::Selected(id),
            (None, Some(reason)) => Expected::Rejected(reason),
            other => panic!("result must have exactly one side populated: {other:?}"),
        };
        assert_eq!(actual, expected, "trial {trial} pool size {n} m {m}");
        match expected {
            Expected::Selected(_) => selections += 1,
            Expected::Rejected(_) => rejections += 1,
        }
    }
    // The generator must exercise both outcomes to mean anything.
    assert!(selections > 100, "only {selections} selections");
    assert!(rejections > 100, "only {rejections} rejections");
}

#[test]
fn filter_stage_commutes_with_later_stages() {
    // Hierarchical selection on a pool equals hierarchical selection on the
    // rho-filtered subpool.
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    let cfg = SelectionConfig::default();
    for _ in 0..500 {
        let n = rng.gen_range(1..=48);
        let m = rng.gen_range(1..=8);
        let pool = make_pool(&mut rng, n, m);
        let filtered: Vec<PoolCandidate> = pool
            .iter()
            .filter(|c| c.exec_success_rate >= cfg.rho)
            .cloned()
            .collect();
        let full_run = codeprobe_core::consensus::select_hierarchical("p", &pool, &cfg);
        let sub_run = codeprobe_core::consensus::select_hierarchical("p", &filtered, &cfg);
        match (&full_run.selected, &sub_run.selected) {
            (Some(a), Some(b)) => assert_eq!(a, b),
            (None, None) => {
                // Reasons may differ at the empty boundary (AllFiltered on
                // the full pool vs EmptyPool on the subpool); both reject.
            }
            other => panic!("filter commutation violated: {other:?}"),
        }
    }
}

#[test]
fn rescaling_perplexity_never_changes_the_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xFACE);
    let cfg = SelectionConfig::default();
    for _ in 0..500 {
        let n = rng.gen_range(2..=48);
        let m = rng.gen_range(1..=8);
        let pool = make_pool(&mut rng, n, m);
        let scale = rng.gen_range(1..=1000) as f64 / 10.0;
        let rescaled: Vec<PoolCandidate> = pool
            .iter()
            .map(|c| PoolCandidate {
                perplexity: c.perplexity.map(|f| f * scale),
                ..c.clone()
            })
            .collect();
        let a = codeprobe_core::consensus::select_hierarchical("p", &pool, &cfg);
        let b = codeprobe_core::consensus::select_hierarchical("p", &rescaled, &cfg);
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.rejection_reason, b.rejection_reason);
    }
}
